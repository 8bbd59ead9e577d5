#include "cellscope/manifest.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string_view>

#include <nlohmann/json.hpp>

namespace cellscope {
namespace {

using Json = nlohmann::ordered_json;
using Kind = ManifestError::Kind;

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw ManifestError(Kind::Schema, where, "manifest schema violation at " + where + ": " + what);
}

const Json& require(const Json& obj, std::string_view key, const std::string& where) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) schema_error(where, "missing key '" + std::string(key) + "'");
  return *it;
}

void require_keys_only(const Json& obj, std::initializer_list<std::string_view> keys, const std::string& where) {
  if (!obj.is_object()) schema_error(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto k : keys) known = known || key == k;
    if (!known) schema_error(where, "unknown key '" + key + "'");
  }
}

std::string get_string(const Json& obj, std::string_view key, const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_string()) schema_error(where + "." + std::string(key), "expected a string");
  std::string s = v.get<std::string>();
  if (s.empty()) schema_error(where + "." + std::string(key), "must not be empty");
  return s;
}

double get_number(const Json& obj, std::string_view key, const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_number()) schema_error(where + "." + std::string(key), "expected a number");
  return v.get<double>();
}

long get_integer(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) schema_error(where, "expected an integer");
  return v.get<long>();
}

NodeConfig parse_node(const Json& j) {
  require_keys_only(j, {"name", "unit_length_nm", "matching_radius", "pixels_per_unit"}, "node");
  NodeConfig node;
  node.name = get_string(j, "name", "node");
  node.unit_length_nm = get_number(j, "unit_length_nm", "node");
  node.matching_radius = get_number(j, "matching_radius", "node");
  node.pixels_per_unit = get_number(j, "pixels_per_unit", "node");
  try {
    node.validate();
  } catch (const InputError& e) {
    schema_error("node", e.what());
  }
  return node;
}

const Json& require_array(const Json& root, std::string_view key) {
  const Json& v = require(root, key, "manifest");
  if (!v.is_array()) schema_error(std::string(key), "expected an array");
  return v;
}

}  // namespace

const TileInfo& DatasetManifest::tile(const std::string& tile_id) const {
  for (const auto& t : tiles) {
    if (t.tile_id == tile_id) return t;
  }
  throw ManifestError(Kind::DanglingReference, tile_id, "unknown tile_id '" + tile_id + "'");
}

const CellTypeInfo& DatasetManifest::cell_type(const std::string& type_id) const {
  for (const auto& t : cell_types) {
    if (t.type_id == type_id) return t;
  }
  throw ManifestError(Kind::DanglingReference, type_id, "unknown type_id '" + type_id + "'");
}

const InstanceRecord& DatasetManifest::instance(const std::string& instance_id) const {
  for (const auto& i : instances) {
    if (i.instance_id == instance_id) return i;
  }
  throw ManifestError(Kind::DanglingReference, instance_id, "unknown instance_id '" + instance_id + "'");
}

std::filesystem::path DatasetManifest::tile_path(const std::string& tile_id) const {
  std::filesystem::path p(tile(tile_id).image_path);
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ManifestError(Kind::Schema, "manifest", std::string("manifest is not valid JSON: ") + e.what());
  }
  require_keys_only(root, {"node", "tiles", "cell_types", "instances"}, "manifest");

  DatasetManifest m;
  m.base_dir = base_dir;
  m.node = parse_node(require(root, "node", "manifest"));

  std::set<std::string> tile_ids;
  for (const auto& t : require_array(root, "tiles")) {
    require_keys_only(t, {"tile_id", "image_path"}, "tiles[]");
    TileInfo info{get_string(t, "tile_id", "tiles[]"), ""};
    info.image_path = get_string(t, "image_path", "tiles[" + info.tile_id + "]");
    if (!tile_ids.insert(info.tile_id).second) {
      throw ManifestError(Kind::DuplicateId, info.tile_id, "duplicate tile_id '" + info.tile_id + "'");
    }
    m.tiles.push_back(std::move(info));
  }

  std::set<std::string> type_ids;
  for (const auto& t : require_array(root, "cell_types")) {
    require_keys_only(t, {"type_id", "function_class", "width", "height"}, "cell_types[]");
    CellTypeInfo info;
    info.type_id = get_string(t, "type_id", "cell_types[]");
    const std::string where = "cell_types[" + info.type_id + "]";
    info.function_class = get_string(t, "function_class", where);
    const long w = get_integer(require(t, "width", where), where + ".width");
    const long h = get_integer(require(t, "height", where), where + ".height");
    if (w < 1 || h < 1) schema_error(where, "width and height must be >= 1");
    info.width = static_cast<int>(w);
    info.height = static_cast<int>(h);
    if (!type_ids.insert(info.type_id).second) {
      throw ManifestError(Kind::DuplicateId, info.type_id, "duplicate type_id '" + info.type_id + "'");
    }
    m.cell_types.push_back(std::move(info));
  }

  std::set<std::string> instance_ids;
  for (const auto& j : require_array(root, "instances")) {
    require_keys_only(j, {"instance_id", "type_id", "tile_id", "bbox", "orientation"}, "instances[]");
    InstanceRecord rec;
    rec.instance_id = get_string(j, "instance_id", "instances[]");
    const std::string where = "instances[" + rec.instance_id + "]";
    rec.type_id = get_string(j, "type_id", where);
    rec.tile_id = get_string(j, "tile_id", where);
    const Json& bbox = require(j, "bbox", where);
    if (!bbox.is_array() || bbox.size() != 4) schema_error(where + ".bbox", "expected [x, y, w, h]");
    rec.bbox = {get_integer(bbox[0], where + ".bbox"), get_integer(bbox[1], where + ".bbox"),
                get_integer(bbox[2], where + ".bbox"), get_integer(bbox[3], where + ".bbox")};
    if (rec.bbox.w < 1 || rec.bbox.h < 1) schema_error(where + ".bbox", "width and height must be >= 1");
    try {
      rec.orientation = parse_orientation(get_string(j, "orientation", where));
    } catch (const InputError& e) {
      schema_error(where + ".orientation", e.what());
    }
    if (!tile_ids.count(rec.tile_id)) {
      throw ManifestError(Kind::DanglingReference, rec.tile_id,
                          "instance '" + rec.instance_id + "' references unknown tile_id '" + rec.tile_id + "'");
    }
    if (!type_ids.count(rec.type_id)) {
      throw ManifestError(Kind::DanglingReference, rec.type_id,
                          "instance '" + rec.instance_id + "' references unknown type_id '" + rec.type_id + "'");
    }
    if (!instance_ids.insert(rec.instance_id).second) {
      throw ManifestError(Kind::DuplicateId, rec.instance_id, "duplicate instance_id '" + rec.instance_id + "'");
    }
    m.instances.push_back(std::move(rec));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError(Kind::MissingFile, path.string(), "cannot open manifest '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

std::string serialize_manifest(const DatasetManifest& m) {
  Json root;
  root["node"] = {{"name", m.node.name},
                  {"unit_length_nm", m.node.unit_length_nm},
                  {"matching_radius", m.node.matching_radius},
                  {"pixels_per_unit", m.node.pixels_per_unit}};
  root["tiles"] = Json::array();
  for (const auto& t : m.tiles) root["tiles"].push_back({{"tile_id", t.tile_id}, {"image_path", t.image_path}});
  root["cell_types"] = Json::array();
  for (const auto& t : m.cell_types) {
    root["cell_types"].push_back(
        {{"type_id", t.type_id}, {"function_class", t.function_class}, {"width", t.width}, {"height", t.height}});
  }
  root["instances"] = Json::array();
  for (const auto& i : m.instances) {
    root["instances"].push_back({{"instance_id", i.instance_id},
                                 {"type_id", i.type_id},
                                 {"tile_id", i.tile_id},
                                 {"bbox", {i.bbox.x, i.bbox.y, i.bbox.w, i.bbox.h}},
                                 {"orientation", std::string(to_string(i.orientation))}});
  }
  return root.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << serialize_manifest(manifest);
}

}  // namespace cellscope
