#include "cellscope/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cellscope/error.hpp"

namespace cellscope {

CroppedInstance crop_instance(const GrayImage& tile, const InstanceRecord& record, long margin) {
  if (margin < 0) throw InputError("crop_instance: margin must be >= 0");
  const auto tw = static_cast<long>(tile.width());
  const auto th = static_cast<long>(tile.height());
  const PixelBox& b = record.bbox;
  if (b.x >= tw || b.y >= th || b.x + b.w <= 0 || b.y + b.h <= 0) {
    throw InputError("crop_instance: bbox of '" + record.instance_id + "' lies outside its tile");
  }
  const long x0 = std::max(0L, b.x - margin);
  const long y0 = std::max(0L, b.y - margin);
  const long x1 = std::min(tw, b.x + b.w + margin);
  const long y1 = std::min(th, b.y + b.h + margin);
  CroppedInstance out;
  out.image = tile.crop(static_cast<std::size_t>(x0), static_cast<std::size_t>(y0), static_cast<std::size_t>(x1 - x0),
                        static_cast<std::size_t>(y1 - y0));
  out.origin_x = x0;
  out.origin_y = y0;
  return out;
}

std::shared_ptr<const GrayImage> TileCache::get(const std::string& tile_id) {
  std::lock_guard lock(mutex_);
  auto it = tiles_.find(tile_id);
  if (it != tiles_.end()) return it->second;
  auto img = std::make_shared<const GrayImage>(read_gray_image(manifest_.tile_path(tile_id)));
  tiles_.emplace(tile_id, img);
  return img;
}

long default_margin(const NodeConfig& node) { return std::lround(node.pixels_per_unit); }

CellInstance extract_instance(const DatasetManifest& manifest, const InstanceRecord& record,
                              const ExtractionConfig& cfg, const GrayImage& tile, std::optional<long> margin) {
  const long margin_px = margin.value_or(default_margin(manifest.node));
  const CroppedInstance crop = crop_instance(tile, record, margin_px);
  ExtractionConfig local = cfg;
  local.pixels_per_unit = manifest.node.pixels_per_unit;
  local.origin_offset = {static_cast<double>(record.bbox.x - crop.origin_x),
                         static_cast<double>(record.bbox.y - crop.origin_y)};
  const ViaSet raw = detect_vias(crop.image, local);
  const CellTypeInfo& type = manifest.cell_type(record.type_id);
  // Neighbour vias picked up in the margin may sit up to a margin outside
  // the cell box.
  const double tolerance = static_cast<double>(margin_px) / manifest.node.pixels_per_unit + manifest.node.matching_radius;
  ViaSet canonical = canonicalize(raw, record.orientation, type.width, type.height, tolerance);
  return {record.instance_id, record.type_id, canonical.with_source(record.instance_id)};
}

std::string format_via_csv(const std::vector<CellInstance>& instances) {
  std::string out = "instance_id,type_id,x,y\n";
  char buf[64];
  for (const auto& inst : instances) {
    for (const auto& p : inst.vias) {
      std::snprintf(buf, sizeof(buf), ",%.6f,%.6f\n", p.x + 0.0, p.y + 0.0);
      out += inst.instance_id;
      out += ',';
      out += inst.type_id;
      out += buf;
    }
  }
  return out;
}

void write_via_csv(const std::filesystem::path& path, const std::vector<CellInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write via cache '" + path.string() + "'");
  out << format_via_csv(instances);
}

std::vector<CellInstance> read_via_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read via cache '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "instance_id,type_id,x,y") {
    throw IoError("via cache '" + path.string() + "' has a bad header");
  }
  std::vector<CellInstance> out;
  std::vector<std::vector<ViaPoint>> points;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, type, xs, ys;
    if (!std::getline(ss, id, ',') || !std::getline(ss, type, ',') || !std::getline(ss, xs, ',') ||
        !std::getline(ss, ys)) {
      throw IoError("via cache '" + path.string() + "' line " + std::to_string(line_no) + " is malformed");
    }
    double x = 0.0;
    double y = 0.0;
    try {
      std::size_t px = 0;
      std::size_t py = 0;
      x = std::stod(xs, &px);
      y = std::stod(ys, &py);
      if (px != xs.size() || py != ys.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw IoError("via cache '" + path.string() + "' line " + std::to_string(line_no) + " has a bad coordinate");
    }
    if (out.empty() || out.back().instance_id != id) {
      out.push_back({id, type, {}});
      points.emplace_back();
    }
    points.back().push_back({x, y});
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].vias = ViaSet(std::move(points[i]), out[i].instance_id);
  return out;
}

}  // namespace cellscope
