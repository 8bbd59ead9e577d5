#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cellscope/error.hpp"
#include "cellscope/geometry.hpp"

namespace cellscope {

struct TileInfo {
  std::string tile_id;
  /// Relative paths resolve against the manifest's directory.
  std::string image_path;
};

struct CellTypeInfo {
  std::string type_id;
  /// Logic function; drive-strength variants share one class.
  std::string function_class;
  /// In node units.
  int width = 1;
  int height = 1;
};

/// Pixel rectangle [x, x + w) x [y, y + h) within a tile.
struct PixelBox {
  long x = 0;
  long y = 0;
  long w = 0;
  long h = 0;
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct InstanceRecord {
  std::string instance_id;
  std::string type_id;
  std::string tile_id;
  PixelBox bbox;
  Orientation orientation = Orientation::R0;
};

struct DatasetManifest {
  NodeConfig node;
  std::vector<TileInfo> tiles;
  std::vector<CellTypeInfo> cell_types;
  std::vector<InstanceRecord> instances;
  /// Directory of the manifest file; base for relative tile paths.
  std::filesystem::path base_dir;

  const TileInfo& tile(const std::string& tile_id) const;
  const CellTypeInfo& cell_type(const std::string& type_id) const;
  const InstanceRecord& instance(const std::string& instance_id) const;
  std::filesystem::path tile_path(const std::string& tile_id) const;
};

class ManifestError : public Error {
 public:
  enum class Kind { MissingFile, Schema, DanglingReference, DuplicateId };

  ManifestError(Kind kind, std::string offending_id, const std::string& what)
      : Error(what), kind_(kind), offending_id_(std::move(offending_id)) {}

  Kind kind() const noexcept { return kind_; }
  /// The tile, type, or instance id at fault (or the file path).
  const std::string& offending_id() const noexcept { return offending_id_; }

 private:
  Kind kind_;
  std::string offending_id_;
};

/// Parses and validates a manifest. Every defect raises ManifestError; no
/// partially filled manifest is ever returned.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir = {});
/// Canonical JSON form (two-space indent, keys in schema order).
std::string serialize_manifest(const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace cellscope
