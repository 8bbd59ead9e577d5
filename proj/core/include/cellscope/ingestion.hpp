#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cellscope/extraction.hpp"
#include "cellscope/image.hpp"
#include "cellscope/manifest.hpp"

namespace cellscope {

/// A margin-expanded window of a tile and where it sits in the tile.
struct CroppedInstance {
  GrayImage image;
  long origin_x = 0;
  long origin_y = 0;
};

/// Crops bbox grown by `margin` pixels on every side, clamped to the tile.
/// Throws InputError if the bbox does not overlap the tile or margin < 0.
CroppedInstance crop_instance(const GrayImage& tile, const InstanceRecord& record, long margin);

/// Canonical-orientation vias of one instance, in cell-local units whose
/// origin is the un-margined bbox corner.
struct CellInstance {
  std::string instance_id;
  std::string type_id;
  ViaSet vias;
};

/// Read-only tile store shared between extraction workers.
class TileCache {
 public:
  explicit TileCache(const DatasetManifest& manifest) : manifest_(manifest) {}

  /// Loads on first use; IoError propagates to the caller.
  std::shared_ptr<const GrayImage> get(const std::string& tile_id);

 private:
  const DatasetManifest& manifest_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const GrayImage>> tiles_;
};

/// Default safety margin: one node unit worth of pixels.
long default_margin(const NodeConfig& node);

/// crop -> detect -> canonicalize. `cfg` supplies the detector settings;
/// its pixel pitch and origin are taken from the manifest and the crop.
CellInstance extract_instance(const DatasetManifest& manifest, const InstanceRecord& record,
                              const ExtractionConfig& cfg, const GrayImage& tile,
                              std::optional<long> margin = std::nullopt);

/// `instance_id,type_id,x,y` with six decimals, one row per via.
std::string format_via_csv(const std::vector<CellInstance>& instances);
void write_via_csv(const std::filesystem::path& path, const std::vector<CellInstance>& instances);
/// Rows grouped by instance in file order. Throws IoError on malformed rows.
std::vector<CellInstance> read_via_csv(const std::filesystem::path& path);

}  // namespace cellscope
