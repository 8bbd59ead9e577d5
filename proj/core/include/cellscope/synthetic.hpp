#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cellscope/geometry.hpp"
#include "cellscope/image.hpp"
#include "cellscope/manifest.hpp"
#include "cellscope/random.hpp"

namespace cellscope {

struct PlantedPair {
  std::size_t a = 0;
  std::size_t b = 0;
  /// 0 for identical patterns, otherwise the desired pair score.
  double target_score = 0.0;
};

struct SynthLibrarySpec {
  std::uint64_t seed = 1;
  std::size_t type_count = 20;
  std::size_t min_vias = 4;
  std::size_t max_vias = 16;
  /// Cell widths in units; type i gets width_classes[i % size] unless it is
  /// the second member of a planted pair.
  std::vector<int> width_classes{8, 10, 12, 14};
  int cell_height = 10;
  std::vector<PlantedPair> planted;
  /// Minimum center distance inside a pattern; must be at least 2r.
  double min_separation = 1.5;
  /// Keep-out from the cell border.
  double border = 0.5;
  /// Every pair that is not planted must score above this.
  double unrelated_min_score = 0.3;
  int max_attempts = 200;
};

struct SynthType {
  CellTypeInfo info;
  ViaSet pattern;
};

struct SynthLibrary {
  std::vector<SynthType> types;

  std::vector<CellTypeInfo> infos() const;
  const SynthType& type(const std::string& type_id) const;
};

/// Throws InputError when the spec cannot be realized (e.g. too many vias
/// for the cell area at the requested separation).
SynthLibrary gen_library(const SynthLibrarySpec& spec);

struct NoiseSpec {
  double jitter_sigma = 0.0;
  double dropout_prob = 0.0;
  /// Expected spurious blobs per cell, or per pattern via when
  /// spurious_per_via is set.
  double spurious_rate = 0.0;
  bool spurious_per_via = false;
  double intensity_noise_sigma = 0.0;
  /// Recorded bbox error, uniform in [-offset_range, offset_range] per axis.
  double offset_range = 0.0;
  /// Via peak above the gray level 128 the fixed-threshold detector uses.
  double contrast_margin = 72.0;

  void validate() const;
};

/// Drawing parameters shared by every rendered instance.
struct RenderStyle {
  double pixels_per_unit = 8.0;
  std::uint8_t background = 60;
  /// Flat-top radius and outer radius of a via blob, in units.
  double core_radius = 0.3;
  double edge_radius = 0.45;
  /// Extra area around the cell in which spurious blobs may fall, in units.
  double spurious_margin = 1.0;
};

struct RenderedInstance {
  GrayImage image;
  /// The recorded (offset-perturbed) cell bbox inside `image`.
  PixelBox bbox;
  Orientation orientation = Orientation::R0;
  /// Surviving pattern vias, canonical frame, relative to the recorded bbox:
  /// what a perfect extractor returns (spurious blobs excluded).
  ViaSet truth;
  /// Spurious blob centers in the same frame.
  ViaSet spurious;
};

/// One cell instance on its own canvas, padded by `pad_units` on each side.
RenderedInstance render_instance(const SynthType& type, const NoiseSpec& noise, Orientation orientation, Rng& rng,
                                 const RenderStyle& style = {}, double pad_units = 3.0);

struct PlantedSwap {
  /// Type written to the manifest.
  std::string claimed_type;
  /// Type actually rendered.
  std::string true_type;
};

/// Up to `count` swaps between same-size types whose patterns score at
/// least min_score, each type used once, in id order. Throws InputError when
/// fewer pairs qualify.
std::vector<PlantedSwap> choose_swaps(const SynthLibrary& library, std::size_t count, double min_score);

struct InstanceTruth {
  std::string true_type;
  ViaSet vias;
};

struct SynthDataset {
  DatasetManifest manifest;
  std::map<std::string, GrayImage> tiles;
  std::map<std::string, InstanceTruth> truth;
};

struct DatasetSpec {
  std::uint64_t seed = 1;
  std::size_t instances_per_type = 50;
  std::vector<PlantedSwap> swaps;
  RenderStyle style;
  std::size_t instances_per_tile = 25;
  /// Spacing between neighbouring cells inside a tile, in units.
  double gap_units = 3.0;
  /// Draw orientations uniformly from all four; otherwise R0 only.
  bool random_orientation = true;
  std::string node_name = "synthetic";
};

/// Lays instances out in tiles. Each swap replaces one instance of
/// claimed_type by a rendering of true_type. Output is independent of the
/// thread count.
SynthDataset gen_dataset(const SynthLibrary& library, const NoiseSpec& noise, const DatasetSpec& spec,
                         int workers = 1);

/// Writes manifest.json, tiles/<tile_id>.png and truth.json into dir.
void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir);

std::string truth_to_json(const std::map<std::string, InstanceTruth>& truth);
std::map<std::string, InstanceTruth> load_truth(const std::filesystem::path& path);

/// Brute-force reference for align: the best maximum-bipartite match count
/// over every multiple of grid_step within r of a pairwise difference, then
/// (with refine) a quadtree branch and bound that finds cells thinner than
/// the grid. Refuses sets with more than 20 points and grid_step > r/8.
std::size_t oracle_align(const ViaSet& a, const ViaSet& b, double r, double grid_step, bool refine = true);

}  // namespace cellscope
