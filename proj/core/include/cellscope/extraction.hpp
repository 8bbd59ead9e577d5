#pragma once

#include <span>
#include <vector>

#include "cellscope/geometry.hpp"
#include "cellscope/image.hpp"

namespace cellscope {

enum class DetectionMethod { Threshold, Persistence };

struct PixelOffset {
  double x = 0.0;
  double y = 0.0;
};

/// Via detector settings. Pixel coordinates are pixel-center indices: the
/// pixel in column i, row j sits at (i, j).
struct ExtractionConfig {
  DetectionMethod method = DetectionMethod::Threshold;
  /// Pixels at or above this intensity are foreground (threshold method).
  double binarize_threshold = 128.0;
  /// Disk radius of the binary erosion in pixels.
  int erosion_radius = 1;
  /// Components with fewer eroded pixels are noise.
  int min_blob_area = 4;
  /// Minimum peak lifetime in gray levels (persistence method).
  double persistence_threshold = 40.0;
  /// Gaussian pre-smoothing in pixels; 0 disables it.
  double smoothing_sigma = 0.0;
  double pixels_per_unit = 1.0;
  /// Pixel position that maps to the unit-space origin.
  PixelOffset origin_offset;

  void validate() const;
};

ViaSet detect_vias(const GrayImage& image, const ExtractionConfig& cfg);

/// Binarize, erode with a disk, label 8-connected components, drop small
/// ones, and report the intensity-weighted centroid of each survivor's
/// pre-erosion pixels.
ViaSet detect_vias_threshold(const GrayImage& image, const ExtractionConfig& cfg);

/// 0-dimensional superlevel-set persistence over the 8-connected pixel grid.
/// Peaks living at least persistence_threshold gray levels become vias,
/// located at the weighted centroid of the island above the midpoint of the
/// peak's birth and death levels.
ViaSet detect_vias_persistence(const GrayImage& image, const ExtractionConfig& cfg);

/// One peak of the superlevel filtration. death is the image minimum for
/// the component that never merges.
struct PersistencePair {
  std::size_t birth_pixel = 0;
  double birth = 0.0;
  double death = 0.0;
  bool essential = false;

  double persistence() const noexcept { return birth - death; }
};

/// Full 0-dimensional persistence diagram (pairs with zero lifetime
/// omitted), in order of death.
std::vector<PersistencePair> superlevel_persistence(std::span<const float> field, std::size_t width,
                                                    std::size_t height);

std::vector<ViaPoint> pixels_to_units(std::span<const ViaPoint> pixels, const ExtractionConfig& cfg);
std::vector<ViaPoint> units_to_pixels(std::span<const ViaPoint> units, const ExtractionConfig& cfg);

/// Separable Gaussian blur with clamped borders.
std::vector<float> gaussian_smooth(const GrayImage& image, double sigma);

}  // namespace cellscope
