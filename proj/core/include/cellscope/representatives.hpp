#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cellscope/extraction.hpp"
#include "cellscope/geometry.hpp"
#include "cellscope/image.hpp"
#include "cellscope/ingestion.hpp"
#include "cellscope/manifest.hpp"

namespace cellscope {

/// Axis-aligned scoring box in representative coordinates; boundary counts
/// as inside.
struct ViaBox {
  double center_x = 0.0;
  double center_y = 0.0;
  double width = 0.0;
  double height = 0.0;

  bool contains(const ViaPoint& p) const noexcept;
};

struct BuildMeta {
  std::uint64_t seed = 0;
  std::size_t sample_size = 0;
  double majority_threshold = 0.5;
  std::string anchor_instance_id;
  /// 0 for the first build, n for the n-th stricter rebuild.
  int attempt = 0;
  /// Instances of this type available when the representative was built.
  std::size_t instance_count = 0;
  double cell_width = 0.0;
  double cell_height = 0.0;
};

/// Consensus via pattern of one cell type. support[i] belongs to vias[i].
struct Representative {
  std::string type_id;
  ViaSet vias;
  std::vector<double> support;
  ViaBox box;
  BuildMeta build_meta;
};

struct RepresentativeConfig {
  std::size_t sample_size = 50;
  std::uint64_t seed = 0;
  double majority_threshold = 0.5;
  double radius = kMatchingRadius;
  double kmeans_tolerance = 1e-4;
  int kmeans_max_iter = 100;
  double verify_min_match_fraction = 0.9;
  double verify_max_residual = kMatchingRadius / 2.0;
  /// Scale the match-fraction gate by the representative's mean vote
  /// support, i.e. by the share of vias the imaging actually delivers.
  bool verify_calibrate_support = true;
  /// Shift bound for aligning holdout instances to the representative.
  double verify_max_shift = 1.0;
  std::size_t holdout_size = 50;
};

/// Uniform sample without replacement of min(n, |instances|), ordered by
/// instance id. The input order does not matter.
std::vector<CellInstance> sample_instances(std::span<const CellInstance> instances, std::size_t n,
                                           std::uint64_t seed);

/// Instances moved into the frame of the best-connected one.
struct AlignedCohort {
  std::vector<std::string> instance_ids;
  std::vector<ViaSet> aligned;
  /// translations[i] maps instance i onto the anchor.
  std::vector<Translation> translations;
  std::size_t anchor_index = 0;

  const std::string& anchor_instance_id() const { return instance_ids[anchor_index]; }
};

/// Anchor = instance with the largest sum of pairwise match counts (ties to
/// the smallest instance id); every instance is translated onto it.
AlignedCohort align_cohort(std::span<const CellInstance> subset, double r);

struct VoteCluster {
  ViaPoint center;
  std::vector<ViaPoint> members;
  /// Distinct contributing instances, as indices into the cohort.
  std::vector<std::size_t> member_instances;
  /// member_instances.size() / cohort size.
  double support = 0.0;
};

/// All vote clusters of a cohort, independent of any threshold. Clusters are
/// grown around the best-supported unclaimed point and take at most one
/// point per instance, the nearest one within r of the running center.
std::vector<VoteCluster> cluster_votes(std::span<const ViaSet> aligned, double r);

/// Clusters whose support strictly exceeds majority_threshold, sorted by
/// center.
std::vector<VoteCluster> vote_vias(std::span<const ViaSet> aligned, double r, double majority_threshold);

struct KMeansResult {
  /// Centers in cluster order (not sorted).
  std::vector<ViaPoint> centers;
  int iterations = 0;
};

/// Lloyd refinement seeded with the cluster centroids over the pooled
/// member points.
KMeansResult refine_kmeans(std::span<const VoteCluster> clusters, double tolerance = 1e-4, int max_iter = 100);

/// sample -> align_cohort -> vote_vias -> refine_kmeans. Throws InputError
/// for fewer than two instances and DegenerateLibraryError when two
/// consensus vias end up closer than 2r.
Representative build_representative(const CellTypeInfo& type, std::span<const CellInstance> instances,
                                     const RepresentativeConfig& cfg);

/// Threshold schedule for the n-th stricter rebuild.
double stricter_threshold(int attempt) noexcept;

/// Rebuild from a different sample (seed + attempt) at a raised majority.
Representative rebuild_stricter(const CellTypeInfo& type, std::span<const CellInstance> instances,
                                const RepresentativeConfig& cfg, int attempt);

/// Grow every box so that the vias of all same-width representatives fit
/// when centered on the cell.
void fit_boxes(std::map<std::string, Representative>& reps, std::span<const CellTypeInfo> types, double r);

struct InstanceCheck {
  std::string instance_id;
  double match_fraction = 0.0;
  double mean_residual = 0.0;
};

struct VerificationReport {
  std::string type_id;
  std::vector<InstanceCheck> instances;
  double mean_match_fraction = 0.0;
  double mean_residual = 0.0;
  /// The gate mean_match_fraction was held to.
  double required_match_fraction = 0.0;
  bool pass = false;
};

/// Aligns each holdout instance to the representative, clips it to the box
/// and measures how many representative vias find a partner. Passes when the
/// mean match fraction reaches the gate and the mean residual stays within
/// verify_max_residual.
VerificationReport verify_representative(const Representative& rep, std::span<const CellInstance> holdout,
                                         const RepresentativeConfig& cfg);

struct OverlayInput {
  /// Margin-expanded crop as fed to the detector.
  GrayImage image;
  /// The instance's canonical vias, used to place the representative.
  ViaSet instance_vias;
  Orientation orientation = Orientation::R0;
  double pixels_per_unit = 1.0;
  /// Pixel position of the un-margined bbox corner inside the crop.
  PixelOffset origin_offset;
};

/// The crop with the aligned representative's vias drawn as red circles of
/// radius r. Empty representatives leave the image untouched.
RgbImage render_overlay(const Representative& rep, const OverlayInput& input, double r);

std::string serialize_representatives(const std::map<std::string, Representative>& reps);
std::map<std::string, Representative> parse_representatives(const std::string& json_text);
void save_representatives(const std::filesystem::path& path, const std::map<std::string, Representative>& reps);
std::map<std::string, Representative> load_representatives(const std::filesystem::path& path);

}  // namespace cellscope
