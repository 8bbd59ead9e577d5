#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cellscope {

/// Two vias match when their distance is strictly below half a node unit.
inline constexpr double kMatchingRadius = 0.5;

/// A via center in node units.
struct ViaPoint {
  double x = 0.0;
  double y = 0.0;

  friend auto operator<=>(const ViaPoint&, const ViaPoint&) = default;
};

/// Offset applied to the first set of a pair so that a + t lands on b.
struct Translation {
  double dx = 0.0;
  double dy = 0.0;

  double norm2() const noexcept { return dx * dx + dy * dy; }
  friend auto operator<=>(const Translation&, const Translation&) = default;
};

double distance(const ViaPoint& a, const ViaPoint& b) noexcept;
double distance2(const ViaPoint& a, const ViaPoint& b) noexcept;

/// Via centers of one cell instance or representative, kept sorted by (x, y)
/// so that two sets with the same points compare equal regardless of input
/// order. The source tag is provenance only and does not take part in
/// equality.
class ViaSet {
 public:
  using const_iterator = std::vector<ViaPoint>::const_iterator;

  ViaSet() = default;
  /// Throws InputError on non-finite coordinates.
  explicit ViaSet(std::vector<ViaPoint> points, std::string source = {});

  const std::vector<ViaPoint>& points() const noexcept { return points_; }
  const std::string& source() const noexcept { return source_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const ViaPoint& operator[](std::size_t i) const { return points_[i]; }
  const_iterator begin() const noexcept { return points_.begin(); }
  const_iterator end() const noexcept { return points_.end(); }

  ViaSet translated(Translation t) const;
  ViaSet with_source(std::string source) const;

  /// Smallest pairwise distance; +inf for fewer than two points.
  double min_separation() const;

  friend bool operator==(const ViaSet& a, const ViaSet& b) noexcept {
    return a.points_ == b.points_;
  }

 private:
  std::vector<ViaPoint> points_;
  std::string source_;
};

/// The four placements a standard cell can have in a row.
enum class Orientation { R0, R180, MX, MX_R180 };

std::string_view to_string(Orientation o) noexcept;
/// Throws InputError for anything but "R0", "R180", "MX", "MX_R180".
Orientation parse_orientation(std::string_view text);

/// Map points placed in the canonical frame into orientation `o` inside a
/// box_width x box_height cell. MX mirrors about the horizontal center line,
/// R180 rotates about the box center. Every variant is its own inverse.
ViaPoint apply_orientation(ViaPoint p, Orientation o, double box_width, double box_height) noexcept;
ViaSet apply_orientation(const ViaSet& vias, Orientation o, double box_width, double box_height);

/// Undo orientation `o` so the set is expressed in the canonical frame.
/// Points farther than `tolerance` outside the box are rejected with
/// InputError.
ViaSet canonicalize(const ViaSet& vias, Orientation o, double box_width, double box_height,
                    double tolerance = kMatchingRadius);

/// Every difference b_j - a_i, collapsed onto a grid of side dedup_cell
/// (first occurrence in (i, j) order wins), sorted lexicographically.
std::vector<Translation> candidate_translations(const ViaSet& a, const ViaSet& b, double dedup_cell);

struct AlignmentResult {
  Translation translation;
  /// (index into a, index into b), sorted by index into a.
  std::vector<std::pair<std::size_t, std::size_t>> matched_pairs;
  std::size_t match_count = 0;

  /// Mean post-translation distance of the matched pairs; 0 if none.
  double mean_residual(const ViaSet& a, const ViaSet& b) const;
};

/// Greedy one-to-one matching of a + t against b: pairs are accepted in
/// ascending distance (ties by index) while both endpoints are free and the
/// distance is strictly below r.
AlignmentResult match_vias(const ViaSet& a, const ViaSet& b, Translation t, double r);

/// Translation of a onto b with the largest number of matched vias.
///
/// The search visits the pairwise differences b_j - a_i and, because a via
/// match is an open disk of radius r around each difference, also the lens
/// corners where two such disks overlap; that covers every cell of the disk
/// arrangement, so no continuous translation matches more vias. Ties go to
/// the smallest |t|^2, then to the lexicographically smallest t as seen
/// from the set whose sorted point list is smaller. The winning
/// translation is finally refined to the mean offset of its matched pairs
/// when that keeps (or raises) the match count.
///
/// The pair is processed in a canonical order, so align(b, a) is exactly the
/// mirror of align(a, b).
AlignmentResult align(const ViaSet& a, const ViaSet& b, double r);

/// align restricted to translations with |t| <= max_shift. Use it when both
/// sets live in the same cell frame and only bbox error separates them; an
/// infinite bound is the unrestricted search. With no admissible match the
/// result is the zero translation with no pairs.
AlignmentResult align(const ViaSet& a, const ViaSet& b, double r, double max_shift);

/// 1 - 2 * matches / (|a| + |b|). Both empty scores 0, exactly one empty 1.
double similarity_score(std::size_t match_count, std::size_t size_a, std::size_t size_b) noexcept;
double similarity_score(const ViaSet& a, const ViaSet& b, double r);

/// Technology node parameters. Coordinates everywhere are in node units
/// (the minimum feature spacing), so the matching radius is always 0.5.
struct NodeConfig {
  std::string name;
  double unit_length_nm = 1.0;
  double matching_radius = kMatchingRadius;
  double pixels_per_unit = 1.0;

  /// Throws InputError when a field is out of range.
  void validate() const;
};

}  // namespace cellscope
