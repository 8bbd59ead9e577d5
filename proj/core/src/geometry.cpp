#include "cellscope/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "cellscope/error.hpp"
#include "point_grid.hpp"

namespace cellscope {
namespace {

// Offset used to step from a lens corner into the interior of both disks.
constexpr double kLensNudge = 1e-7;
constexpr int kPolishRounds = 4;

double positive_zero(double v) noexcept { return v + 0.0; }

bool better_tie(const Translation& lhs, const Translation& rhs) noexcept {
  const double nl = lhs.norm2();
  const double nr = rhs.norm2();
  if (nl != nr) return nl < nr;
  return lhs < rhs;
}

AlignmentResult greedy_match(const ViaSet& a, const ViaSet& b, const detail::PointGrid& grid_b,
                             Translation t, double r) {
  struct Candidate {
    double d2;
    std::size_t i;
    std::size_t j;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const ViaPoint q{a[i].x + t.dx, a[i].y + t.dy};
    grid_b.for_each_within(q, r, [&](std::size_t j) { candidates.push_back({distance2(q, b[j]), i, j}); });
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& l, const Candidate& r2) {
    return std::tie(l.d2, l.i, l.j) < std::tie(r2.d2, r2.i, r2.j);
  });

  AlignmentResult result;
  result.translation = t;
  std::vector<bool> used_a(a.size(), false);
  std::vector<bool> used_b(b.size(), false);
  for (const auto& c : candidates) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = true;
    used_b[c.j] = true;
    result.matched_pairs.emplace_back(c.i, c.j);
  }
  std::sort(result.matched_pairs.begin(), result.matched_pairs.end());
  result.match_count = result.matched_pairs.size();
  return result;
}

// Lens candidates for pairs of differences closer than 2r: the midpoint and
// both lens corners nudged into the lens. `bound[p]` caps the depth of any
// point within r of unique[p]; pairs that cannot reach min_depth are skipped.
std::vector<Translation> lens_candidates(const std::vector<ViaPoint>& unique, const std::vector<std::size_t>& bound,
                                         std::size_t min_depth, double r) {
  std::vector<Translation> out;
  const double reach = 2.0 * r;
  detail::PointGrid grid(unique, reach);
  for (std::size_t p = 0; p < unique.size(); ++p) {
    if (bound[p] < min_depth) continue;
    const ViaPoint cp = unique[p];
    grid.for_each_within(cp, reach, [&](std::size_t q) {
      if (q <= p || bound[q] < min_depth) return;
      const ViaPoint cq = unique[q];
      const double d = distance(cp, cq);
      if (d <= 0.0) return;
      const ViaPoint mid{(cp.x + cq.x) / 2.0, (cp.y + cq.y) / 2.0};
      out.push_back({mid.x, mid.y});
      const double h2 = r * r - d * d / 4.0;
      if (h2 <= 0.0) return;
      const double h = std::sqrt(h2);
      const double nx = -(cq.y - cp.y) / d;
      const double ny = (cq.x - cp.x) / d;
      for (double sign : {1.0, -1.0}) {
        const ViaPoint corner{mid.x + sign * h * nx, mid.y + sign * h * ny};
        double ix = (cp.x - corner.x) + (cq.x - corner.x);
        double iy = (cp.y - corner.y) + (cq.y - corner.y);
        const double len = std::hypot(ix, iy);
        if (len <= 0.0) continue;
        ix /= len;
        iy /= len;
        out.push_back({corner.x + kLensNudge * ix, corner.y + kLensNudge * iy});
      }
    });
  }
  return out;
}

struct Search {
  const ViaSet& a;
  const ViaSet& b;
  double r;
  double max_shift2;
  detail::PointGrid diff_grid;
  detail::PointGrid grid_b;
  AlignmentResult best;
  bool have_best = false;

  // Folds candidates into best. The outcome is the maximum of (match count,
  // tie order) over everything ever offered, whatever the call sequence.
  void offer(const std::vector<Translation>& candidates) {
    // A translation matches at most as many vias as there are differences
    // within r of it, which is cheap to count and orders the search.
    std::vector<std::size_t> depth(candidates.size(), 0);
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (candidates[k].norm2() > max_shift2) continue;
      depth[k] = diff_grid.count_within({candidates[k].dx, candidates[k].dy}, r);
    }
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t rr) {
      if (depth[l] != depth[rr]) return depth[l] > depth[rr];
      return better_tie(candidates[l], candidates[rr]);
    });
    for (std::size_t k : order) {
      if (depth[k] == 0) break;
      if (have_best && depth[k] < best.match_count) break;
      if (have_best && depth[k] == best.match_count && !better_tie(candidates[k], best.translation)) continue;
      AlignmentResult res = greedy_match(a, b, grid_b, candidates[k], r);
      if (!have_best || res.match_count > best.match_count ||
          (res.match_count == best.match_count && better_tie(res.translation, best.translation))) {
        best = std::move(res);
        have_best = true;
      }
    }
  }
};

AlignmentResult align_ordered(const ViaSet& a, const ViaSet& b, double r, double max_shift) {
  std::vector<ViaPoint> diffs;
  diffs.reserve(a.size() * b.size());
  for (const auto& pa : a) {
    for (const auto& pb : b) diffs.push_back({pb.x - pa.x, pb.y - pa.y});
  }

  const double max_shift2 = std::isinf(max_shift) ? max_shift : max_shift * max_shift;
  Search search{a, b, r, max_shift2, detail::PointGrid(diffs, r), detail::PointGrid(b.points(), r), {}, false};
  search.offer(candidate_translations(a, b, r / 4.0));

  // Exact duplicates add nothing to the arrangement.
  std::vector<ViaPoint> unique = diffs;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  // Any point within r of a difference has all its covering differences
  // within 2r of it (plus the nudge).
  const double wide = 2.0 * r + 1e-6;
  const detail::PointGrid wide_grid(diffs, wide);
  std::vector<std::size_t> bound(unique.size());
  for (std::size_t p = 0; p < unique.size(); ++p) bound[p] = wide_grid.count_within(unique[p], wide);
  search.offer(lens_candidates(unique, bound, search.best.match_count, r));

  AlignmentResult best = std::move(search.best);
  const detail::PointGrid& grid_b = search.grid_b;
  for (int round = 0; round < kPolishRounds && best.match_count > 0; ++round) {
    double sx = 0.0;
    double sy = 0.0;
    for (auto [i, j] : best.matched_pairs) {
      sx += b[j].x - a[i].x;
      sy += b[j].y - a[i].y;
    }
    const double n = static_cast<double>(best.match_count);
    const Translation refined{sx / n, sy / n};
    if (refined == best.translation || refined.norm2() > max_shift2) break;
    AlignmentResult res = greedy_match(a, b, grid_b, refined, r);
    if (res.match_count < best.match_count) break;
    best = std::move(res);
  }
  return best;
}

}  // namespace

double distance2(const ViaPoint& a, const ViaPoint& b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

double distance(const ViaPoint& a, const ViaPoint& b) noexcept { return std::sqrt(distance2(a, b)); }

ViaSet::ViaSet(std::vector<ViaPoint> points, std::string source)
    : points_(std::move(points)), source_(std::move(source)) {
  for (const auto& p : points_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InputError("ViaSet: non-finite via coordinate");
    }
  }
  std::sort(points_.begin(), points_.end());
}

ViaSet ViaSet::translated(Translation t) const {
  std::vector<ViaPoint> moved;
  moved.reserve(points_.size());
  for (const auto& p : points_) moved.push_back({p.x + t.dx, p.y + t.dy});
  return ViaSet(std::move(moved), source_);
}

ViaSet ViaSet::with_source(std::string source) const {
  ViaSet copy = *this;
  copy.source_ = std::move(source);
  return copy;
}

double ViaSet::min_separation() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      best = std::min(best, distance(points_[i], points_[j]));
    }
  }
  return best;
}

std::string_view to_string(Orientation o) noexcept {
  switch (o) {
    case Orientation::R0:
      return "R0";
    case Orientation::R180:
      return "R180";
    case Orientation::MX:
      return "MX";
    case Orientation::MX_R180:
      return "MX_R180";
  }
  return "R0";
}

Orientation parse_orientation(std::string_view text) {
  if (text == "R0") return Orientation::R0;
  if (text == "R180") return Orientation::R180;
  if (text == "MX") return Orientation::MX;
  if (text == "MX_R180") return Orientation::MX_R180;
  throw InputError("unknown orientation '" + std::string(text) + "'");
}

ViaPoint apply_orientation(ViaPoint p, Orientation o, double box_width, double box_height) noexcept {
  switch (o) {
    case Orientation::R0:
      return p;
    case Orientation::R180:
      return {box_width - p.x, box_height - p.y};
    case Orientation::MX:
      return {p.x, box_height - p.y};
    case Orientation::MX_R180:
      return {box_width - p.x, p.y};
  }
  return p;
}

ViaSet apply_orientation(const ViaSet& vias, Orientation o, double box_width, double box_height) {
  std::vector<ViaPoint> out;
  out.reserve(vias.size());
  for (const auto& p : vias) out.push_back(apply_orientation(p, o, box_width, box_height));
  return ViaSet(std::move(out), vias.source());
}

ViaSet canonicalize(const ViaSet& vias, Orientation o, double box_width, double box_height, double tolerance) {
  for (const auto& p : vias) {
    if (p.x < -tolerance || p.x > box_width + tolerance || p.y < -tolerance || p.y > box_height + tolerance) {
      throw InputError("canonicalize: via (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                       ") lies outside the " + std::to_string(box_width) + " x " + std::to_string(box_height) +
                       " box");
    }
  }
  return apply_orientation(vias, o, box_width, box_height);
}

std::vector<Translation> candidate_translations(const ViaSet& a, const ViaSet& b, double dedup_cell) {
  if (!(dedup_cell > 0.0)) throw InputError("candidate_translations: dedup_cell must be positive");
  std::map<std::pair<std::int64_t, std::int64_t>, Translation> cells;
  for (const auto& pa : a) {
    for (const auto& pb : b) {
      const Translation t{pb.x - pa.x, pb.y - pa.y};
      const auto key = std::make_pair(std::llround(t.dx / dedup_cell), std::llround(t.dy / dedup_cell));
      cells.emplace(key, Translation{positive_zero(t.dx), positive_zero(t.dy)});
    }
  }
  std::vector<Translation> out;
  out.reserve(cells.size());
  for (const auto& [key, t] : cells) out.push_back(t);
  std::sort(out.begin(), out.end());
  return out;
}

double AlignmentResult::mean_residual(const ViaSet& a, const ViaSet& b) const {
  if (matched_pairs.empty()) return 0.0;
  double sum = 0.0;
  for (auto [i, j] : matched_pairs) {
    sum += distance({a[i].x + translation.dx, a[i].y + translation.dy}, b[j]);
  }
  return sum / static_cast<double>(matched_pairs.size());
}

AlignmentResult match_vias(const ViaSet& a, const ViaSet& b, Translation t, double r) {
  if (!(r > 0.0)) throw InputError("match_vias: radius must be positive");
  const detail::PointGrid grid_b(b.points(), r);
  return greedy_match(a, b, grid_b, t, r);
}

AlignmentResult align(const ViaSet& a, const ViaSet& b, double r) {
  return align(a, b, r, std::numeric_limits<double>::infinity());
}

AlignmentResult align(const ViaSet& a, const ViaSet& b, double r, double max_shift) {
  if (!(r > 0.0)) throw InputError("align: radius must be positive");
  if (!(max_shift >= 0.0)) throw InputError("align: max_shift must be >= 0");
  if (a.empty() || b.empty()) return {};
  if (b.points() < a.points()) {
    AlignmentResult flipped = align_ordered(b, a, r, max_shift);
    AlignmentResult out;
    out.translation = {positive_zero(-flipped.translation.dx), positive_zero(-flipped.translation.dy)};
    for (auto [i, j] : flipped.matched_pairs) out.matched_pairs.emplace_back(j, i);
    std::sort(out.matched_pairs.begin(), out.matched_pairs.end());
    out.match_count = flipped.match_count;
    return out;
  }
  AlignmentResult out = align_ordered(a, b, r, max_shift);
  out.translation = {positive_zero(out.translation.dx), positive_zero(out.translation.dy)};
  return out;
}

double similarity_score(std::size_t match_count, std::size_t size_a, std::size_t size_b) noexcept {
  const std::size_t total = size_a + size_b;
  if (total == 0) return 0.0;
  if (size_a == 0 || size_b == 0) return 1.0;
  return 1.0 - 2.0 * static_cast<double>(match_count) / static_cast<double>(total);
}

double similarity_score(const ViaSet& a, const ViaSet& b, double r) {
  if (!(r > 0.0)) throw InputError("similarity_score: radius must be positive");
  return similarity_score(align(a, b, r).match_count, a.size(), b.size());
}

void NodeConfig::validate() const {
  if (!(unit_length_nm > 0.0)) throw InputError("node.unit_length_nm must be positive");
  if (!(pixels_per_unit > 0.0)) throw InputError("node.pixels_per_unit must be positive");
  if (matching_radius != kMatchingRadius) throw InputError("node.matching_radius must be exactly 0.5 units");
}

}  // namespace cellscope
