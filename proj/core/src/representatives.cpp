#include "cellscope/representatives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cellscope/error.hpp"
#include "cellscope/random.hpp"
#include "point_grid.hpp"

namespace cellscope {

using Json = nlohmann::ordered_json;

bool ViaBox::contains(const ViaPoint& p) const noexcept {
  return std::abs(p.x - center_x) <= width / 2.0 && std::abs(p.y - center_y) <= height / 2.0;
}

std::vector<CellInstance> sample_instances(std::span<const CellInstance> instances, std::size_t n,
                                           std::uint64_t seed) {
  if (instances.empty()) throw InputError("sample_instances: no instances");
  if (n == 0) throw InputError("sample_instances: n must be >= 1");
  std::vector<CellInstance> pool(instances.begin(), instances.end());
  std::sort(pool.begin(), pool.end(),
            [](const CellInstance& a, const CellInstance& b) { return a.instance_id < b.instance_id; });
  const std::size_t k = std::min(n, pool.size());
  // Partial Fisher-Yates over the id-sorted pool.
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end(),
            [](const CellInstance& a, const CellInstance& b) { return a.instance_id < b.instance_id; });
  return pool;
}

AlignedCohort align_cohort(std::span<const CellInstance> subset, double r) {
  const std::size_t n = subset.size();
  if (n < 2) throw InputError("align_cohort: need at least two instances");

  // results[i][j] for i < j holds align(subset[i], subset[j]).
  std::vector<std::vector<Translation>> upper(n, std::vector<Translation>(n));
  std::vector<std::size_t> sums(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const AlignmentResult res = align(subset[i].vias, subset[j].vias, r);
      upper[i][j] = res.translation;
      sums[i] += res.match_count;
      sums[j] += res.match_count;
    }
  }
  std::size_t anchor = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (sums[i] > sums[anchor] ||
        (sums[i] == sums[anchor] && subset[i].instance_id < subset[anchor].instance_id)) {
      anchor = i;
    }
  }

  AlignedCohort out;
  out.anchor_index = anchor;
  for (std::size_t i = 0; i < n; ++i) {
    Translation t;
    if (i < anchor) {
      t = upper[i][anchor];
    } else if (i > anchor) {
      // align is mirror-exact, so the reverse translation is the negation.
      t = {-upper[anchor][i].dx, -upper[anchor][i].dy};
      if (t.dx == 0.0) t.dx = 0.0;
      if (t.dy == 0.0) t.dy = 0.0;
    }
    out.instance_ids.push_back(subset[i].instance_id);
    out.translations.push_back(t);
    out.aligned.push_back(subset[i].vias.translated(t));
  }
  return out;
}

std::vector<VoteCluster> cluster_votes(std::span<const ViaSet> aligned, double r) {
  struct Pooled {
    ViaPoint p;
    std::size_t instance;
  };
  std::vector<Pooled> pool;
  std::vector<ViaPoint> coords;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    for (const auto& p : aligned[i]) {
      pool.push_back({p, i});
      coords.push_back(p);
    }
  }
  if (pool.empty()) return {};
  const detail::PointGrid grid(coords, r);

  // Seed order: number of distinct instances with a point within r.
  std::vector<std::size_t> support(pool.size(), 0);
  std::vector<std::size_t> seen(aligned.size(), SIZE_MAX);
  for (std::size_t k = 0; k < pool.size(); ++k) {
    std::size_t count = 0;
    grid.for_each_within(pool[k].p, r, [&](std::size_t idx) {
      if (seen[pool[idx].instance] != k) {
        seen[pool[idx].instance] = k;
        ++count;
      }
    });
    support[k] = count;
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (support[a] != support[b]) return support[a] > support[b];
    if (pool[a].p != pool[b].p) return pool[a].p < pool[b].p;
    return pool[a].instance < pool[b].instance;
  });

  std::vector<std::uint8_t> claimed(pool.size(), 0);
  std::vector<std::size_t> best(aligned.size());
  std::vector<double> best_d2(aligned.size());

  // One point per instance: the unclaimed one nearest to c, strictly within r.
  auto gather = [&](ViaPoint c) {
    std::fill(best.begin(), best.end(), SIZE_MAX);
    grid.for_each_within(c, r, [&](std::size_t idx) {
      if (claimed[idx]) return;
      const std::size_t inst = pool[idx].instance;
      const double d2 = distance2(pool[idx].p, c);
      if (best[inst] == SIZE_MAX || d2 < best_d2[inst] || (d2 == best_d2[inst] && idx < best[inst])) {
        best[inst] = idx;
        best_d2[inst] = d2;
      }
    });
    std::vector<std::size_t> members;
    for (std::size_t inst = 0; inst < aligned.size(); ++inst) {
      if (best[inst] != SIZE_MAX) members.push_back(best[inst]);
    }
    return members;
  };
  auto centroid = [&](const std::vector<std::size_t>& members) {
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t idx : members) {
      sx += pool[idx].p.x;
      sy += pool[idx].p.y;
    }
    return ViaPoint{sx / static_cast<double>(members.size()), sy / static_cast<double>(members.size())};
  };

  std::vector<VoteCluster> clusters;
  for (std::size_t seed : order) {
    if (claimed[seed]) continue;
    ViaPoint c = pool[seed].p;
    std::vector<std::size_t> members = gather(c);
    for (int round = 0; round < 3; ++round) {
      const ViaPoint next = centroid(members);
      std::vector<std::size_t> moved = gather(next);
      if (moved.empty()) break;
      c = next;
      if (moved == members) break;
      members = std::move(moved);
    }
    if (std::find(members.begin(), members.end(), seed) == members.end()) {
      // The seed must leave the pool; keep it as its own instance's member.
      std::erase_if(members, [&](std::size_t idx) { return pool[idx].instance == pool[seed].instance; });
      members.push_back(seed);
    }
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return pool[a].instance < pool[b].instance; });
    VoteCluster cl;
    for (std::size_t idx : members) {
      claimed[idx] = 1;
      cl.members.push_back(pool[idx].p);
      cl.member_instances.push_back(pool[idx].instance);
    }
    cl.center = centroid(members);
    cl.support = static_cast<double>(members.size()) / static_cast<double>(aligned.size());
    clusters.push_back(std::move(cl));
  }
  return clusters;
}

std::vector<VoteCluster> vote_vias(std::span<const ViaSet> aligned, double r, double majority_threshold) {
  if (!(majority_threshold >= 0.5 && majority_threshold < 1.0)) {
    throw InputError("vote_vias: majority_threshold must lie in [0.5, 1)");
  }
  std::vector<VoteCluster> all = cluster_votes(aligned, r);
  std::vector<VoteCluster> kept;
  for (auto& cl : all) {
    if (cl.support > majority_threshold) kept.push_back(std::move(cl));
  }
  std::sort(kept.begin(), kept.end(), [](const VoteCluster& a, const VoteCluster& b) { return a.center < b.center; });
  return kept;
}

KMeansResult refine_kmeans(std::span<const VoteCluster> clusters, double tolerance, int max_iter) {
  if (clusters.empty()) throw InputError("refine_kmeans: no clusters");
  KMeansResult out;
  std::vector<ViaPoint> points;
  for (const auto& cl : clusters) {
    out.centers.push_back(cl.center);
    points.insert(points.end(), cl.members.begin(), cl.members.end());
  }
  const std::size_t k = out.centers.size();
  std::vector<double> sx(k);
  std::vector<double> sy(k);
  std::vector<std::size_t> cnt(k);
  while (out.iterations < max_iter) {
    std::fill(sx.begin(), sx.end(), 0.0);
    std::fill(sy.begin(), sy.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0);
    for (const auto& p : points) {
      std::size_t best = 0;
      double best_d2 = distance2(p, out.centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d2 = distance2(p, out.centers[c]);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      sx[best] += p.x;
      sy[best] += p.y;
      ++cnt[best];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (cnt[c] == 0) continue;
      const ViaPoint next{sx[c] / static_cast<double>(cnt[c]), sy[c] / static_cast<double>(cnt[c])};
      moved = std::max(moved, distance(next, out.centers[c]));
      out.centers[c] = next;
    }
    ++out.iterations;
    if (moved < tolerance) break;
  }
  return out;
}

namespace {

Representative build_with(const CellTypeInfo& type, std::span<const CellInstance> instances,
                          const RepresentativeConfig& cfg, std::uint64_t seed, double threshold, int attempt) {
  if (instances.size() < 2) {
    throw InputError("build_representative: type '" + type.type_id + "' has fewer than two instances");
  }
  const std::vector<CellInstance> sample = sample_instances(instances, cfg.sample_size, seed);
  const AlignedCohort cohort = align_cohort(sample, cfg.radius);
  const std::vector<VoteCluster> survivors = vote_vias(cohort.aligned, cfg.radius, threshold);

  Representative rep;
  rep.type_id = type.type_id;
  const auto w = static_cast<double>(type.width);
  const auto h = static_cast<double>(type.height);
  rep.box = {w / 2.0, h / 2.0, w, h};
  rep.build_meta = {seed, sample.size(), threshold, cohort.anchor_instance_id(), attempt, instances.size(), w, h};
  if (survivors.empty()) return rep;

  const KMeansResult km = refine_kmeans(survivors, cfg.kmeans_tolerance, cfg.kmeans_max_iter);

  // Move from the anchor's frame to the cohort's mean frame.
  double mx = 0.0;
  double my = 0.0;
  for (const auto& t : cohort.translations) {
    mx += t.dx;
    my += t.dy;
  }
  mx /= static_cast<double>(cohort.translations.size());
  my /= static_cast<double>(cohort.translations.size());

  std::vector<std::pair<ViaPoint, double>> vias;
  for (std::size_t c = 0; c < survivors.size(); ++c) {
    vias.push_back({{km.centers[c].x - mx, km.centers[c].y - my}, survivors[c].support});
  }
  std::sort(vias.begin(), vias.end());
  std::vector<ViaPoint> pts;
  for (const auto& [p, s] : vias) {
    pts.push_back(p);
    rep.support.push_back(s);
  }
  rep.vias = ViaSet(std::move(pts), type.type_id);
  if (rep.vias.min_separation() < 2.0 * cfg.radius) {
    throw DegenerateLibraryError(type.type_id, "representative of '" + type.type_id +
                                                   "' has vias closer than 2r");
  }
  return rep;
}

}  // namespace

Representative build_representative(const CellTypeInfo& type, std::span<const CellInstance> instances,
                                     const RepresentativeConfig& cfg) {
  return build_with(type, instances, cfg, cfg.seed, cfg.majority_threshold, 0);
}

double stricter_threshold(int attempt) noexcept { return std::min(0.5 + 0.1 * attempt, 0.9); }

Representative rebuild_stricter(const CellTypeInfo& type, std::span<const CellInstance> instances,
                                const RepresentativeConfig& cfg, int attempt) {
  if (attempt < 1) throw InputError("rebuild_stricter: attempt must be >= 1");
  return build_with(type, instances, cfg, cfg.seed + static_cast<std::uint64_t>(attempt), stricter_threshold(attempt),
                    attempt);
}

void fit_boxes(std::map<std::string, Representative>& reps, std::span<const CellTypeInfo> types, double r) {
  std::map<std::string, double> width_of;
  for (const auto& t : types) width_of[t.type_id] = t.width;
  for (auto& [id, rep] : reps) {
    double half_w = rep.build_meta.cell_width / 2.0;
    double half_h = rep.build_meta.cell_height / 2.0;
    const auto own = width_of.find(id);
    for (const auto& [other_id, other] : reps) {
      const auto ow = width_of.find(other_id);
      if (own == width_of.end() || ow == width_of.end() || ow->second != own->second) continue;
      // The other type's vias, centered on this cell.
      const double ox = other.build_meta.cell_width / 2.0;
      const double oy = other.build_meta.cell_height / 2.0;
      for (const auto& p : other.vias) {
        half_w = std::max(half_w, std::abs(p.x - ox) + r);
        half_h = std::max(half_h, std::abs(p.y - oy) + r);
      }
    }
    rep.box = {rep.build_meta.cell_width / 2.0, rep.build_meta.cell_height / 2.0, 2.0 * half_w, 2.0 * half_h};
  }
}

VerificationReport verify_representative(const Representative& rep, std::span<const CellInstance> holdout,
                                         const RepresentativeConfig& cfg) {
  VerificationReport report;
  report.type_id = rep.type_id;
  double sum_fraction = 0.0;
  double sum_residual = 0.0;
  std::size_t with_matches = 0;
  for (const auto& inst : holdout) {
    InstanceCheck check;
    check.instance_id = inst.instance_id;
    if (rep.vias.empty()) {
      check.match_fraction = 1.0;
    } else {
      const AlignmentResult coarse = align(inst.vias, rep.vias, cfg.radius, cfg.verify_max_shift);
      std::vector<ViaPoint> inside;
      for (const auto& p : inst.vias) {
        const ViaPoint q{p.x + coarse.translation.dx, p.y + coarse.translation.dy};
        if (rep.box.contains(q)) inside.push_back(q);
      }
      const ViaSet clipped(std::move(inside));
      const AlignmentResult fine = match_vias(clipped, rep.vias, {}, cfg.radius);
      check.match_fraction = static_cast<double>(fine.match_count) / static_cast<double>(rep.vias.size());
      check.mean_residual = fine.mean_residual(clipped, rep.vias);
      if (fine.match_count > 0) {
        sum_residual += check.mean_residual;
        ++with_matches;
      }
    }
    sum_fraction += check.match_fraction;
    report.instances.push_back(std::move(check));
  }
  if (!holdout.empty()) report.mean_match_fraction = sum_fraction / static_cast<double>(holdout.size());
  if (with_matches > 0) report.mean_residual = sum_residual / static_cast<double>(with_matches);
  report.required_match_fraction = cfg.verify_min_match_fraction;
  if (cfg.verify_calibrate_support && !rep.support.empty()) {
    const double mean_support =
        std::accumulate(rep.support.begin(), rep.support.end(), 0.0) / static_cast<double>(rep.support.size());
    report.required_match_fraction *= mean_support;
  }
  report.pass = !holdout.empty() && report.mean_match_fraction >= report.required_match_fraction &&
                report.mean_residual <= cfg.verify_max_residual;
  return report;
}

RgbImage render_overlay(const Representative& rep, const OverlayInput& input, double r) {
  RgbImage out(input.image);
  if (rep.vias.empty()) return out;
  const double w = rep.build_meta.cell_width;
  const double h = rep.build_meta.cell_height;
  const AlignmentResult res = align(input.instance_vias, rep.vias, r);
  const double radius_px = r * input.pixels_per_unit;
  const auto iw = static_cast<long>(out.width());
  const auto ih = static_cast<long>(out.height());
  for (const auto& v : rep.vias) {
    const ViaPoint canonical{v.x - res.translation.dx, v.y - res.translation.dy};
    const ViaPoint placed = apply_orientation(canonical, input.orientation, w, h);
    const double cx = placed.x * input.pixels_per_unit + input.origin_offset.x;
    const double cy = placed.y * input.pixels_per_unit + input.origin_offset.y;
    const long x0 = std::max(0L, static_cast<long>(std::floor(cx - radius_px - 1.0)));
    const long x1 = std::min(iw - 1, static_cast<long>(std::ceil(cx + radius_px + 1.0)));
    const long y0 = std::max(0L, static_cast<long>(std::floor(cy - radius_px - 1.0)));
    const long y1 = std::min(ih - 1, static_cast<long>(std::ceil(cy + radius_px + 1.0)));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double d = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
        if (std::abs(d - radius_px) <= 0.5) {
          out.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), {255, 0, 0});
        }
      }
    }
  }
  return out;
}

std::string serialize_representatives(const std::map<std::string, Representative>& reps) {
  Json doc = Json::object();
  for (const auto& [id, rep] : reps) {
    Json vias = Json::array();
    for (const auto& p : rep.vias) vias.push_back({p.x, p.y});
    const BuildMeta& m = rep.build_meta;
    doc[id] = {
        {"vias", vias},
        {"support", rep.support},
        {"box", {rep.box.width, rep.box.height}},
        {"build_meta",
         {{"seed", m.seed},
          {"sample_size", m.sample_size},
          {"majority_threshold", m.majority_threshold},
          {"anchor_instance_id", m.anchor_instance_id},
          {"attempt", m.attempt},
          {"instance_count", m.instance_count},
          {"cell", {m.cell_width, m.cell_height}}}},
    };
  }
  return doc.dump(2) + "\n";
}

std::map<std::string, Representative> parse_representatives(const std::string& json_text) {
  std::map<std::string, Representative> out;
  try {
    const Json doc = Json::parse(json_text);
    if (!doc.is_object()) throw IoError("representatives: top level must be an object");
    for (const auto& [id, entry] : doc.items()) {
      Representative rep;
      rep.type_id = id;
      std::vector<ViaPoint> pts;
      for (const auto& v : entry.at("vias")) {
        if (!v.is_array() || v.size() != 2) throw IoError("representatives: via of '" + id + "' is not [x, y]");
        pts.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      rep.vias = ViaSet(std::move(pts), id);
      rep.support = entry.at("support").get<std::vector<double>>();
      if (rep.support.size() != rep.vias.size()) {
        throw IoError("representatives: support of '" + id + "' does not match its vias");
      }
      const Json& meta = entry.at("build_meta");
      BuildMeta& m = rep.build_meta;
      m.seed = meta.at("seed").get<std::uint64_t>();
      m.sample_size = meta.at("sample_size").get<std::size_t>();
      m.majority_threshold = meta.at("majority_threshold").get<double>();
      m.anchor_instance_id = meta.at("anchor_instance_id").get<std::string>();
      m.attempt = meta.value("attempt", 0);
      m.instance_count = meta.value("instance_count", std::size_t{0});
      const Json& cell = meta.at("cell");
      m.cell_width = cell.at(0).get<double>();
      m.cell_height = cell.at(1).get<double>();
      const Json& box = entry.at("box");
      rep.box = {m.cell_width / 2.0, m.cell_height / 2.0, box.at(0).get<double>(), box.at(1).get<double>()};
      out.emplace(id, std::move(rep));
    }
  } catch (const Json::exception& e) {
    throw IoError(std::string("representatives: ") + e.what());
  }
  return out;
}

void save_representatives(const std::filesystem::path& path, const std::map<std::string, Representative>& reps) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << serialize_representatives(reps);
  if (!f) throw IoError("cannot write " + path.string());
}

std::map<std::string, Representative> load_representatives(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_representatives(ss.str());
}

}  // namespace cellscope
