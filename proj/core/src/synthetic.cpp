#include "cellscope/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cellscope/error.hpp"
#include "cellscope/parallel.hpp"

namespace cellscope {

using Json = nlohmann::ordered_json;

namespace {

std::string indexed(const char* prefix, std::size_t i, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, digits, i);
  return buf;
}

bool far_enough(const ViaPoint& p, const std::vector<ViaPoint>& others, double sep) {
  return std::all_of(others.begin(), others.end(), [&](const ViaPoint& q) { return distance(p, q) >= sep; });
}

// Adds `count` uniform points to `pts`, each at least sep from everything in
// pts and in `avoid`. Returns false when the area is too crowded.
bool place_points(std::vector<ViaPoint>& pts, std::size_t count, const std::vector<ViaPoint>& avoid, double w,
                  double h, const SynthLibrarySpec& spec, Rng& rng) {
  for (std::size_t k = 0; k < count; ++k) {
    bool placed = false;
    for (int tries = 0; tries < 2000 && !placed; ++tries) {
      const ViaPoint p{rng.uniform(spec.border, w - spec.border), rng.uniform(spec.border, h - spec.border)};
      if (far_enough(p, pts, spec.min_separation) && far_enough(p, avoid, spec.min_separation)) {
        pts.push_back(p);
        placed = true;
      }
    }
    if (!placed) return false;
  }
  return true;
}

ViaSet random_pattern(std::size_t n, double w, double h, const SynthLibrarySpec& spec, Rng& rng,
                      const std::string& type_id) {
  for (int restart = 0; restart < 100; ++restart) {
    std::vector<ViaPoint> pts;
    if (place_points(pts, n, {}, w, h, spec, rng)) return ViaSet(std::move(pts), type_id);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "gen_library: cannot place %zu vias in a %gx%g cell at separation %g (type %s)", n,
                w, h, spec.min_separation, type_id.c_str());
  throw InputError(buf);
}

// Keeps round((1 - s) n) vias of `base` and re-places the rest away from
// every base via, so the intended alignment scores s.
std::optional<ViaSet> derived_pattern(const ViaSet& base, double target, double w, double h,
                                      const SynthLibrarySpec& spec, Rng& rng, const std::string& type_id) {
  const std::size_t n = base.size();
  const auto shared = static_cast<std::size_t>(std::llround((1.0 - target) * static_cast<double>(n)));
  std::vector<ViaPoint> all = base.points();
  for (std::size_t i = 0; i < n; ++i) std::swap(all[i], all[i + static_cast<std::size_t>(rng.below(n - i))]);
  std::vector<ViaPoint> pts(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(shared));
  if (!place_points(pts, n - shared, base.points(), w, h, spec, rng)) return std::nullopt;
  ViaSet out(std::move(pts), type_id);
  if (align(base, out, kMatchingRadius).match_count != shared) return std::nullopt;
  return out;
}

}  // namespace

std::vector<CellTypeInfo> SynthLibrary::infos() const {
  std::vector<CellTypeInfo> out;
  for (const auto& t : types) out.push_back(t.info);
  return out;
}

const SynthType& SynthLibrary::type(const std::string& type_id) const {
  for (const auto& t : types) {
    if (t.info.type_id == type_id) return t;
  }
  throw InputError("synthetic library has no type '" + type_id + "'");
}

SynthLibrary gen_library(const SynthLibrarySpec& spec) {
  if (spec.type_count == 0) throw InputError("gen_library: type_count must be >= 1");
  if (spec.min_vias > spec.max_vias) throw InputError("gen_library: min_vias > max_vias");
  if (spec.width_classes.empty()) throw InputError("gen_library: no width classes");
  if (spec.min_separation < 2.0 * kMatchingRadius) throw InputError("gen_library: min_separation below 2r");
  if (spec.cell_height < 1) throw InputError("gen_library: cell_height must be >= 1");

  const std::size_t n = spec.type_count;
  // partner[b] = (a, target) for the derived member of each planted pair.
  std::map<std::size_t, std::pair<std::size_t, double>> derived;
  std::set<std::size_t> used;
  for (const auto& p : spec.planted) {
    if (p.a >= n || p.b >= n || p.a == p.b) throw InputError("gen_library: planted pair index out of range");
    if (!used.insert(p.a).second || !used.insert(p.b).second) {
      throw InputError("gen_library: a type may belong to at most one planted pair");
    }
    if (!(p.target_score >= 0.0 && p.target_score <= 1.0)) throw InputError("gen_library: target score outside [0, 1]");
    derived[p.b] = {p.a, p.target_score};
  }

  Rng rng(spec.seed);
  SynthLibrary lib;
  lib.types.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    CellTypeInfo& info = lib.types[i].info;
    info.type_id = indexed("T", i, 2);
    info.function_class = indexed("F", i, 2);
    info.width = spec.width_classes[i % spec.width_classes.size()];
    info.height = spec.cell_height;
  }
  for (const auto& [b, src] : derived) lib.types[b].info.width = lib.types[src.first].info.width;

  auto make = [&](std::size_t i) {
    SynthType& t = lib.types[i];
    const auto count =
        spec.min_vias + static_cast<std::size_t>(rng.below(spec.max_vias - spec.min_vias + 1));
    t.pattern = random_pattern(count, t.info.width, t.info.height, spec, rng, t.info.type_id);
  };
  auto derive = [&](std::size_t b) {
    const auto [a, target] = derived.at(b);
    SynthType& t = lib.types[b];
    if (target == 0.0) {
      t.pattern = lib.types[a].pattern.with_source(t.info.type_id);
      return;
    }
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
      if (auto p = derived_pattern(lib.types[a].pattern, target, t.info.width, t.info.height, spec, rng,
                                   t.info.type_id)) {
        t.pattern = std::move(*p);
        return;
      }
    }
    throw InputError("gen_library: cannot realize planted score for " + t.info.type_id);
  };
  // Regenerates i, together with its planted partner when it has one.
  auto regenerate = [&](std::size_t i) {
    for (const auto& [b, src] : derived) {
      if (src.first == i) {
        make(i);
        derive(b);
        return;
      }
    }
    if (derived.count(i) != 0) {
      make(derived.at(i).first);
      derive(i);
      return;
    }
    make(i);
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (derived.count(i) == 0) make(i);
  }
  for (const auto& [b, src] : derived) derive(b);

  auto planted_pair = [&](std::size_t i, std::size_t j) {
    auto it = derived.find(j);
    if (it != derived.end() && it->second.first == i) return true;
    it = derived.find(i);
    return it != derived.end() && it->second.first == j;
  };

  for (int round = 0;; ++round) {
    std::optional<std::size_t> offender;
    for (std::size_t i = 0; i < n && !offender; ++i) {
      for (std::size_t j = i + 1; j < n && !offender; ++j) {
        if (planted_pair(i, j)) continue;
        if (similarity_score(lib.types[i].pattern, lib.types[j].pattern, kMatchingRadius) <=
            spec.unrelated_min_score) {
          offender = j;
        }
      }
    }
    if (!offender) break;
    if (round >= spec.max_attempts * static_cast<int>(n)) {
      throw InputError("gen_library: could not keep unrelated pairs above score " +
                       std::to_string(spec.unrelated_min_score) + "; lower the via density or the bound");
    }
    regenerate(*offender);
  }
  return lib;
}

void NoiseSpec::validate() const {
  if (jitter_sigma < 0.0 || spurious_rate < 0.0 || intensity_noise_sigma < 0.0 || offset_range < 0.0) {
    throw InputError("noise: parameters must be non-negative");
  }
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw InputError("noise: dropout_prob must lie in [0, 1)");
  if (contrast_margin < 0.0) throw InputError("noise: contrast_margin must be non-negative");
}

namespace {

void draw_blob(std::vector<double>& canvas, long width, long height, double cx, double cy, double amplitude,
               double background, const RenderStyle& style) {
  const double core = style.core_radius * style.pixels_per_unit;
  const double edge = style.edge_radius * style.pixels_per_unit;
  const long x0 = std::max(0L, static_cast<long>(std::floor(cx - edge)));
  const long x1 = std::min(width - 1, static_cast<long>(std::ceil(cx + edge)));
  const long y0 = std::max(0L, static_cast<long>(std::floor(cy - edge)));
  const long y1 = std::min(height - 1, static_cast<long>(std::ceil(cy + edge)));
  for (long y = y0; y <= y1; ++y) {
    for (long x = x0; x <= x1; ++x) {
      const double d = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
      double f = 0.0;
      if (d <= core) {
        f = 1.0;
      } else if (d < edge) {
        f = (edge - d) / (edge - core);
      }
      double& px = canvas[static_cast<std::size_t>(y * width + x)];
      px = std::max(px, background + amplitude * f);
    }
  }
}

}  // namespace

RenderedInstance render_instance(const SynthType& type, const NoiseSpec& noise, Orientation orientation, Rng& rng,
                                 const RenderStyle& style, double pad_units) {
  noise.validate();
  const double ppu = style.pixels_per_unit;
  const double w = type.info.width;
  const double h = type.info.height;
  const long pad = std::lround(pad_units * ppu);
  const long cw = std::lround(w * ppu);
  const long ch = std::lround(h * ppu);
  const long width = cw + 2 * pad;
  const long height = ch + 2 * pad;

  const long off_x = std::lround(rng.uniform(-noise.offset_range, noise.offset_range) * ppu);
  const long off_y = std::lround(rng.uniform(-noise.offset_range, noise.offset_range) * ppu);
  const ViaPoint off{static_cast<double>(off_x) / ppu, static_cast<double>(off_y) / ppu};

  RenderedInstance out;
  out.orientation = orientation;
  out.bbox = {pad + off_x, pad + off_y, cw, ch};

  std::vector<ViaPoint> blobs;
  std::vector<ViaPoint> truth;
  for (const auto& p : type.pattern) {
    if (noise.dropout_prob > 0.0 && rng.bernoulli(noise.dropout_prob)) continue;
    ViaPoint q = p;
    if (noise.jitter_sigma > 0.0) {
      q.x = rng.normal(q.x, noise.jitter_sigma);
      q.y = rng.normal(q.y, noise.jitter_sigma);
    }
    const ViaPoint placed = apply_orientation(q, orientation, w, h);
    blobs.push_back(placed);
    truth.push_back(apply_orientation({placed.x - off.x, placed.y - off.y}, orientation, w, h));
  }
  const double expected = noise.spurious_rate * (noise.spurious_per_via ? static_cast<double>(type.pattern.size()) : 1.0);
  const std::uint64_t extra = expected > 0.0 ? rng.poisson(expected) : 0;
  std::vector<ViaPoint> spurious;
  for (std::uint64_t k = 0; k < extra; ++k) {
    const ViaPoint placed{rng.uniform(-style.spurious_margin, w + style.spurious_margin),
                          rng.uniform(-style.spurious_margin, h + style.spurious_margin)};
    blobs.push_back(placed);
    spurious.push_back(apply_orientation({placed.x - off.x, placed.y - off.y}, orientation, w, h));
  }

  const double background = style.background;
  const double amplitude = 128.0 + noise.contrast_margin - background;
  std::vector<double> canvas(static_cast<std::size_t>(width * height), background);
  for (const auto& b : blobs) {
    draw_blob(canvas, width, height, static_cast<double>(pad) + b.x * ppu, static_cast<double>(pad) + b.y * ppu,
              amplitude, background, style);
  }
  std::vector<std::uint8_t> pixels(canvas.size());
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    double v = canvas[i];
    if (noise.intensity_noise_sigma > 0.0) v = rng.normal(v, noise.intensity_noise_sigma);
    pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  out.image = GrayImage(static_cast<std::size_t>(width), static_cast<std::size_t>(height), std::move(pixels));
  out.truth = ViaSet(std::move(truth), type.info.type_id);
  out.spurious = ViaSet(std::move(spurious));
  return out;
}

std::vector<PlantedSwap> choose_swaps(const SynthLibrary& library, std::size_t count, double min_score) {
  std::vector<PlantedSwap> out;
  std::set<std::string> used;
  const auto& types = library.types;
  for (std::size_t i = 0; i < types.size() && out.size() < count; ++i) {
    if (used.count(types[i].info.type_id)) continue;
    for (std::size_t j = i + 1; j < types.size(); ++j) {
      const SynthType& a = types[i];
      const SynthType& b = types[j];
      if (used.count(b.info.type_id) || a.info.width != b.info.width || a.info.height != b.info.height) continue;
      if (similarity_score(a.pattern, b.pattern, kMatchingRadius) < min_score) continue;
      // Alternate the direction so both members of a width class get claimed.
      if (out.size() % 2 == 0) {
        out.push_back({a.info.type_id, b.info.type_id});
      } else {
        out.push_back({b.info.type_id, a.info.type_id});
      }
      used.insert(a.info.type_id);
      used.insert(b.info.type_id);
      break;
    }
  }
  if (out.size() < count) {
    throw InputError("choose_swaps: only " + std::to_string(out.size()) + " disjoint pairs score at least " +
                     std::to_string(min_score));
  }
  return out;
}

SynthDataset gen_dataset(const SynthLibrary& library, const NoiseSpec& noise, const DatasetSpec& spec, int workers) {
  noise.validate();
  if (spec.instances_per_tile == 0) throw InputError("gen_dataset: instances_per_tile must be >= 1");

  struct Slot {
    std::string instance_id;
    std::string claimed;
    const SynthType* rendered = nullptr;
  };
  std::vector<Slot> slots;
  std::map<std::string, std::vector<std::size_t>> by_type;
  for (const auto& t : library.types) {
    for (std::size_t k = 0; k < spec.instances_per_type; ++k) {
      by_type[t.info.type_id].push_back(slots.size());
      slots.push_back({t.info.type_id + "_" + indexed("", k, 4), t.info.type_id, &t});
    }
  }

  Rng swap_rng(mix_seed(spec.seed, hash_string("swaps")));
  std::set<std::size_t> taken;
  for (const auto& s : spec.swaps) {
    const SynthType& claimed = library.type(s.claimed_type);
    const SynthType& truth = library.type(s.true_type);
    if (claimed.info.width != truth.info.width || claimed.info.height != truth.info.height) {
      throw InputError("gen_dataset: swap " + s.claimed_type + " -> " + s.true_type + " changes the cell size");
    }
    std::vector<std::size_t> free;
    for (std::size_t idx : by_type[s.claimed_type]) {
      if (taken.count(idx) == 0) free.push_back(idx);
    }
    if (free.empty()) throw InputError("gen_dataset: not enough instances of " + s.claimed_type + " to swap");
    const std::size_t pick = free[static_cast<std::size_t>(swap_rng.below(free.size()))];
    taken.insert(pick);
    slots[pick].rendered = &truth;
  }

  const double pad_units = spec.gap_units / 2.0;
  std::vector<RenderedInstance> rendered(slots.size());
  parallel_for(slots.size(), workers, [&](std::size_t i) {
    Rng rng(mix_seed(spec.seed, i));
    const Orientation o = spec.random_orientation ? static_cast<Orientation>(rng.below(4)) : Orientation::R0;
    rendered[i] = render_instance(*slots[i].rendered, noise, o, rng, spec.style, pad_units);
  });

  SynthDataset ds;
  DatasetManifest& m = ds.manifest;
  m.node.name = spec.node_name;
  m.node.pixels_per_unit = spec.style.pixels_per_unit;
  m.cell_types = library.infos();
  for (std::size_t first = 0; first < slots.size(); first += spec.instances_per_tile) {
    const std::size_t last = std::min(slots.size(), first + spec.instances_per_tile);
    const std::string tile_id = indexed("tile_", first / spec.instances_per_tile, 4);
    std::size_t tw = 0;
    std::size_t th = 0;
    for (std::size_t i = first; i < last; ++i) {
      tw += rendered[i].image.width();
      th = std::max(th, rendered[i].image.height());
    }
    GrayImage tile(tw, th, spec.style.background);
    std::size_t x = 0;
    for (std::size_t i = first; i < last; ++i) {
      const RenderedInstance& r = rendered[i];
      for (std::size_t yy = 0; yy < r.image.height(); ++yy) {
        for (std::size_t xx = 0; xx < r.image.width(); ++xx) tile.at(x + xx, yy) = r.image.at(xx, yy);
      }
      InstanceRecord rec;
      rec.instance_id = slots[i].instance_id;
      rec.type_id = slots[i].claimed;
      rec.tile_id = tile_id;
      rec.bbox = r.bbox;
      rec.bbox.x += static_cast<long>(x);
      rec.orientation = r.orientation;
      m.instances.push_back(rec);
      ds.truth[rec.instance_id] = {slots[i].rendered->info.type_id, r.truth};
      x += r.image.width();
    }
    m.tiles.push_back({tile_id, "tiles/" + tile_id + ".png"});
    ds.tiles.emplace(tile_id, std::move(tile));
  }
  return ds;
}

void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "tiles");
  for (const auto& t : dataset.manifest.tiles) write_png(dir / t.image_path, dataset.tiles.at(t.tile_id));
  save_manifest(dir / "manifest.json", dataset.manifest);
  std::ofstream f(dir / "truth.json", std::ios::binary);
  if (!f) throw IoError("cannot write " + (dir / "truth.json").string());
  f << truth_to_json(dataset.truth);
}

std::string truth_to_json(const std::map<std::string, InstanceTruth>& truth) {
  Json doc = Json::object();
  for (const auto& [id, t] : truth) {
    Json vias = Json::array();
    for (const auto& p : t.vias) vias.push_back({p.x, p.y});
    doc[id] = {{"true_type", t.true_type}, {"vias", vias}};
  }
  return doc.dump(2) + "\n";
}

std::map<std::string, InstanceTruth> load_truth(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  std::map<std::string, InstanceTruth> out;
  try {
    const Json doc = Json::parse(ss.str());
    for (const auto& [id, entry] : doc.items()) {
      std::vector<ViaPoint> pts;
      for (const auto& v : entry.at("vias")) pts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      out[id] = {entry.at("true_type").get<std::string>(), ViaSet(std::move(pts))};
    }
  } catch (const Json::exception& e) {
    throw IoError("truth file " + path.string() + ": " + e.what());
  }
  return out;
}

namespace {

// Kuhn's augmenting paths; adj[i] lists the b indices a_i may take.
std::size_t max_bipartite(const std::vector<std::vector<std::size_t>>& adj, std::size_t nb) {
  std::vector<std::size_t> owner(nb, SIZE_MAX);
  std::vector<std::uint8_t> seen;
  auto augment = [&](auto&& self, std::size_t i) -> bool {
    for (std::size_t j : adj[i]) {
      if (seen[j]) continue;
      seen[j] = 1;
      if (owner[j] == SIZE_MAX || self(self, owner[j])) {
        owner[j] = i;
        return true;
      }
    }
    return false;
  };
  std::size_t total = 0;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    seen.assign(nb, 0);
    if (augment(augment, i)) ++total;
  }
  return total;
}

}  // namespace

std::size_t oracle_align(const ViaSet& a, const ViaSet& b, double r, double grid_step, bool refine) {
  if (a.size() > 20 || b.size() > 20) throw InputError("oracle_align: sets larger than 20 points are refused");
  if (!(grid_step > 0.0 && grid_step <= r / 8.0)) throw InputError("oracle_align: grid_step must lie in (0, r/8]");
  if (a.empty() || b.empty()) return 0;

  struct Diff {
    std::size_t i;
    std::size_t j;
    double dx;
    double dy;
  };
  std::vector<Diff> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) diffs.push_back({i, j, b[j].x - a[i].x, b[j].y - a[i].y});
  }
  const std::size_t cap = std::min(a.size(), b.size());
  std::vector<std::vector<std::size_t>> adj(a.size());
  auto matches_at = [&](double tx, double ty, std::span<const std::size_t> subset) {
    for (auto& row : adj) row.clear();
    for (std::size_t k : subset) {
      const Diff& d = diffs[k];
      if (distance({a[d.i].x + tx, a[d.i].y + ty}, b[d.j]) < r) adj[d.i].push_back(d.j);
    }
    return max_bipartite(adj, b.size());
  };
  std::vector<std::size_t> all(diffs.size());
  std::iota(all.begin(), all.end(), 0);

  // Pass 1: every multiple of grid_step within r of a difference. Depth (the
  // number of differences within r) bounds the matching size from above.
  std::map<std::pair<long long, long long>, std::size_t> depth;
  for (const Diff& d : diffs) {
    const auto gx0 = static_cast<long long>(std::ceil((d.dx - r) / grid_step));
    const auto gx1 = static_cast<long long>(std::floor((d.dx + r) / grid_step));
    const auto gy0 = static_cast<long long>(std::ceil((d.dy - r) / grid_step));
    const auto gy1 = static_cast<long long>(std::floor((d.dy + r) / grid_step));
    for (long long gx = gx0; gx <= gx1; ++gx) {
      for (long long gy = gy0; gy <= gy1; ++gy) {
        const double tx = static_cast<double>(gx) * grid_step;
        const double ty = static_cast<double>(gy) * grid_step;
        if (distance({a[d.i].x + tx, a[d.i].y + ty}, b[d.j]) < r) ++depth[{gx, gy}];
      }
    }
  }
  std::vector<std::pair<std::size_t, std::pair<long long, long long>>> order;
  order.reserve(depth.size());
  for (const auto& [g, n] : depth) order.push_back({n, g});
  std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  std::size_t best = 0;
  for (const auto& [n, g] : order) {
    if (n <= best || best == cap) break;
    best = std::max(best, matches_at(static_cast<double>(g.first) * grid_step,
                                     static_cast<double>(g.second) * grid_step, all));
  }
  if (!refine || best == cap) return best;

  // Pass 2: quadtree branch and bound over the translation plane. A square's
  // bound is the number of difference disks reaching into it; squares are
  // split until the bound cannot beat the best count or they shrink below
  // 1e-9. This catches arrangement cells thinner than the grid.
  double lo_x = diffs[0].dx;
  double hi_x = diffs[0].dx;
  double lo_y = diffs[0].dy;
  double hi_y = diffs[0].dy;
  for (const Diff& d : diffs) {
    lo_x = std::min(lo_x, d.dx);
    hi_x = std::max(hi_x, d.dx);
    lo_y = std::min(lo_y, d.dy);
    hi_y = std::max(hi_y, d.dy);
  }
  struct Square {
    double cx;
    double cy;
    double half;
    std::vector<std::size_t> reach;
  };
  auto reaching = [&](double cx, double cy, double half, const std::vector<std::size_t>& parent) {
    std::vector<std::size_t> out;
    for (std::size_t k : parent) {
      const double ex = std::max(0.0, std::abs(diffs[k].dx - cx) - half);
      const double ey = std::max(0.0, std::abs(diffs[k].dy - cy) - half);
      if (ex * ex + ey * ey < r * r) out.push_back(k);
    }
    return out;
  };
  const double root_half = std::max(hi_x - lo_x, hi_y - lo_y) / 2.0 + r;
  std::vector<Square> stack;
  stack.push_back({(lo_x + hi_x) / 2.0, (lo_y + hi_y) / 2.0, root_half, all});
  while (!stack.empty() && best < cap) {
    Square sq = std::move(stack.back());
    stack.pop_back();
    if (sq.reach.size() <= best) continue;
    best = std::max(best, matches_at(sq.cx, sq.cy, sq.reach));
    if (sq.half < 1e-9) continue;
    const double h = sq.half / 2.0;
    std::vector<Square> kids;
    for (int q = 0; q < 4; ++q) {
      const double cx = sq.cx + ((q & 1) ? h : -h);
      const double cy = sq.cy + ((q & 2) ? h : -h);
      auto reach = reaching(cx, cy, h, sq.reach);
      if (reach.size() > best) kids.push_back({cx, cy, h, std::move(reach)});
    }
    // Most promising child on top of the stack.
    std::sort(kids.begin(), kids.end(),
              [](const Square& x, const Square& y) { return x.reach.size() < y.reach.size(); });
    for (auto& k : kids) stack.push_back(std::move(k));
  }
  return best;
}

}  // namespace cellscope
