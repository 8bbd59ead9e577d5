#include "cellscope/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>

#include "cellscope/error.hpp"

namespace cellscope {
namespace {

constexpr int kNeighbours8[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};

struct Field {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> values;
};

Field make_field(const GrayImage& image, double sigma) {
  if (image.empty()) throw InputError("via detection: zero-sized image");
  Field f;
  f.width = image.width();
  f.height = image.height();
  if (sigma > 0.0) {
    f.values = gaussian_smooth(image, sigma);
  } else {
    f.values.assign(image.pixels().begin(), image.pixels().end());
  }
  return f;
}

template <typename Fn>
void for_each_neighbour(const Field& f, std::size_t idx, Fn&& fn) {
  const auto x = static_cast<long>(idx % f.width);
  const auto y = static_cast<long>(idx / f.width);
  for (const auto& d : kNeighbours8) {
    const long nx = x + d[0];
    const long ny = y + d[1];
    if (nx < 0 || ny < 0 || nx >= static_cast<long>(f.width) || ny >= static_cast<long>(f.height)) continue;
    fn(static_cast<std::size_t>(ny) * f.width + static_cast<std::size_t>(nx));
  }
}

// 8-connected labelling of a mask. Labels start at 1 and follow row-major
// order of each component's first pixel; 0 is background.
std::vector<int> label_components(const Field& f, const std::vector<std::uint8_t>& mask, int& count) {
  std::vector<int> labels(mask.size(), 0);
  count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || labels[i] != 0) continue;
    ++count;
    labels[i] = count;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      for_each_neighbour(f, cur, [&](std::size_t n) {
        if (mask[n] && labels[n] == 0) {
          labels[n] = count;
          stack.push_back(n);
        }
      });
    }
  }
  return labels;
}

struct Accumulator {
  double sw = 0.0;
  double sx = 0.0;
  double sy = 0.0;

  void add(const Field& f, std::size_t idx) {
    const double w = f.values[idx];
    sw += w;
    sx += w * static_cast<double>(idx % f.width);
    sy += w * static_cast<double>(idx / f.width);
  }
  ViaPoint centroid() const { return {sx / sw, sy / sw}; }
};

ViaSet to_units(const std::vector<ViaPoint>& pixels, const ExtractionConfig& cfg) {
  return ViaSet(pixels_to_units(pixels, cfg));
}

}  // namespace

void ExtractionConfig::validate() const {
  if (erosion_radius < 0) throw InputError("extraction: erosion_radius must be >= 0");
  if (min_blob_area < 1) throw InputError("extraction: min_blob_area must be >= 1");
  if (!(persistence_threshold > 0.0)) throw InputError("extraction: persistence_threshold must be > 0");
  if (!(pixels_per_unit > 0.0)) throw InputError("extraction: pixels_per_unit must be > 0");
  if (smoothing_sigma < 0.0) throw InputError("extraction: smoothing_sigma must be >= 0");
}

ViaSet detect_vias(const GrayImage& image, const ExtractionConfig& cfg) {
  return cfg.method == DetectionMethod::Threshold ? detect_vias_threshold(image, cfg)
                                                  : detect_vias_persistence(image, cfg);
}

ViaSet detect_vias_threshold(const GrayImage& image, const ExtractionConfig& cfg) {
  cfg.validate();
  const Field f = make_field(image, cfg.smoothing_sigma);
  const std::size_t n = f.values.size();

  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < n; ++i) mask[i] = f.values[i] >= cfg.binarize_threshold ? 1 : 0;

  std::vector<std::pair<int, int>> disk;
  const int er = cfg.erosion_radius;
  for (int dy = -er; dy <= er; ++dy) {
    for (int dx = -er; dx <= er; ++dx) {
      if (dx * dx + dy * dy <= er * er) disk.emplace_back(dx, dy);
    }
  }
  std::vector<std::uint8_t> eroded(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const auto x = static_cast<long>(i % f.width);
    const auto y = static_cast<long>(i / f.width);
    bool keep = true;
    for (auto [dx, dy] : disk) {
      const long nx = x + dx;
      const long ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= static_cast<long>(f.width) || ny >= static_cast<long>(f.height) ||
          !mask[static_cast<std::size_t>(ny) * f.width + static_cast<std::size_t>(nx)]) {
        keep = false;
        break;
      }
    }
    eroded[i] = keep ? 1 : 0;
  }

  int eroded_count = 0;
  const std::vector<int> eroded_labels = label_components(f, eroded, eroded_count);
  std::vector<int> area(static_cast<std::size_t>(eroded_count) + 1, 0);
  for (int l : eroded_labels) ++area[static_cast<std::size_t>(l)];

  // Grow each surviving eroded core back over its pre-erosion component;
  // breadth-first from all cores at once so a component split by erosion
  // is shared between its cores.
  std::vector<int> owner(n, 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    const int l = eroded_labels[i];
    if (l > 0 && area[static_cast<std::size_t>(l)] >= cfg.min_blob_area) {
      owner[i] = l;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    for_each_neighbour(f, cur, [&](std::size_t nb) {
      if (mask[nb] && owner[nb] == 0) {
        owner[nb] = owner[cur];
        queue.push_back(nb);
      }
    });
  }

  std::vector<Accumulator> acc(static_cast<std::size_t>(eroded_count) + 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] > 0) acc[static_cast<std::size_t>(owner[i])].add(f, i);
  }
  std::vector<ViaPoint> centers;
  for (std::size_t l = 1; l < acc.size(); ++l) {
    if (acc[l].sw > 0.0) centers.push_back(acc[l].centroid());
  }
  return to_units(centers, cfg);
}

std::vector<PersistencePair> superlevel_persistence(std::span<const float> values, std::size_t width,
                                                    std::size_t height) {
  if (width == 0 || height == 0 || values.size() != width * height) {
    throw InputError("superlevel_persistence: zero-sized or inconsistent field");
  }
  Field f;
  f.width = width;
  f.height = height;
  f.values.assign(values.begin(), values.end());
  const std::size_t n = f.values.size();

  // Descending intensity; equal intensities in row-major order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return f.values[a] > f.values[b]; });
  std::vector<std::size_t> rank(n);
  for (std::size_t k = 0; k < n; ++k) rank[order[k]] = k;

  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(n, kUnset);
  std::vector<std::size_t> birth_pixel(n, kUnset);
  auto find = [&](std::size_t x) {
    std::size_t root = x;
    while (parent[root] != root) root = parent[root];
    while (parent[x] != root) {
      const std::size_t next = parent[x];
      parent[x] = root;
      x = next;
    }
    return root;
  };
  // Elder: brighter birth, or the earlier-processed birth pixel on a tie.
  auto elder_first = [&](std::size_t ra, std::size_t rb) { return rank[birth_pixel[ra]] < rank[birth_pixel[rb]]; };

  std::vector<PersistencePair> pairs;
  for (std::size_t p : order) {
    parent[p] = p;
    birth_pixel[p] = p;
    const double level = f.values[p];
    for_each_neighbour(f, p, [&](std::size_t q) {
      if (parent[q] == kUnset) return;
      std::size_t rp = find(p);
      std::size_t rq = find(q);
      if (rp == rq) return;
      if (!elder_first(rp, rq)) std::swap(rp, rq);
      const std::size_t dying_birth = birth_pixel[rq];
      const double birth = f.values[dying_birth];
      if (birth > level) pairs.push_back({dying_birth, birth, level, false});
      parent[rq] = rp;
    });
  }

  const double minimum = *std::min_element(f.values.begin(), f.values.end());
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i) {
    if (find(i) == i) roots.push_back(i);
  }
  std::sort(roots.begin(), roots.end(), [&](std::size_t a, std::size_t b) { return elder_first(a, b); });
  for (std::size_t root : roots) {
    pairs.push_back({birth_pixel[root], static_cast<double>(f.values[birth_pixel[root]]), minimum, true});
  }
  return pairs;
}

ViaSet detect_vias_persistence(const GrayImage& image, const ExtractionConfig& cfg) {
  cfg.validate();
  const Field f = make_field(image, cfg.smoothing_sigma);
  const std::vector<PersistencePair> pairs = superlevel_persistence(f.values, f.width, f.height);

  std::vector<ViaPoint> centers;
  std::vector<std::uint8_t> visited(f.values.size(), 0);
  std::vector<std::size_t> touched;
  std::vector<std::size_t> stack;
  for (const auto& pair : pairs) {
    if (pair.persistence() < cfg.persistence_threshold) continue;
    const double level = pair.death + pair.persistence() / 2.0;
    Accumulator acc;
    stack.push_back(pair.birth_pixel);
    visited[pair.birth_pixel] = 1;
    touched.push_back(pair.birth_pixel);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      acc.add(f, cur);
      for_each_neighbour(f, cur, [&](std::size_t nb) {
        if (!visited[nb] && f.values[nb] >= level) {
          visited[nb] = 1;
          touched.push_back(nb);
          stack.push_back(nb);
        }
      });
    }
    for (std::size_t t : touched) visited[t] = 0;
    touched.clear();
    if (acc.sw > 0.0) centers.push_back(acc.centroid());
  }
  return to_units(centers, cfg);
}

std::vector<ViaPoint> pixels_to_units(std::span<const ViaPoint> pixels, const ExtractionConfig& cfg) {
  if (!(cfg.pixels_per_unit > 0.0)) throw InputError("pixels_to_units: pixels_per_unit must be > 0");
  std::vector<ViaPoint> out;
  out.reserve(pixels.size());
  for (const auto& p : pixels) {
    out.push_back({(p.x - cfg.origin_offset.x) / cfg.pixels_per_unit,
                   (p.y - cfg.origin_offset.y) / cfg.pixels_per_unit});
  }
  return out;
}

std::vector<ViaPoint> units_to_pixels(std::span<const ViaPoint> units, const ExtractionConfig& cfg) {
  if (!(cfg.pixels_per_unit > 0.0)) throw InputError("units_to_pixels: pixels_per_unit must be > 0");
  std::vector<ViaPoint> out;
  out.reserve(units.size());
  for (const auto& p : units) {
    out.push_back({p.x * cfg.pixels_per_unit + cfg.origin_offset.x, p.y * cfg.pixels_per_unit + cfg.origin_offset.y});
  }
  return out;
}

std::vector<float> gaussian_smooth(const GrayImage& image, double sigma) {
  const std::size_t w = image.width();
  const std::size_t h = image.height();
  std::vector<float> src(image.pixels().begin(), image.pixels().end());
  if (!(sigma > 0.0)) return src;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * (k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    sum += v;
  }
  for (auto& v : kernel) v /= sum;

  auto clamp_index = [](long v, std::size_t size) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(size) - 1));
  };
  std::vector<float> tmp(src.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * src[y * w + clamp_index(static_cast<long>(x) + k, w)];
      }
      tmp[y * w + x] = static_cast<float>(acc);
    }
  }
  std::vector<float> out(src.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[clamp_index(static_cast<long>(y) + k, h) * w + x];
      }
      out[y * w + x] = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace cellscope
