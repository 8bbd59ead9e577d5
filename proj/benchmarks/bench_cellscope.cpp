#include <map>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include <cellscope/extraction.hpp>
#include <cellscope/geometry.hpp>
#include <cellscope/random.hpp>
#include <cellscope/representatives.hpp>
#include <cellscope/similarity.hpp>
#include <cellscope/synthetic.hpp>

using namespace cellscope;

namespace {

ViaSet random_set(Rng& rng, std::size_t n, double w, double h) {
  std::vector<ViaPoint> pts;
  while (pts.size() < n) {
    const ViaPoint p{rng.uniform() * w, rng.uniform() * h};
    bool ok = true;
    for (const auto& q : pts) ok = ok && distance(p, q) >= 1.5;
    if (ok) pts.push_back(p);
  }
  return ViaSet(std::move(pts));
}

ViaSet jittered(const ViaSet& base, Rng& rng, double sigma) {
  std::vector<ViaPoint> pts;
  for (const auto& p : base) pts.push_back({p.x + rng.normal(0, sigma), p.y + rng.normal(0, sigma)});
  return ViaSet(std::move(pts));
}

SynthLibrary library(std::size_t types) {
  SynthLibrarySpec spec;
  spec.seed = 11;
  spec.type_count = types;
  return gen_library(spec);
}

}  // namespace

static void BM_Align(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const double side = 2.0 * std::sqrt(static_cast<double>(n)) + 2;
  const ViaSet a = random_set(rng, n, side, side);
  const ViaSet b = jittered(a, rng, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(align(a, b, kMatchingRadius));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Align)->RangeMultiplier(2)->Range(4, 32)->Complexity();

static void BM_AlignBounded(benchmark::State& state) {
  Rng rng(2);
  const ViaSet a = random_set(rng, 16, 10, 10);
  const ViaSet b = jittered(a, rng, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(align(a, b, kMatchingRadius, 1.0));
}
BENCHMARK(BM_AlignBounded);

static void detect(benchmark::State& state, DetectionMethod method) {
  const auto lib = library(4);
  NoiseSpec noise;
  noise.intensity_noise_sigma = 4;
  Rng rng(3);
  const auto inst = render_instance(lib.types.back(), noise, Orientation::R0, rng);
  ExtractionConfig cfg;
  cfg.method = method;
  cfg.pixels_per_unit = 8;
  for (auto _ : state) benchmark::DoNotOptimize(detect_vias(inst.image, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(inst.image.width() * inst.image.height()));
}

static void BM_DetectThreshold(benchmark::State& state) { detect(state, DetectionMethod::Threshold); }
static void BM_DetectPersistence(benchmark::State& state) { detect(state, DetectionMethod::Persistence); }
BENCHMARK(BM_DetectThreshold);
BENCHMARK(BM_DetectPersistence);

static void BM_BuildRepresentative(benchmark::State& state) {
  const auto lib = library(2);
  const auto& type = lib.types.front();
  Rng rng(4);
  std::vector<CellInstance> instances;
  for (int i = 0; i < state.range(0); ++i) {
    instances.push_back({"i" + std::to_string(i), type.info.type_id, jittered(type.pattern, rng, 0.08)});
  }
  RepresentativeConfig cfg;
  cfg.sample_size = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_representative(type.info, instances, cfg));
}
BENCHMARK(BM_BuildRepresentative)->Arg(10)->Arg(50);

static void BM_AnalyzeLibrary(benchmark::State& state) {
  const auto lib = library(static_cast<std::size_t>(state.range(0)));
  std::map<std::string, Representative> reps;
  for (const auto& t : lib.types) {
    Representative rep;
    rep.type_id = t.info.type_id;
    rep.vias = t.pattern;
    rep.support.assign(t.pattern.size(), 1.0);
    reps[rep.type_id] = rep;
  }
  const NodeConfig node{"bench", 1.0, kMatchingRadius, 8.0};
  for (auto _ : state) benchmark::DoNotOptimize(analyze_library(reps, lib.infos(), node));
}
BENCHMARK(BM_AnalyzeLibrary)->Arg(20)->Arg(40);
BENCHMARK_MAIN();
