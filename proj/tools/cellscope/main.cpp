#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <cellscope/error.hpp>
#include <cellscope/manifest.hpp>

#include "commands.hpp"

using namespace cellscope;
using namespace cellscope::cli;

namespace {

std::vector<PlantedPair> parse_planted(const std::vector<std::string>& items) {
  std::vector<PlantedPair> out;
  for (const auto& item : items) {
    PlantedPair p;
    char extra = 0;
    if (std::sscanf(item.c_str(), "%zu:%zu:%lf%c", &p.a, &p.b, &p.target_score, &extra) != 3) {
      throw UsageError("--planted expects a:b:score, got '" + item + "'");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Via-pattern analysis of standard cell libraries and cell-substitution detection"};
  app.set_config("--config", "", "TOML-style key = value file; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  app.fallthrough();

  RunConfig cfg;
  cfg.seed = 1;
  std::string method = "threshold";
  std::string tie_policy = "flag";
  long margin = -1;
  std::vector<std::string> planted;
  bool fixed_orientation = false;

  app.add_option("--manifest", cfg.manifest, "Dataset manifest (JSON)");
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();
  app.add_option("--workers", cfg.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", cfg.seed, "Seed for sampling and synthetic data")->capture_default_str();
  app.add_flag("--force", cfg.force, "Redo stages whose outputs exist");

  auto& ex = cfg.extraction;
  app.add_option("--method", method, "Via detector")->check(CLI::IsMember({"threshold", "persistence"}))->capture_default_str();
  app.add_option("--binarize-threshold", ex.binarize_threshold)->capture_default_str();
  app.add_option("--erosion-radius", ex.erosion_radius)->capture_default_str();
  app.add_option("--min-blob-area", ex.min_blob_area)->capture_default_str();
  app.add_option("--persistence-threshold", ex.persistence_threshold)->capture_default_str();
  app.add_option("--smoothing-sigma", ex.smoothing_sigma)->capture_default_str();
  app.add_option("--margin", margin, "Crop margin in pixels (-1: one node unit)")->capture_default_str();

  auto& rc = cfg.reps;
  app.add_option("--sample-size", rc.sample_size)->capture_default_str();
  app.add_option("--majority-threshold", rc.majority_threshold)->capture_default_str();
  app.add_option("--kmeans-tolerance", rc.kmeans_tolerance)->capture_default_str();
  app.add_option("--kmeans-max-iter", rc.kmeans_max_iter)->capture_default_str();
  app.add_option("--holdout-size", rc.holdout_size)->capture_default_str();
  app.add_option("--verify-min-match-fraction", rc.verify_min_match_fraction)->capture_default_str();
  app.add_option("--verify-max-residual", rc.verify_max_residual)->capture_default_str();
  app.add_option("--verify-calibrate-support", rc.verify_calibrate_support)->capture_default_str();
  app.add_option("--verify-max-shift", rc.verify_max_shift)->capture_default_str();
  app.add_option("--overlays-per-type", cfg.overlays_per_type)->capture_default_str();
  app.add_option("--rejects", cfg.rejects, "verify-reps: types to rebuild at a stricter majority");

  auto& dc = cfg.detection;
  app.add_option("--delta", dc.delta)->capture_default_str();
  app.add_option("--tie-policy", tie_policy)->check(CLI::IsMember({"flag", "FlagAsPositive", "benign", "TreatAsBenign"}))->capture_default_str();
  app.add_option("--tie-epsilon", dc.tie_epsilon)->capture_default_str();
  app.add_option("--max-shift", dc.max_shift)->capture_default_str();
  app.add_option("--truth", cfg.truth, "eval: truth.json of a synthetic dataset");

  app.add_option("--threshold", cfg.dont_use_threshold, "dont-use: score threshold")->capture_default_str();
  app.add_option("--top-k", cfg.top_k)->capture_default_str();

  auto& lib = cfg.library;
  auto& noise = cfg.noise;
  auto& ds = cfg.dataset;
  app.add_option("--types", lib.type_count)->capture_default_str();
  app.add_option("--min-vias", lib.min_vias)->capture_default_str();
  app.add_option("--max-vias", lib.max_vias)->capture_default_str();
  app.add_option("--widths", lib.width_classes)->delimiter(',')->capture_default_str();
  app.add_option("--cell-height", lib.cell_height)->capture_default_str();
  app.add_option("--min-separation", lib.min_separation)->capture_default_str();
  app.add_option("--planted", planted, "Planted pairs a:b:score (type indices)")->delimiter(',');
  app.add_option("--instances-per-type", ds.instances_per_type)->capture_default_str();
  app.add_option("--instances-per-tile", ds.instances_per_tile)->capture_default_str();
  app.add_option("--pixels-per-unit", ds.style.pixels_per_unit)->capture_default_str();
  app.add_option("--node-name", ds.node_name)->capture_default_str();
  app.add_flag("--fixed-orientation", fixed_orientation, "Render every instance as R0");
  app.add_option("--jitter", noise.jitter_sigma)->capture_default_str();
  app.add_option("--dropout", noise.dropout_prob)->capture_default_str();
  app.add_option("--spurious-rate", noise.spurious_rate)->capture_default_str();
  app.add_flag("--spurious-per-via", noise.spurious_per_via);
  app.add_option("--intensity-noise", noise.intensity_noise_sigma)->capture_default_str();
  app.add_option("--offset-range", noise.offset_range)->capture_default_str();
  app.add_option("--contrast-margin", noise.contrast_margin)->capture_default_str();
  app.add_option("--swaps", cfg.swap_count, "Planted swaps between distinguishable types")->capture_default_str();
  app.add_option("--swap-min-score", cfg.swap_min_score)->capture_default_str();

  const std::map<std::string, int (*)(const RunConfig&)> commands = {
      {"extract", cmd_extract},   {"build-reps", cmd_build_reps}, {"verify-reps", cmd_verify_reps},
      {"analyze", cmd_analyze},   {"dont-use", cmd_dont_use},     {"detect", cmd_detect},
      {"eval", cmd_eval},         {"gen-synthetic", cmd_gen_synthetic}};
  const std::map<std::string, std::string> help = {
      {"extract", "Detect vias of every manifest instance into the via cache"},
      {"build-reps", "Build one representative per cell type"},
      {"verify-reps", "Check representatives on held-out instances and render overlays"},
      {"analyze", "Score all same-width pairs of the library"},
      {"dont-use", "List types in pairs scoring at or below --threshold"},
      {"detect", "Classify every instance against its claimed type"},
      {"eval", "Score detection against a synthetic truth file"},
      {"gen-synthetic", "Generate a synthetic library and dataset into --out"}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    ex.method = method == "persistence" ? DetectionMethod::Persistence : DetectionMethod::Threshold;
    if (margin >= 0) cfg.margin = margin;
    dc.tie_policy = parse_tie_policy(tie_policy);
    rc.seed = cfg.seed;
    lib.seed = cfg.seed;
    ds.seed = cfg.seed;
    lib.planted = parse_planted(planted);
    ds.random_orientation = !fixed_orientation;
    try {
      ex.validate();
      dc.validate();
      noise.validate();
    } catch (const InputError& e) {
      throw UsageError(e.what());
    }
    const std::string name = app.get_subcommands().front()->get_name();
    return commands.at(name)(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DegenerateLibraryError& e) {
    std::cerr << "error: degenerate representative for type '" << e.type_id() << "': " << e.what() << "\n";
    return kData;
  } catch (const ManifestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
}
