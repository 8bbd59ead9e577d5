#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <cellscope/detection.hpp>
#include <cellscope/extraction.hpp>
#include <cellscope/representatives.hpp>
#include <cellscope/synthetic.hpp>

namespace cellscope::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kVerification = 3 };

/// Raised for configuration mistakes the parser cannot catch (exit 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out = "out";
  int workers = 1;
  std::uint64_t seed = 0;
  bool force = false;

  ExtractionConfig extraction;
  /// Crop margin in pixels; unset means one node unit.
  std::optional<long> margin;
  RepresentativeConfig reps;
  DetectionConfig detection;

  std::filesystem::path rejects;
  std::filesystem::path truth;
  double dont_use_threshold = 0.0;
  std::size_t top_k = 10;
  std::size_t overlays_per_type = 2;

  SynthLibrarySpec library;
  NoiseSpec noise;
  DatasetSpec dataset;
  std::size_t swap_count = 0;
  double swap_min_score = 0.3;
};

int cmd_extract(const RunConfig& cfg);
int cmd_build_reps(const RunConfig& cfg);
int cmd_verify_reps(const RunConfig& cfg);
int cmd_analyze(const RunConfig& cfg);
int cmd_dont_use(const RunConfig& cfg);
int cmd_detect(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_gen_synthetic(const RunConfig& cfg);

}  // namespace cellscope::cli
