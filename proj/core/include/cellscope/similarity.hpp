#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cellscope/geometry.hpp"
#include "cellscope/manifest.hpp"
#include "cellscope/representatives.hpp"

namespace cellscope {

struct PairResult {
  /// type_a < type_b.
  std::string type_a;
  std::string type_b;
  double score = 0.0;
  std::size_t match_count = 0;
  Translation translation;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

inline constexpr double kHistogramBinWidth = 0.02;
inline constexpr std::size_t kHistogramBins = 50;

struct LibraryAnalysis {
  std::string node;
  /// Ascending by (score, type_a, type_b).
  std::vector<PairResult> pairs;
  /// Unset when the library has no valid pair.
  std::optional<double> mean;
  /// Bin i counts scores in [0.02 i, 0.02 (i+1)); 1.0 lands in the last bin.
  std::vector<std::size_t> histogram;
  /// (score, number of pairs with score <= it), one entry per distinct score.
  std::vector<std::pair<double, std::size_t>> cumulative;
};

/// Unordered pairs with equal width and different function class, each
/// ordered by type id, sorted.
std::vector<std::pair<std::string, std::string>> valid_pairs(std::span<const CellTypeInfo> library);

PairResult score_pair(const Representative& a, const Representative& b, double r);

/// Scores every valid pair among the types that have a representative.
/// instance_counts is optional bookkeeping for the report (missing ids
/// count as 0). Output does not depend on `workers`.
LibraryAnalysis analyze_library(const std::map<std::string, Representative>& reps,
                                std::span<const CellTypeInfo> library, const NodeConfig& node,
                                const std::map<std::string, std::size_t>& instance_counts = {}, int workers = 1);

struct RankedPair {
  std::size_t rank = 0;
  PairResult pair;
  std::string func_a;
  std::string func_b;
};

std::vector<RankedPair> top_k(const LibraryAnalysis& analysis, std::span<const CellTypeInfo> library, std::size_t k);

/// Both members of every pair scoring <= threshold, deduplicated and sorted.
std::vector<std::string> emit_dont_use(const LibraryAnalysis& analysis, double score_threshold);

std::string analysis_to_json(const LibraryAnalysis& analysis);
/// `rank,type_a,type_b,func_a,func_b,n_a,n_b,score`
std::string ranking_to_csv(const std::vector<RankedPair>& rows);

}  // namespace cellscope
