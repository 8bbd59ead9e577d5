#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cellscope/geometry.hpp"
#include "cellscope/ingestion.hpp"
#include "cellscope/manifest.hpp"
#include "cellscope/representatives.hpp"
#include "cellscope/stats.hpp"

namespace cellscope {

enum class VerdictKind { Benign, Trojan, Ambiguous };
enum class TiePolicy { FlagAsPositive, TreatAsBenign };

std::string_view to_string(VerdictKind k) noexcept;
std::string_view to_string(TiePolicy p) noexcept;
/// Accepts "flag" / "FlagAsPositive" and "benign" / "TreatAsBenign".
TiePolicy parse_tie_policy(std::string_view text);

struct DetectionConfig {
  /// Margin by which another representative must beat the claimed one.
  double delta = 0.0;
  TiePolicy tie_policy = TiePolicy::FlagAsPositive;
  double tie_epsilon = 1e-9;
  double radius = kMatchingRadius;
  /// Largest instance-to-representative shift considered, in units. Both
  /// live in the cell frame, so only bbox error separates them.
  double max_shift = 1.0;

  void validate() const;
};

struct Verdict {
  std::string instance_id;
  VerdictKind kind = VerdictKind::Benign;
  std::string claimed_type;
  /// Every candidate attaining the minimum score, sorted.
  std::vector<std::string> best_types;
  double score_claimed = 0.0;
  /// Best score among the other candidates; equals score_claimed when the
  /// claimed type is the only candidate.
  double score_best = 0.0;
  std::map<std::string, double> scores;

  /// Trojan, or Ambiguous under FlagAsPositive.
  bool flagged(TiePolicy policy) const noexcept;
};

/// Vias inside the representative's box, boundary inclusive. The input must
/// be in the representative's cell-local frame.
ViaSet clip_to_box(const ViaSet& aligned, const Representative& rep);

/// Clip the cell-local instance to the representative's box, align what is
/// left, and score it.
double score_instance(const Representative& rep, const ViaSet& instance, double r,
                      double max_shift = std::numeric_limits<double>::infinity());

/// score_instance against every candidate, keyed by type id.
std::map<std::string, double> score_candidates(const ViaSet& instance,
                                               std::span<const Representative* const> candidates, double r,
                                               double max_shift);

/// The verdict rule on precomputed scores. Throws InputError when the
/// claimed type has no score.
Verdict decide(const std::string& instance_id, const std::string& claimed_type, std::map<std::string, double> scores,
               const DetectionConfig& cfg);

/// Candidates are the claimed type's same-width representatives, claimed
/// included. Throws InputError when the claimed type is missing.
Verdict classify(const CellInstance& instance, const std::string& claimed_type,
                 std::span<const Representative* const> candidates, const DetectionConfig& cfg);

/// Representatives sharing the width of `type_id` (itself included), by id.
std::vector<const Representative*> same_width_candidates(const std::string& type_id,
                                                         const std::map<std::string, Representative>& reps,
                                                         std::span<const CellTypeInfo> library);

struct BetaErrorReport {
  std::string claimed_type;
  std::string true_type;
  std::size_t n = 0;
  std::size_t false_negatives = 0;
  double false_negative_rate = 0.0;
  Interval ci95;
  /// Instances of the claimed type itself that were flagged.
  std::size_t native_n = 0;
  std::size_t false_positives = 0;
};

/// Direction 1 claims every instance of both types as type_a and counts
/// unflagged type_b instances; direction 2 is the mirror.
std::pair<BetaErrorReport, BetaErrorReport> evaluate_pair(const std::string& type_a, const std::string& type_b,
                                                          const std::map<std::string, Representative>& reps,
                                                          std::span<const CellTypeInfo> library,
                                                          std::span<const CellInstance> instances,
                                                          const DetectionConfig& cfg, int workers = 1);

struct PlantedEvalReport {
  std::size_t instances = 0;
  std::size_t planted = 0;
  std::size_t true_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t false_positives = 0;
  std::vector<Verdict> verdicts;
};

/// Classifies every instance as its manifest type and compares with
/// true_types (instance_id -> substituted type; absent ids are unmodified).
PlantedEvalReport evaluate_planted(std::span<const CellInstance> instances,
                                   const std::map<std::string, std::string>& true_types,
                                   const std::map<std::string, Representative>& reps,
                                   std::span<const CellTypeInfo> library, const DetectionConfig& cfg,
                                   int workers = 1);

/// `instance_id,claimed,best,kind,score_claimed,score_best`; tied best
/// types are joined with ';'.
std::string verdicts_to_csv(std::span<const Verdict> verdicts);
std::string beta_reports_to_json(std::span<const BetaErrorReport> reports);
std::string planted_report_to_json(const PlantedEvalReport& report);

}  // namespace cellscope
