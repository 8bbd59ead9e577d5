#include "cellscope/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

#include "cellscope/error.hpp"
#include "cellscope/parallel.hpp"

namespace cellscope {

using Json = nlohmann::ordered_json;

std::string_view to_string(VerdictKind k) noexcept {
  switch (k) {
    case VerdictKind::Benign: return "Benign";
    case VerdictKind::Trojan: return "Trojan";
    case VerdictKind::Ambiguous: return "Ambiguous";
  }
  return "?";
}

std::string_view to_string(TiePolicy p) noexcept {
  return p == TiePolicy::FlagAsPositive ? "FlagAsPositive" : "TreatAsBenign";
}

TiePolicy parse_tie_policy(std::string_view text) {
  if (text == "flag" || text == "FlagAsPositive") return TiePolicy::FlagAsPositive;
  if (text == "benign" || text == "TreatAsBenign") return TiePolicy::TreatAsBenign;
  throw InputError("unknown tie policy '" + std::string(text) + "'");
}

void DetectionConfig::validate() const {
  if (!(delta >= 0.0)) throw InputError("detection: delta must be >= 0");
  if (!(tie_epsilon >= 0.0)) throw InputError("detection: tie_epsilon must be >= 0");
  if (!(max_shift >= 0.0)) throw InputError("detection: max_shift must be >= 0");
}

bool Verdict::flagged(TiePolicy policy) const noexcept {
  return kind == VerdictKind::Trojan || (kind == VerdictKind::Ambiguous && policy == TiePolicy::FlagAsPositive);
}

ViaSet clip_to_box(const ViaSet& aligned, const Representative& rep) {
  std::vector<ViaPoint> kept;
  for (const auto& p : aligned) {
    if (rep.box.contains(p)) kept.push_back(p);
  }
  return ViaSet(std::move(kept), aligned.source());
}

double score_instance(const Representative& rep, const ViaSet& instance, double r, double max_shift) {
  // Instance and representative coordinates are both cell-local, so the box
  // sits on the instance's own cell before alignment. Clipping after an
  // unconstrained alignment would let a large shift discard unmatched vias.
  const ViaSet clipped = clip_to_box(instance, rep);
  const AlignmentResult res = align(clipped, rep.vias, r, max_shift);
  return similarity_score(res.match_count, clipped.size(), rep.vias.size());
}

std::map<std::string, double> score_candidates(const ViaSet& instance,
                                               std::span<const Representative* const> candidates, double r,
                                               double max_shift) {
  std::map<std::string, double> scores;
  for (const Representative* rep : candidates) scores[rep->type_id] = score_instance(*rep, instance, r, max_shift);
  return scores;
}

Verdict decide(const std::string& instance_id, const std::string& claimed_type, std::map<std::string, double> scores,
               const DetectionConfig& cfg) {
  Verdict v;
  v.instance_id = instance_id;
  v.claimed_type = claimed_type;
  v.scores = std::move(scores);
  const auto own = v.scores.find(claimed_type);
  if (own == v.scores.end()) {
    throw InputError("no representative for claimed type '" + claimed_type + "' of instance '" + instance_id + "'");
  }
  v.score_claimed = own->second;
  double best_other = std::numeric_limits<double>::infinity();
  for (const auto& [id, s] : v.scores) {
    if (id != claimed_type) best_other = std::min(best_other, s);
  }
  const double minimum = std::min(v.score_claimed, best_other);
  for (const auto& [id, s] : v.scores) {
    if (std::abs(s - minimum) <= cfg.tie_epsilon) v.best_types.push_back(id);
  }
  if (!std::isfinite(best_other)) {
    v.score_best = v.score_claimed;
    v.kind = VerdictKind::Benign;
    return v;
  }
  v.score_best = best_other;
  const double gap = v.score_claimed - best_other;
  if (std::abs(gap) <= cfg.tie_epsilon) {
    v.kind = VerdictKind::Ambiguous;
  } else if (gap > cfg.delta) {
    v.kind = VerdictKind::Trojan;
  } else {
    v.kind = VerdictKind::Benign;
  }
  return v;
}

Verdict classify(const CellInstance& instance, const std::string& claimed_type,
                 std::span<const Representative* const> candidates, const DetectionConfig& cfg) {
  const bool listed = std::any_of(candidates.begin(), candidates.end(),
                                  [&](const Representative* rep) { return rep->type_id == claimed_type; });
  if (!listed) {
    throw InputError("classify: no representative for claimed type '" + claimed_type + "' of instance '" +
                     instance.instance_id + "'");
  }
  return decide(instance.instance_id, claimed_type, score_candidates(instance.vias, candidates, cfg.radius, cfg.max_shift), cfg);
}

std::vector<const Representative*> same_width_candidates(const std::string& type_id,
                                                         const std::map<std::string, Representative>& reps,
                                                         std::span<const CellTypeInfo> library) {
  std::map<std::string, double> width;
  for (const auto& t : library) width[t.type_id] = t.width;
  std::vector<const Representative*> out;
  const auto own = width.find(type_id);
  if (own == width.end()) return out;
  for (const auto& [id, rep] : reps) {
    const auto w = width.find(id);
    if (w != width.end() && w->second == own->second) out.push_back(&rep);
  }
  return out;
}

namespace {

BetaErrorReport tally(const std::string& claimed, const std::string& other,
                      const std::vector<const CellInstance*>& relevant,
                      const std::vector<std::map<std::string, double>>& scores, const DetectionConfig& cfg) {
  BetaErrorReport rep;
  rep.claimed_type = claimed;
  rep.true_type = other;
  for (std::size_t i = 0; i < relevant.size(); ++i) {
    const bool flagged = decide(relevant[i]->instance_id, claimed, scores[i], cfg).flagged(cfg.tie_policy);
    if (relevant[i]->type_id == other) {
      ++rep.n;
      if (!flagged) ++rep.false_negatives;
    } else {
      ++rep.native_n;
      if (flagged) ++rep.false_positives;
    }
  }
  rep.false_negative_rate = rep.n == 0 ? 0.0 : static_cast<double>(rep.false_negatives) / static_cast<double>(rep.n);
  rep.ci95 = wilson_interval(rep.false_negatives, rep.n);
  return rep;
}

}  // namespace

std::pair<BetaErrorReport, BetaErrorReport> evaluate_pair(const std::string& type_a, const std::string& type_b,
                                                          const std::map<std::string, Representative>& reps,
                                                          std::span<const CellTypeInfo> library,
                                                          std::span<const CellInstance> instances,
                                                          const DetectionConfig& cfg, int workers) {
  cfg.validate();
  const auto candidates_a = same_width_candidates(type_a, reps, library);
  auto has = [](const std::vector<const Representative*>& c, const std::string& id) {
    return std::any_of(c.begin(), c.end(), [&](const Representative* r) { return r->type_id == id; });
  };
  if (!has(candidates_a, type_a) || !has(candidates_a, type_b)) {
    throw InputError("evaluate_pair: " + type_a + " and " + type_b + " need same-width representatives");
  }
  std::vector<const CellInstance*> relevant;
  for (const auto& inst : instances) {
    if (inst.type_id == type_a || inst.type_id == type_b) relevant.push_back(&inst);
  }
  // Both directions share the candidate set, so each instance is scored once.
  std::vector<std::map<std::string, double>> scores(relevant.size());
  parallel_for(relevant.size(), workers, [&](std::size_t i) {
    scores[i] = score_candidates(relevant[i]->vias, candidates_a, cfg.radius, cfg.max_shift);
  });
  return {tally(type_a, type_b, relevant, scores, cfg), tally(type_b, type_a, relevant, scores, cfg)};
}

PlantedEvalReport evaluate_planted(std::span<const CellInstance> instances,
                                   const std::map<std::string, std::string>& true_types,
                                   const std::map<std::string, Representative>& reps,
                                   std::span<const CellTypeInfo> library, const DetectionConfig& cfg, int workers) {
  cfg.validate();
  PlantedEvalReport out;
  out.instances = instances.size();
  out.verdicts.resize(instances.size());
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    const auto candidates = same_width_candidates(instances[i].type_id, reps, library);
    out.verdicts[i] = classify(instances[i], instances[i].type_id, candidates, cfg);
  });
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto it = true_types.find(instances[i].instance_id);
    const bool planted = it != true_types.end() && it->second != instances[i].type_id;
    const bool flagged = out.verdicts[i].flagged(cfg.tie_policy);
    if (planted) {
      ++out.planted;
      ++(flagged ? out.true_positives : out.false_negatives);
    } else if (flagged) {
      ++out.false_positives;
    }
  }
  return out;
}

std::string verdicts_to_csv(std::span<const Verdict> verdicts) {
  std::string out = "instance_id,claimed,best,kind,score_claimed,score_best\n";
  char buf[64];
  for (const auto& v : verdicts) {
    std::string best;
    for (const auto& id : v.best_types) best += (best.empty() ? "" : ";") + id;
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", v.score_claimed, v.score_best);
    out += v.instance_id + "," + v.claimed_type + "," + best + "," + std::string(to_string(v.kind)) + "," + buf + "\n";
  }
  return out;
}

std::string beta_reports_to_json(std::span<const BetaErrorReport> reports) {
  Json arr = Json::array();
  for (const auto& r : reports) {
    arr.push_back({{"claimed_type", r.claimed_type},
                   {"true_type", r.true_type},
                   {"n", r.n},
                   {"false_negatives", r.false_negatives},
                   {"false_negative_rate", r.false_negative_rate},
                   {"ci95", {r.ci95.lo, r.ci95.hi}},
                   {"native_n", r.native_n},
                   {"false_positives", r.false_positives}});
  }
  return arr.dump(2) + "\n";
}

std::string planted_report_to_json(const PlantedEvalReport& report) {
  Json doc = {{"instances", report.instances},
              {"planted", report.planted},
              {"true_positives", report.true_positives},
              {"false_negatives", report.false_negatives},
              {"false_positives", report.false_positives}};
  return doc.dump(2) + "\n";
}

}  // namespace cellscope
