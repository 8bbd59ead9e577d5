#include "cellscope/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "cellscope/error.hpp"
#include "cellscope/parallel.hpp"

namespace cellscope {

using Json = nlohmann::ordered_json;

std::vector<std::pair<std::string, std::string>> valid_pairs(std::span<const CellTypeInfo> library) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < library.size(); ++i) {
    for (std::size_t j = i + 1; j < library.size(); ++j) {
      const CellTypeInfo& a = library[i];
      const CellTypeInfo& b = library[j];
      if (a.width != b.width || a.function_class == b.function_class) continue;
      if (a.type_id < b.type_id) {
        out.emplace_back(a.type_id, b.type_id);
      } else {
        out.emplace_back(b.type_id, a.type_id);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

PairResult score_pair(const Representative& a, const Representative& b, double r) {
  const bool swap = b.type_id < a.type_id;
  const Representative& first = swap ? b : a;
  const Representative& second = swap ? a : b;
  const AlignmentResult res = align(first.vias, second.vias, r);
  PairResult out;
  out.type_a = first.type_id;
  out.type_b = second.type_id;
  out.match_count = res.match_count;
  out.translation = res.translation;
  out.score = similarity_score(res.match_count, first.vias.size(), second.vias.size());
  return out;
}

LibraryAnalysis analyze_library(const std::map<std::string, Representative>& reps,
                                std::span<const CellTypeInfo> library, const NodeConfig& node,
                                const std::map<std::string, std::size_t>& instance_counts, int workers) {
  if (reps.size() < 2) throw InputError("analyze_library: need at least two representatives");
  std::vector<CellTypeInfo> present;
  for (const auto& t : library) {
    if (reps.count(t.type_id) != 0) present.push_back(t);
  }
  const auto pairs = valid_pairs(present);

  LibraryAnalysis out;
  out.node = node.name;
  out.pairs.resize(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    out.pairs[i] = score_pair(reps.at(pairs[i].first), reps.at(pairs[i].second), node.matching_radius);
  });
  auto count_of = [&](const std::string& id) {
    auto it = instance_counts.find(id);
    return it == instance_counts.end() ? std::size_t{0} : it->second;
  };
  for (auto& p : out.pairs) {
    p.n_a = count_of(p.type_a);
    p.n_b = count_of(p.type_b);
  }
  std::stable_sort(out.pairs.begin(), out.pairs.end(), [](const PairResult& x, const PairResult& y) {
    if (x.score != y.score) return x.score < y.score;
    if (x.type_a != y.type_a) return x.type_a < y.type_a;
    return x.type_b < y.type_b;
  });

  out.histogram.assign(kHistogramBins, 0);
  double sum = 0.0;
  for (const auto& p : out.pairs) {
    sum += p.score;
    // Scores are ratios of small integers; the epsilon keeps 0.2 out of bin 9.
    auto bin = static_cast<std::size_t>(std::floor(p.score / kHistogramBinWidth + 1e-9));
    ++out.histogram[std::min(bin, kHistogramBins - 1)];
  }
  if (!out.pairs.empty()) out.mean = sum / static_cast<double>(out.pairs.size());
  for (std::size_t i = 0; i < out.pairs.size(); ++i) {
    if (!out.cumulative.empty() && out.cumulative.back().first == out.pairs[i].score) {
      out.cumulative.back().second = i + 1;
    } else {
      out.cumulative.emplace_back(out.pairs[i].score, i + 1);
    }
  }
  return out;
}

std::vector<RankedPair> top_k(const LibraryAnalysis& analysis, std::span<const CellTypeInfo> library, std::size_t k) {
  if (k < 1) throw InputError("top_k: k must be >= 1");
  std::map<std::string, std::string> func;
  for (const auto& t : library) func[t.type_id] = t.function_class;
  std::vector<RankedPair> out;
  for (std::size_t i = 0; i < std::min(k, analysis.pairs.size()); ++i) {
    const PairResult& p = analysis.pairs[i];
    out.push_back({i + 1, p, func[p.type_a], func[p.type_b]});
  }
  return out;
}

std::vector<std::string> emit_dont_use(const LibraryAnalysis& analysis, double score_threshold) {
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw InputError("emit_dont_use: threshold must lie in [0, 1]");
  }
  std::set<std::string> ids;
  for (const auto& p : analysis.pairs) {
    if (p.score <= score_threshold) {
      ids.insert(p.type_a);
      ids.insert(p.type_b);
    }
  }
  return {ids.begin(), ids.end()};
}

std::string analysis_to_json(const LibraryAnalysis& analysis) {
  Json pairs = Json::array();
  for (const auto& p : analysis.pairs) {
    pairs.push_back({{"type_a", p.type_a},
                     {"type_b", p.type_b},
                     {"score", p.score},
                     {"match_count", p.match_count},
                     {"translation", {p.translation.dx, p.translation.dy}},
                     {"n_a", p.n_a},
                     {"n_b", p.n_b}});
  }
  Json cumulative = Json::array();
  for (const auto& [score, count] : analysis.cumulative) cumulative.push_back({score, count});
  Json doc = {{"node", analysis.node},
              {"pairs", pairs},
              {"mean", analysis.mean ? Json(*analysis.mean) : Json(nullptr)},
              {"histogram", {{"bin_width", kHistogramBinWidth}, {"counts", analysis.histogram}}},
              {"cumulative", cumulative}};
  return doc.dump(2) + "\n";
}

std::string ranking_to_csv(const std::vector<RankedPair>& rows) {
  std::string out = "rank,type_a,type_b,func_a,func_b,n_a,n_b,score\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.4f", row.pair.score);
    out += std::to_string(row.rank) + "," + row.pair.type_a + "," + row.pair.type_b + "," + row.func_a + "," +
           row.func_b + "," + std::to_string(row.pair.n_a) + "," + std::to_string(row.pair.n_b) + "," + buf + "\n";
  }
  return out;
}

}  // namespace cellscope
