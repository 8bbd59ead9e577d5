#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include <cellscope/ingestion.hpp>
#include <cellscope/manifest.hpp>
#include <cellscope/parallel.hpp>
#include <cellscope/random.hpp>
#include <cellscope/similarity.hpp>

namespace cellscope::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Leaves the file alone when it already holds `content`, so reruns keep
// timestamps as well as bytes.
void write_if_changed(const fs::path& path, const std::string& content) {
  if (fs::exists(path) && read_text(path) == content) return;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

struct ErrorRecord {
  std::string instance_id;
  std::string message;
};

// An empty list removes a stale file from an earlier run.
void write_errors(const fs::path& path, std::vector<ErrorRecord> errors) {
  if (errors.empty()) {
    fs::remove(path);
    return;
  }
  std::sort(errors.begin(), errors.end(),
            [](const ErrorRecord& a, const ErrorRecord& b) { return a.instance_id < b.instance_id; });
  std::string out = "instance_id,message\n";
  for (const auto& e : errors) out += csv_field(e.instance_id) + "," + csv_field(e.message) + "\n";
  write_if_changed(path, out);
  std::cerr << errors.size() << " instance error(s), first: " << errors.front().instance_id << ": "
            << errors.front().message << "\n";
}

DatasetManifest open_manifest(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw UsageError("--manifest is required for this command");
  if (!fs::exists(cfg.manifest)) throw UsageError("manifest '" + cfg.manifest.string() + "' does not exist");
  DatasetManifest m = load_manifest(cfg.manifest);
  for (const auto& inst : m.instances) {
    if (inst.instance_id.find_first_of("/\\") != std::string::npos || inst.instance_id.front() == '.') {
      throw InputError("instance id '" + inst.instance_id + "' cannot name a cache file");
    }
  }
  return m;
}

fs::path via_path(const RunConfig& cfg, const std::string& instance_id) {
  return cfg.out / "vias" / (instance_id + ".csv");
}

fs::path reps_path(const RunConfig& cfg) { return cfg.out / "representatives.json"; }

std::vector<const InstanceRecord*> sorted_records(const DatasetManifest& m) {
  std::vector<const InstanceRecord*> recs;
  for (const auto& r : m.instances) recs.push_back(&r);
  std::sort(recs.begin(), recs.end(),
            [](const InstanceRecord* a, const InstanceRecord* b) { return a->instance_id < b->instance_id; });
  return recs;
}

// Cached vias of every manifest instance, sorted by id.
std::vector<CellInstance> load_instances(const RunConfig& cfg, const DatasetManifest& m) {
  const auto recs = sorted_records(m);
  std::vector<CellInstance> out(recs.size());
  parallel_for(recs.size(), cfg.workers, [&](std::size_t i) {
    const fs::path p = via_path(cfg, recs[i]->instance_id);
    if (!fs::exists(p)) {
      throw IoError("no via cache for instance '" + recs[i]->instance_id + "'; run extract first");
    }
    auto rows = read_via_csv(p);
    out[i] = {recs[i]->instance_id, recs[i]->type_id, {}};
    if (!rows.empty()) out[i].vias = rows.front().vias;
  });
  return out;
}

std::map<std::string, std::vector<CellInstance>> group_by_type(const std::vector<CellInstance>& instances) {
  std::map<std::string, std::vector<CellInstance>> out;
  for (const auto& inst : instances) out[inst.type_id].push_back(inst);
  return out;
}

std::map<std::string, Representative> open_reps(const RunConfig& cfg) {
  if (!fs::exists(reps_path(cfg))) {
    throw IoError("no representative store at '" + reps_path(cfg).string() + "'; run build-reps first");
  }
  return load_representatives(reps_path(cfg));
}

bool up_to_date(const RunConfig& cfg, const fs::path& output, const char* command) {
  if (cfg.force || !fs::exists(output)) return false;
  std::cout << command << ": " << output.string() << " exists, nothing to do (use --force to redo)\n";
  return true;
}

// Instances outside the build sample, thinned to holdout_size. A type with
// no instances left over is checked against all of them.
std::vector<CellInstance> holdout_for(const Representative& rep, const std::vector<CellInstance>& instances,
                                      const RepresentativeConfig& cfg) {
  const auto sample = sample_instances(instances, rep.build_meta.sample_size, rep.build_meta.seed);
  std::set<std::string> used;
  for (const auto& s : sample) used.insert(s.instance_id);
  std::vector<CellInstance> rest;
  for (const auto& inst : instances) {
    if (!used.count(inst.instance_id)) rest.push_back(inst);
  }
  if (rest.empty()) rest = instances;
  return sample_instances(rest, cfg.holdout_size, mix_seed(rep.build_meta.seed, 1));
}

std::vector<std::string> read_rejects(const fs::path& path, const std::map<std::string, Representative>& reps) {
  std::istringstream in(read_text(path));
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    std::string id = line.substr(b, e - b + 1);
    if (!reps.count(id)) throw InputError("rejects file names unknown type '" + id + "'");
    ids.insert(id);
  }
  return {ids.begin(), ids.end()};
}

Json verification_json(const VerificationReport& r, const Representative& rep) {
  Json inst = Json::array();
  for (const auto& c : r.instances) {
    inst.push_back({{"instance_id", c.instance_id}, {"match_fraction", c.match_fraction}, {"mean_residual", c.mean_residual}});
  }
  return {{"pass", r.pass},
          {"attempt", rep.build_meta.attempt},
          {"majority_threshold", rep.build_meta.majority_threshold},
          {"mean_match_fraction", r.mean_match_fraction},
          {"required_match_fraction", r.required_match_fraction},
          {"mean_residual", r.mean_residual},
          {"instances", inst}};
}

std::map<std::string, std::size_t> instance_counts(const DatasetManifest& m) {
  std::map<std::string, std::size_t> counts;
  for (const auto& inst : m.instances) ++counts[inst.type_id];
  return counts;
}

}  // namespace

int cmd_extract(const RunConfig& cfg) {
  const DatasetManifest m = open_manifest(cfg);
  std::vector<const InstanceRecord*> todo;
  std::size_t cached = 0;
  for (const auto* rec : sorted_records(m)) {
    if (!cfg.force && fs::exists(via_path(cfg, rec->instance_id))) {
      ++cached;
    } else {
      todo.push_back(rec);
    }
  }
  fs::create_directories(cfg.out / "vias");
  TileCache tiles(m);
  std::vector<std::string> errors(todo.size());
  parallel_for(todo.size(), cfg.workers, [&](std::size_t i) {
    const InstanceRecord& rec = *todo[i];
    try {
      const auto tile = tiles.get(rec.tile_id);
      const CellInstance inst = extract_instance(m, rec, cfg.extraction, *tile, cfg.margin);
      write_if_changed(via_path(cfg, rec.instance_id), format_via_csv({inst}));
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  std::vector<ErrorRecord> failed;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (!errors[i].empty()) failed.push_back({todo[i]->instance_id, errors[i]});
  }
  write_errors(cfg.out / "extract_errors.csv", failed);
  std::cout << "extract: " << todo.size() - failed.size() << " extracted, " << cached << " cached, " << failed.size()
            << " failed\n";
  return failed.empty() ? kOk : kData;
}

int cmd_build_reps(const RunConfig& cfg) {
  if (up_to_date(cfg, reps_path(cfg), "build-reps")) return kOk;
  const DatasetManifest m = open_manifest(cfg);
  const auto groups = group_by_type(load_instances(cfg, m));

  std::vector<CellTypeInfo> types = m.cell_types;
  std::sort(types.begin(), types.end(), [](const auto& a, const auto& b) { return a.type_id < b.type_id; });
  for (const auto& t : types) {
    const auto it = groups.find(t.type_id);
    const std::size_t n = it == groups.end() ? 0 : it->second.size();
    if (n < 2) {
      throw InputError("type '" + t.type_id + "' has " + std::to_string(n) +
                       " instance(s); a representative needs at least 2");
    }
  }
  std::vector<Representative> built(types.size());
  parallel_for(types.size(), cfg.workers, [&](std::size_t i) {
    built[i] = build_representative(types[i], groups.at(types[i].type_id), cfg.reps);
  });
  std::map<std::string, Representative> reps;
  for (auto& r : built) reps.emplace(r.type_id, std::move(r));
  fit_boxes(reps, types, cfg.reps.radius);
  write_if_changed(reps_path(cfg), serialize_representatives(reps));
  std::size_t empty = 0;
  for (const auto& [id, r] : reps) empty += r.vias.empty() ? 1 : 0;
  std::cout << "build-reps: " << reps.size() << " representatives";
  if (empty) std::cout << " (" << empty << " without vias)";
  std::cout << "\n";
  return kOk;
}

int cmd_verify_reps(const RunConfig& cfg) {
  const DatasetManifest m = open_manifest(cfg);
  auto reps = open_reps(cfg);
  auto groups = group_by_type(load_instances(cfg, m));
  const fs::path dir = cfg.out / "verification";

  if (!cfg.rejects.empty()) {
    const auto rejected = read_rejects(cfg.rejects, reps);
    std::string marker;
    for (const auto& id : rejected) marker += id + "\n";
    const fs::path marker_path = dir / "rejects_applied.txt";
    if (!cfg.force && fs::exists(marker_path) && read_text(marker_path) == marker) {
      std::cout << "verify-reps: rejects already applied\n";
    } else {
      std::vector<Representative> rebuilt(rejected.size());
      parallel_for(rejected.size(), cfg.workers, [&](std::size_t i) {
        const Representative& old = reps.at(rejected[i]);
        rebuilt[i] = rebuild_stricter(m.cell_type(rejected[i]), groups[rejected[i]], cfg.reps,
                                      old.build_meta.attempt + 1);
      });
      for (auto& r : rebuilt) {
        std::cout << "verify-reps: rebuilt " << r.type_id << " at threshold " << r.build_meta.majority_threshold
                  << " (attempt " << r.build_meta.attempt << ")\n";
        reps[r.type_id] = std::move(r);
      }
      fit_boxes(reps, m.cell_types, cfg.reps.radius);
      write_if_changed(reps_path(cfg), serialize_representatives(reps));
      write_if_changed(marker_path, marker);
    }
  }

  std::vector<const Representative*> order;
  for (const auto& [id, r] : reps) order.push_back(&r);
  std::vector<VerificationReport> reports(order.size());
  std::vector<std::vector<CellInstance>> holdouts(order.size());
  parallel_for(order.size(), cfg.workers, [&](std::size_t i) {
    holdouts[i] = holdout_for(*order[i], groups[order[i]->type_id], cfg.reps);
    reports[i] = verify_representative(*order[i], holdouts[i], cfg.reps);
  });

  Json doc = Json::object();
  std::size_t failures = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    doc[order[i]->type_id] = verification_json(reports[i], *order[i]);
    if (!reports[i].pass) {
      ++failures;
      std::cout << "verify-reps: " << order[i]->type_id << " FAILED (match fraction " << reports[i].mean_match_fraction
                << " < " << reports[i].required_match_fraction << " or residual " << reports[i].mean_residual << ")\n";
    }
  }
  write_if_changed(dir / "report.json", doc.dump(2) + "\n");

  // Overlays for manual review.
  TileCache tiles(m);
  std::vector<std::pair<const Representative*, const CellInstance*>> jobs;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t k = 0; k < std::min(cfg.overlays_per_type, holdouts[i].size()); ++k) {
      jobs.emplace_back(order[i], &holdouts[i][k]);
    }
  }
  fs::create_directories(dir / "overlays");
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
    const auto& [rep, inst] = jobs[j];
    const fs::path p = dir / "overlays" / (rep->type_id + "_overlay_" + inst->instance_id + ".png");
    if (!cfg.force && fs::exists(p)) return;
    const InstanceRecord& rec = m.instance(inst->instance_id);
    const auto tile = tiles.get(rec.tile_id);
    const CroppedInstance crop = crop_instance(*tile, rec, cfg.margin.value_or(default_margin(m.node)));
    OverlayInput in;
    in.image = crop.image;
    in.instance_vias = inst->vias;
    in.orientation = rec.orientation;
    in.pixels_per_unit = m.node.pixels_per_unit;
    in.origin_offset = {static_cast<double>(rec.bbox.x - crop.origin_x), static_cast<double>(rec.bbox.y - crop.origin_y)};
    write_png(p, render_overlay(*rep, in, cfg.reps.radius));
  });

  std::cout << "verify-reps: " << order.size() - failures << " passed, " << failures << " failed\n";
  return failures ? kVerification : kOk;
}

int cmd_analyze(const RunConfig& cfg) {
  const DatasetManifest m = open_manifest(cfg);
  const auto reps = open_reps(cfg);
  const LibraryAnalysis a = analyze_library(reps, m.cell_types, m.node, instance_counts(m), cfg.workers);
  write_if_changed(cfg.out / "analysis.json", analysis_to_json(a));
  write_if_changed(cfg.out / "ranking.csv", ranking_to_csv(top_k(a, m.cell_types, cfg.top_k)));
  std::cout << "analyze: " << a.pairs.size() << " valid pairs";
  if (a.mean) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *a.mean);
    std::cout << ", mean score " << buf;
  }
  std::cout << "\n";
  return kOk;
}

int cmd_dont_use(const RunConfig& cfg) {
  if (!(cfg.dont_use_threshold >= 0.0 && cfg.dont_use_threshold <= 1.0)) {
    throw UsageError("--threshold must lie in [0, 1]");
  }
  const DatasetManifest m = open_manifest(cfg);
  const auto reps = open_reps(cfg);
  const LibraryAnalysis a = analyze_library(reps, m.cell_types, m.node, instance_counts(m), cfg.workers);
  std::string out;
  const auto list = emit_dont_use(a, cfg.dont_use_threshold);
  for (const auto& id : list) out += id + "\n";
  write_if_changed(cfg.out / "dont_use.txt", out);
  std::cout << "dont-use: " << list.size() << " type(s) at threshold " << cfg.dont_use_threshold << "\n";
  return kOk;
}

namespace {

// Splits instances into those with a claimed representative and error records.
std::vector<CellInstance> classifiable(const std::vector<CellInstance>& instances,
                                       const std::map<std::string, Representative>& reps,
                                       std::vector<ErrorRecord>& errors) {
  std::vector<CellInstance> ok;
  for (const auto& inst : instances) {
    if (reps.count(inst.type_id)) {
      ok.push_back(inst);
    } else {
      errors.push_back({inst.instance_id, "claimed type '" + inst.type_id + "' has no representative"});
    }
  }
  return ok;
}

}  // namespace

int cmd_detect(const RunConfig& cfg) {
  const DatasetManifest m = open_manifest(cfg);
  const auto reps = open_reps(cfg);
  std::vector<ErrorRecord> errors;
  const auto instances = classifiable(load_instances(cfg, m), reps, errors);
  std::vector<Verdict> verdicts(instances.size());
  parallel_for(instances.size(), cfg.workers, [&](std::size_t i) {
    const auto cands = same_width_candidates(instances[i].type_id, reps, m.cell_types);
    verdicts[i] = classify(instances[i], instances[i].type_id, cands, cfg.detection);
  });
  write_if_changed(cfg.out / "verdicts.csv", verdicts_to_csv(verdicts));
  write_errors(cfg.out / "detect_errors.csv", errors);
  std::size_t flagged = 0;
  for (const auto& v : verdicts) flagged += v.flagged(cfg.detection.tie_policy) ? 1 : 0;
  std::cout << "detect: " << verdicts.size() << " classified, " << flagged << " flagged (tie policy "
            << to_string(cfg.detection.tie_policy) << ")\n";
  return errors.empty() ? kOk : kData;
}

int cmd_eval(const RunConfig& cfg) {
  if (cfg.truth.empty()) throw UsageError("eval needs --truth");
  if (!fs::exists(cfg.truth)) throw UsageError("truth file '" + cfg.truth.string() + "' does not exist");
  const DatasetManifest m = open_manifest(cfg);
  const auto reps = open_reps(cfg);
  const auto truth = load_truth(cfg.truth);
  std::vector<ErrorRecord> errors;
  const auto instances = classifiable(load_instances(cfg, m), reps, errors);

  std::map<std::string, std::string> true_types;
  for (const auto& [id, t] : truth) true_types[id] = t.true_type;
  const PlantedEvalReport planted =
      evaluate_planted(instances, true_types, reps, m.cell_types, cfg.detection, cfg.workers);

  // Beta errors use the types the instances really are.
  std::vector<CellInstance> actual = instances;
  for (auto& inst : actual) {
    const auto it = true_types.find(inst.instance_id);
    if (it != true_types.end()) inst.type_id = it->second;
  }
  const LibraryAnalysis a = analyze_library(reps, m.cell_types, m.node, {}, cfg.workers);
  std::vector<BetaErrorReport> beta;
  for (const auto& p : a.pairs) {
    auto [ab, ba] = evaluate_pair(p.type_a, p.type_b, reps, m.cell_types, actual, cfg.detection, cfg.workers);
    beta.push_back(std::move(ab));
    beta.push_back(std::move(ba));
  }
  std::sort(beta.begin(), beta.end(), [](const auto& x, const auto& y) {
    return std::tie(x.claimed_type, x.true_type) < std::tie(y.claimed_type, y.true_type);
  });

  write_if_changed(cfg.out / "eval" / "planted.json", planted_report_to_json(planted));
  write_if_changed(cfg.out / "eval" / "verdicts.csv", verdicts_to_csv(planted.verdicts));
  write_if_changed(cfg.out / "eval" / "beta.json", beta_reports_to_json(beta));
  write_errors(cfg.out / "eval" / "errors.csv", errors);

  std::cout << "eval: " << planted.instances << " instances, " << planted.planted << " planted, TP "
            << planted.true_positives << ", FN " << planted.false_negatives << ", FP " << planted.false_positives;
  if (planted.planted == 0) std::cout << " (FN rate undefined: no planted instances)";
  std::cout << "\n";
  return errors.empty() ? kOk : kData;
}

int cmd_gen_synthetic(const RunConfig& cfg) {
  if (up_to_date(cfg, cfg.out / "manifest.json", "gen-synthetic")) return kOk;
  const SynthLibrary lib = gen_library(cfg.library);
  DatasetSpec spec = cfg.dataset;
  if (cfg.swap_count > 0) spec.swaps = choose_swaps(lib, cfg.swap_count, cfg.swap_min_score);
  const SynthDataset ds = gen_dataset(lib, cfg.noise, spec, cfg.workers);
  write_dataset(ds, cfg.out);

  Json doc = Json::object();
  for (const auto& t : lib.types) {
    Json vias = Json::array();
    for (const auto& p : t.pattern) vias.push_back({p.x, p.y});
    doc[t.info.type_id] = {{"function_class", t.info.function_class},
                           {"width", t.info.width},
                           {"height", t.info.height},
                           {"vias", vias}};
  }
  write_if_changed(cfg.out / "library.json", doc.dump(2) + "\n");
  Json swaps = Json::array();
  for (const auto& s : spec.swaps) swaps.push_back({{"claimed_type", s.claimed_type}, {"true_type", s.true_type}});
  write_if_changed(cfg.out / "swaps.json", swaps.dump(2) + "\n");
  std::cout << "gen-synthetic: " << lib.types.size() << " types, " << ds.manifest.instances.size() << " instances, "
            << ds.manifest.tiles.size() << " tiles, " << spec.swaps.size() << " swaps\n";
  return kOk;
}

}  // namespace cellscope::cli
