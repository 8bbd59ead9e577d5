// End-to-end runs of the cellscope binary on small synthetic datasets.

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = "\"" CELLSCOPE_CLI_PATH "\" " + args + " 2>&1";
  RunResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return res;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.output.append(buf.data(), n);
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

struct Snapshot {
  std::map<std::string, std::string> bytes;
  std::map<std::string, fs::file_time_type> times;
};

Snapshot snapshot(const fs::path& root) {
  Snapshot s;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    s.bytes[rel] = read(e.path());
    s.times[rel] = e.last_write_time();
  }
  return s;
}

const char* kNoise = " --jitter 0.08 --dropout 0.05 --spurious-rate 0.1 --offset-range 0.25 --intensity-noise 3";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("cellscope_cli_") + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override {
    if (!HasFailure()) fs::remove_all(root_);
  }

  // Dataset with one identical planted pair (T00/T04) and `swaps` swaps.
  fs::path make_data(const std::string& name, const std::string& extra = " --planted 0:4:0 --swaps 1") {
    const fs::path dir = root_ / name;
    const auto r = run("gen-synthetic --out " + q(dir) + " --seed 3 --types 8 --instances-per-type 12" + kNoise + extra);
    EXPECT_EQ(r.code, 0) << r.output;
    return dir;
  }

  std::string io(const fs::path& data, const fs::path& work, int workers = 1) {
    return " --manifest " + q(data / "manifest.json") + " --out " + q(work) + " --workers " + std::to_string(workers);
  }

  void pipeline(const fs::path& data, const fs::path& work, int workers = 1) {
    for (const char* stage : {"extract", "build-reps", "verify-reps", "analyze", "dont-use", "detect"}) {
      const auto r = run(std::string(stage) + io(data, work, workers));
      ASSERT_EQ(r.code, 0) << stage << ": " << r.output;
    }
    const auto r = run("eval" + io(data, work, workers) + " --truth " + q(data / "truth.json"));
    ASSERT_EQ(r.code, 0) << r.output;
  }

  fs::path root_;
};

}  // namespace

TEST_F(Cli, PipelineWritesEveryArtifact) {
  const auto data = make_data("data");
  const auto work = root_ / "work";
  pipeline(data, work);
  for (const char* f : {"representatives.json", "verification/report.json", "analysis.json", "ranking.csv",
                        "dont_use.txt", "verdicts.csv", "eval/planted.json", "eval/beta.json", "eval/verdicts.csv"}) {
    EXPECT_TRUE(fs::exists(work / f)) << f;
  }
  EXPECT_EQ(std::distance(fs::directory_iterator(work / "vias"), fs::directory_iterator{}), 96);
  EXPECT_FALSE(fs::exists(work / "extract_errors.csv"));
  EXPECT_FALSE(fs::is_empty(work / "verification/overlays"));
  // Threshold 0 lists the identical planted pair.
  EXPECT_EQ(read(work / "dont_use.txt"), "T00\nT04\n");
  const auto planted = Json::parse(read(work / "eval/planted.json"));
  EXPECT_EQ(planted["planted"], 1);
  EXPECT_EQ(planted["true_positives"], 1);
  const auto report = Json::parse(read(work / "verification/report.json"));
  for (const auto& [type, entry] : report.items()) EXPECT_TRUE(entry["pass"].get<bool>()) << type;
}

TEST_F(Cli, RerunsLeaveOutputsUntouched) {
  const auto data = make_data("data");
  const auto work = root_ / "work";
  pipeline(data, work);
  const auto before = snapshot(root_);
  EXPECT_EQ(run("gen-synthetic --out " + q(data) + " --seed 3 --types 8").code, 0);
  pipeline(data, work);
  const auto after = snapshot(root_);
  EXPECT_EQ(before.bytes, after.bytes);
  EXPECT_EQ(before.times, after.times);
}

TEST_F(Cli, WorkerCountDoesNotChangeOutputs) {
  const auto data = make_data("data");
  pipeline(data, root_ / "w1", 1);
  pipeline(data, root_ / "w6", 6);
  EXPECT_EQ(snapshot(root_ / "w1").bytes, snapshot(root_ / "w6").bytes);
}

TEST_F(Cli, CorruptTileFailsOnlyItsInstances) {
  const auto data = make_data("data");
  const auto manifest = Json::parse(read(data / "manifest.json"));
  const std::string tile_id = manifest["tiles"][1]["tile_id"];
  std::ofstream(data / manifest["tiles"][1]["image_path"].get<std::string>()) << "garbage";
  const auto work = root_ / "work";
  const auto r = run("extract" + io(data, work));
  EXPECT_EQ(r.code, 2) << r.output;
  const std::string errors = read(work / "extract_errors.csv");
  std::size_t on_tile = 0;
  for (const auto& inst : manifest["instances"]) {
    const std::string id = inst["instance_id"];
    const bool bad = inst["tile_id"] == tile_id;
    on_tile += bad ? 1 : 0;
    EXPECT_EQ(errors.find("\n" + id + ",") != std::string::npos, bad) << id;
    EXPECT_EQ(fs::exists(work / "vias" / (id + ".csv")), !bad) << id;
  }
  EXPECT_GT(on_tile, 0u);
}

TEST_F(Cli, TypeWithOneInstanceIsNamed) {
  const auto data = make_data("data");
  auto manifest = Json::parse(read(data / "manifest.json"));
  Json kept = Json::array();
  bool seen = false;
  for (const auto& inst : manifest["instances"]) {
    if (inst["type_id"] == "T03") {
      if (seen) continue;
      seen = true;
    }
    kept.push_back(inst);
  }
  manifest["instances"] = kept;
  std::ofstream(data / "manifest.json") << manifest.dump(2);
  const auto work = root_ / "work";
  ASSERT_EQ(run("extract" + io(data, work)).code, 0);
  const auto r = run("build-reps" + io(data, work));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("T03"), std::string::npos) << r.output;
}

TEST_F(Cli, RejectsAreRebuiltOnceAtAStricterMajority) {
  const auto data = make_data("data");
  const auto work = root_ / "work";
  ASSERT_EQ(run("extract" + io(data, work)).code, 0);
  ASSERT_EQ(run("build-reps" + io(data, work)).code, 0);
  std::ofstream(root_ / "rejects.txt") << "# reviewed by hand\nT01\n";
  const std::string args = "verify-reps" + io(data, work) + " --rejects " + q(root_ / "rejects.txt");
  auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.output;
  auto reps = Json::parse(read(work / "representatives.json"));
  EXPECT_EQ(reps["T01"]["build_meta"]["attempt"], 1);
  EXPECT_DOUBLE_EQ(reps["T01"]["build_meta"]["majority_threshold"].get<double>(), 0.6);
  EXPECT_EQ(reps["T02"]["build_meta"]["attempt"], 0);
  const auto report = Json::parse(read(work / "verification/report.json"));
  EXPECT_DOUBLE_EQ(report["T01"]["majority_threshold"].get<double>(), 0.6);

  const std::string before = read(work / "representatives.json");
  r = run(args);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("already applied"), std::string::npos) << r.output;
  EXPECT_EQ(read(work / "representatives.json"), before);

  std::ofstream(root_ / "bad.txt") << "NOPE\n";
  EXPECT_EQ(run("verify-reps" + io(data, work) + " --rejects " + q(root_ / "bad.txt")).code, 2);
}

TEST_F(Cli, EvalWithoutSwapsReportsUndefinedRate) {
  const auto data = make_data("data", " --planted 0:4:0");
  const auto work = root_ / "work";
  ASSERT_EQ(run("extract" + io(data, work)).code, 0);
  ASSERT_EQ(run("build-reps" + io(data, work)).code, 0);
  const auto r = run("eval" + io(data, work) + " --truth " + q(data / "truth.json"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("FN rate undefined"), std::string::npos) << r.output;
  EXPECT_EQ(run("eval" + io(data, work)).code, 1);
}

TEST_F(Cli, DontUseIsEmptyWithoutIdenticalPairs) {
  const auto data = make_data("data", "");
  const auto work = root_ / "work";
  ASSERT_EQ(run("extract" + io(data, work)).code, 0);
  ASSERT_EQ(run("build-reps" + io(data, work)).code, 0);
  ASSERT_EQ(run("dont-use" + io(data, work)).code, 0);
  EXPECT_EQ(read(work / "dont_use.txt"), "");
  EXPECT_EQ(run("dont-use" + io(data, work) + " --force --threshold 1").code, 0);
  EXPECT_EQ(read(work / "dont_use.txt").substr(0, 4), "T00\n");
  EXPECT_EQ(run("dont-use" + io(data, work) + " --threshold 2").code, 1);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  const auto data = make_data("data");
  const auto work = root_ / "work";
  ASSERT_EQ(run("extract" + io(data, work)).code, 0);
  ASSERT_EQ(run("build-reps" + io(data, work)).code, 0);
  std::ofstream(root_ / "run.toml") << "tie-policy = \"benign\"\ndelta = 0.05\n";
  auto r = run("detect" + io(data, work) + " --config " + q(root_ / "run.toml"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("TreatAsBenign"), std::string::npos) << r.output;
  r = run("detect" + io(data, work) + " --config " + q(root_ / "run.toml") + " --tie-policy flag");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("FlagAsPositive"), std::string::npos) << r.output;

  std::ofstream(root_ / "typo.toml") << "tie-polcy = \"benign\"\n";
  EXPECT_EQ(run("detect" + io(data, work) + " --config " + q(root_ / "typo.toml")).code, 1);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("extract --manifest " + q(root_ / "missing.json") + " --out " + q(root_ / "w")).code, 1);
  EXPECT_EQ(run("extract --workers 0 --manifest x").code, 1);
  EXPECT_EQ(run("detect --tie-policy sometimes").code, 1);
  EXPECT_EQ(run("gen-synthetic --out " + q(root_ / "g") + " --planted 0:4").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
}
