#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crfmm/trajectory_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

Outcome cli(const std::string& args) {
  const std::string cmd = std::string(CRFMM_CLI) + " " + args + " 2>&1";
  Outcome r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kConfig = std::string(CRFMM_SOURCE_DIR) + "/configs/small.json";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("crfmm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string at(const std::string& name) const { return (dir_ / name).string(); }

  // Small generated world shared by the pipeline tests.
  void generate(const std::string& out = "data") {
    const Outcome r = cli("--config " + kConfig + " --seed 7 --out-dir " + at(out) + " gen");
    ASSERT_EQ(r.code, 0) << r.output;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpExitsZero) {
  const Outcome r = cli("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("match"), std::string::npos);
  EXPECT_EQ(cli("match --help").code, 0);
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("gen --no-such-flag").code, 1);
  EXPECT_EQ(cli("--jobs notanumber gen").code, 1);
}

TEST_F(CliTest, MatchRequiresParams) {
  generate();
  const Outcome r = cli("--out-dir " + at("m") + " match --network " + at("data/network.json") + " --trajectories " +
                    at("data/test_trajectories.csv"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("--params"), std::string::npos) << r.output;
}

TEST_F(CliTest, MissingInputNamesThePath) {
  const std::string missing = at("nowhere/network.json");
  const Outcome r = cli("--out-dir " + at("t") + " train --network " + missing + " --trajectories x --labels y --paths z");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find(missing), std::string::npos) << r.output;
}

TEST_F(CliTest, BadConfigIsRejected) {
  std::ofstream(at("bad.json")) << R"({"pipeline": {"alpah": 0.5}})";
  Outcome r = cli("--config " + at("bad.json") + " --out-dir " + at("g") + " gen");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("pipeline.alpah"), std::string::npos) << r.output;

  std::ofstream(at("range.json")) << R"({"pipeline": {"alpha": 2.0}})";
  r = cli("--config " + at("range.json") + " --out-dir " + at("g") + " gen");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("alpha"), std::string::npos) << r.output;
}

TEST_F(CliTest, ManifestRecordsResolvedDefaults) {
  generate();
  const json m = json::parse(slurp(at("data/manifest.json")));
  EXPECT_EQ(m["command"], "gen");
  EXPECT_EQ(m["seed"], 7);
  const json& p = m["resolved"]["pipeline"];
  EXPECT_EQ(p["interval_threshold_s"].get<double>(), 180.0);
  EXPECT_EQ(p["alpha"].get<double>(), 0.7);
  EXPECT_EQ(p["candidate_k"].get<int>(), 6);
  EXPECT_EQ(p["scale_m"].get<double>(), 20.0);
  EXPECT_EQ(p["x_sat"].get<double>(), 50.0);
  EXPECT_EQ(p["preference_mode"], "literal");
  EXPECT_EQ(m["resolved"]["eval"]["zeta"].get<double>(), 0.8);
  EXPECT_EQ(m["resolved"]["world"]["grid_cols"].get<int>(), 8);
}

TEST_F(CliTest, GenIsDeterministicPerSeed) {
  generate("a");
  generate("b");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(at("a"))) {
    const fs::path twin = fs::path(at("b")) / e.path().filename();
    ASSERT_TRUE(fs::exists(twin)) << twin;
    EXPECT_EQ(slurp(e.path()), slurp(twin)) << e.path().filename();
    ++files;
  }
  EXPECT_GE(files, 9u);

  const Outcome r = cli("--config " + kConfig + " --seed 8 --out-dir " + at("c") + " gen");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(slurp(at("a/train_trajectories.csv")), slurp(at("c/train_trajectories.csv")));
}

TEST_F(CliTest, FullPipeline) {
  generate();
  const std::string d = at("data") + "/";
  Outcome r = cli("--config " + kConfig + " --out-dir " + at("model") + " train --network " + d + "network.json" +
              " --trajectories " + d + "train_trajectories.csv --labels " + d + "train_labels.csv --paths " + d +
              "train_paths.csv");
  ASSERT_EQ(r.code, 0) << r.output;
  const json params = json::parse(slurp(at("model/params.json")));
  EXPECT_TRUE(params.contains("lambda1"));

  r = cli("--out-dir " + at("idt") + " build-idt --paths " + d + "train_paths.csv --trajectories " + d +
          "train_trajectories.csv");
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"idt_morning", "idt_evening", "idt_normal"})
    EXPECT_TRUE(fs::exists(at(std::string("idt/") + f))) << f;

  const std::string match_args = " match --network " + d + "network.json --trajectories " + d +
                                 "test_trajectories.csv --params " + at("model/params.json") + " --idt " +
                                 at("idt") + " --interval 300";
  r = cli("--out-dir " + at("match") + match_args);
  ASSERT_EQ(r.code, 0) << r.output;
  const json summary = json::parse(r.output);
  EXPECT_GT(summary["preference"].get<int>(), 0);
  EXPECT_TRUE(summary["errors"].empty());

  // Rerunning into the same directory overwrites with identical bytes.
  const std::string first = slurp(at("match/matches.csv"));
  ASSERT_EQ(cli("--out-dir " + at("match") + match_args).code, 0);
  EXPECT_EQ(slurp(at("match/matches.csv")), first);

  // Matches carry original point indices, so they join against the full labels.
  const auto matches = crfmm::load_labels(at("match/matches.csv"), crfmm::kMatchHeader);
  const auto labels = crfmm::load_labels(d + "test_labels.csv");
  for (const auto& [key, rows] : matches) {
    ASSERT_TRUE(labels.contains(key));
    for (const auto& [idx, seg] : rows) EXPECT_TRUE(labels.at(key).contains(idx));
  }

  r = cli("--out-dir " + at("eval") + " eval --results " + at("match/matches.csv") + " --labels " + d +
          "test_labels.csv --matcher-name rpm --interval 300 --detail");
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream report(slurp(at("eval/report.csv")));
  std::string header, row;
  std::getline(report, header);
  std::getline(report, row);
  EXPECT_EQ(header, "matcher,interval_s,A_s,A_r,n_points,n_paths");
  EXPECT_EQ(row.rfind("rpm,300,", 0), 0u) << row;
  double a_s = -1, a_r = -1;
  ASSERT_EQ(std::sscanf(row.c_str(), "rpm,300,%lf,%lf", &a_s, &a_r), 2);
  EXPECT_GT(a_s, 0.3);
  EXPECT_LE(a_s, 1.0);
  EXPECT_GE(a_r, 0.0);
  EXPECT_LE(a_r, 1.0);
  EXPECT_TRUE(fs::exists(at("eval/detail.csv")));
}

TEST_F(CliTest, OffMapTrajectoryIsReportedAndOthersMatched) {
  generate();
  const std::string d = at("data") + "/";
  ASSERT_EQ(cli("--config " + kConfig + " --out-dir " + at("model") + " train --network " + d + "network.json" +
                " --trajectories " + d + "train_trajectories.csv --labels " + d + "train_labels.csv --paths " + d +
                "train_paths.csv")
                .code,
            0);
  std::string trajs = slurp(d + "test_trajectories.csv");
  trajs += "999,1,100000,100000,0\n999,1,100100,100000,30\n";
  std::ofstream(at("with_bad.csv")) << trajs;
  const Outcome r = cli("--out-dir " + at("match") + " match --network " + d + "network.json --trajectories " +
                    at("with_bad.csv") + " --params " + at("model/params.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const json summary = json::parse(r.output);
  ASSERT_EQ(summary["errors"].size(), 1u);
  EXPECT_EQ(summary["errors"][0]["vehicle_id"], 999);
  EXPECT_NE(summary["errors"][0]["error"].get<std::string>().find("off the map"), std::string::npos);
  EXPECT_GT(summary["pure_crf"].get<int>(), 0);
}

TEST_F(CliTest, SweepFromConfig) {
  const Outcome r = cli("--config " + kConfig + " --out-dir " + at("sweep") + " sweep --intervals 60,300");
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream report(slurp(at("sweep/report.csv")));
  std::string line;
  std::getline(report, line);
  std::size_t rows = 0;
  while (std::getline(report, line)) ++rows;
  EXPECT_EQ(rows, 8u);  // 4 matchers x 2 intervals
}
