#include "attiq/h2_synthesis.hpp"
#include "attiq/json_io.hpp"
#include "attiq/sensor_sim.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>
#include <sys/wait.h>

using namespace attiq;
namespace fs = std::filesystem;

namespace {

struct Output {
  int code = -1;
  std::string text;
};

Output attiq_cli(const std::string& args) {
  const std::string cmd = std::string(ATTIQ_CLI_PATH) + " " + args + " 2>&1";
  Output out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return out;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) out.text += buf.data();
  const int status = ::pclose(pipe);
  out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hash_line(const std::string& text) {
  std::smatch m;
  return std::regex_search(text, m, std::regex("sha256 ([0-9a-f]{64})")) ? m[1].str() : "";
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("attiq-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

const std::string& gains_path() {
  static const std::string p = [] {
    const fs::path f = fs::temp_directory_path() / "attiq-cli-shared-gains.json";
    attiq_cli("synth --out " + f.string());
    return f.string();
  }();
  return p;
}

}  // namespace

TEST_F(Cli, GenIsDeterministic) {
  const Output a = attiq_cli("gen --case I --seed 7 --out " + path("a"));
  const Output b = attiq_cli("gen --case I --seed 7 --out " + path("b"));
  ASSERT_EQ(a.code, 0) << a.text;
  ASSERT_EQ(b.code, 0) << b.text;
  EXPECT_NE(a.text.find("7500 rows"), std::string::npos) << a.text;
  EXPECT_FALSE(hash_line(a.text).empty());
  EXPECT_EQ(hash_line(a.text), hash_line(b.text));
  EXPECT_NE(hash_line(a.text), hash_line(attiq_cli("gen --case I --seed 8 --out " + path("c")).text));
}

TEST_F(Cli, GenCaseIIIPitchesPastNinety) {
  const Output o = attiq_cli("gen --case III --out " + path("d.csv"));
  ASSERT_EQ(o.code, 0) << o.text;
  const Dataset d = read_dataset(path("d.csv"));
  double peak = 0.0;
  for (const TruthState& s : d.truth) peak = std::max(peak, std::abs(rad2deg(pitch_sweep_angle(s.q))));
  EXPECT_GT(peak, 90.0);
  EXPECT_TRUE(fs::exists(path("d.json")));
}

TEST_F(Cli, GenRejectsZeroRate) {
  const Output o = attiq_cli("gen --case I --rate 0 --out " + path("x"));
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.text.find("sample_rate"), std::string::npos) << o.text;
}

TEST_F(Cli, GenReportsUnknownConfigKey) {
  std::ofstream(path("cfg.json")) << R"({"case": "II", "sead": 3})";
  const Output o = attiq_cli("gen --config " + path("cfg.json") + " --out " + path("x"));
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.text.find("'sead'"), std::string::npos) << o.text;
}

TEST_F(Cli, SynthPrintsResidualsAndIsReproducible) {
  const Output a = attiq_cli("synth --out " + path("g1.json"));
  ASSERT_EQ(a.code, 0) << a.text;
  const Output b = attiq_cli("synth --out " + path("g2.json"));
  ASSERT_EQ(b.code, 0) << b.text;
  EXPECT_EQ(slurp(path("g1.json")), slurp(path("g2.json")));
  const GainSchedule s = read_gain_file(path("g1.json"));
  int rows = 0;
  std::istringstream lines(a.text);
  for (std::string line; std::getline(lines, line);) {
    std::istringstream ls(line);
    int octant;
    double gamma, norm, diff, res;
    if (ls >> octant >> gamma >> norm >> diff >> res) {
      ++rows;
      EXPECT_LT(diff, 1e-3);
      EXPECT_LT(res, 1e-3);
      const LinearErrorPlant p = build_plant(octant, s.noise, s.reference.gravity, s.reference.magnetic);
      EXPECT_LT(max_real_eigenvalue(p.a + s.gain(octant) * p.cy), 0.0);
    }
  }
  EXPECT_EQ(rows, 8);
}

TEST_F(Cli, SynthRejectsParallelReferences) {
  std::ofstream(path("syn.json")) << R"({"gravity": [0, 0, 9.81], "magnetic_field": [0, 0, 40]})";
  const Output o = attiq_cli("synth --config " + path("syn.json") + " --out " + path("g.json"));
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.text.find("parallel"), std::string::npos) << o.text;
  EXPECT_NE(o.text.find("octant 1"), std::string::npos) << o.text;
}

TEST_F(Cli, RunCaseIIIBothFilters) {
  const Output o = attiq_cli("run --case III --gains " + gains_path() + " --out " + path("out"));
  ASSERT_EQ(o.code, 0) << o.text;
  EXPECT_NE(o.text.find("Pitch angle(deg)"), std::string::npos);
  const nlohmann::json j = load_json_file(path("out/report.json"));
  ASSERT_EQ(j["filters"].size(), 2u);
  for (const auto& f : j["filters"]) EXPECT_TRUE(f["rms_deg"]["pitch"].is_number());
  EXPECT_TRUE(j["timing_ratio_ekf_over_h2"].is_number());
}

TEST_F(Cli, RunRepetitionsCountSteps) {
  const Output o = attiq_cli("run --case II --reps 5 --gains " + gains_path() + " --out " + path("out"));
  ASSERT_EQ(o.code, 0) << o.text;
  const nlohmann::json j = load_json_file(path("out/report.json"));
  for (const auto& f : j["filters"]) EXPECT_EQ(f["step_time_ns"]["samples"], 5 * (1500 - 1));
}

TEST_F(Cli, RunEkfOnly) {
  const Output o = attiq_cli("run --case I --filters ekf --out " + path("out"));
  ASSERT_EQ(o.code, 0) << o.text;
  const nlohmann::json j = load_json_file(path("out/report.json"));
  ASSERT_EQ(j["filters"].size(), 1u);
  EXPECT_EQ(j["filters"][0]["filter"], "ekf");
  EXPECT_TRUE(j["timing_ratio_ekf_over_h2"].is_null());
}

TEST_F(Cli, RunFromDatasetWithParallel) {
  ASSERT_EQ(attiq_cli("gen --case II --seed 3 --out " + path("d.csv")).code, 0);
  const Output o = attiq_cli("run --dataset " + path("d.csv") + " --parallel --gains " + gains_path() + " --out " + path("out"));
  ASSERT_EQ(o.code, 0) << o.text;
  EXPECT_EQ(load_json_file(path("out/report.json"))["seed"], 3);
}

TEST_F(Cli, RunRejectsGainVersionMismatch) {
  std::string text = slurp(gains_path());
  text.replace(text.find("\"version\": 1"), 12, "\"version\": 2");
  std::ofstream(path("g.json")) << text;
  const Output o = attiq_cli("run --case II --gains " + path("g.json") + " --out " + path("out"));
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.text.find("version"), std::string::npos) << o.text;
}

TEST_F(Cli, RunRequiresGainsForH2) {
  const Output o = attiq_cli("run --case II --out " + path("out"));
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.text.find("--gains"), std::string::npos) << o.text;
}

TEST_F(Cli, VerifyCaseFilter) {
  const Output o = attiq_cli("verify --case III");
  EXPECT_NE(o.text.find("] 1. "), std::string::npos) << o.text;
  EXPECT_NE(o.text.find("] 6. "), std::string::npos) << o.text;
  for (const char* other : {"] 2. ", "] 3. ", "] 4. ", "] 5. ", "] 7. ", "] 8. "})
    EXPECT_EQ(o.text.find(other), std::string::npos) << other;
  EXPECT_NE(o.text.find("of 2 criteria passed"), std::string::npos);
}

TEST_F(Cli, VerifyCorruptedGainFile) {
  std::ofstream(path("g.json")) << "{ not json";
  const Output o = attiq_cli("verify --gains " + path("g.json"));
  EXPECT_NE(o.code, 0);
  EXPECT_NE(o.text.find("gain file"), std::string::npos) << o.text;
}

TEST_F(Cli, UnknownSubcommandFails) { EXPECT_NE(attiq_cli("frobnicate").code, 0); }
