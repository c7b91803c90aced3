#include "attiq/json_io.hpp"
#include "attiq/sensor_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace attiq;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("attiq-test-" + name + "-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  fs::create_directories(p);
  return p;
}

ScenarioConfig short_case(CaseId id, double duration, std::uint64_t seed = 3) {
  ScenarioConfig c = ScenarioConfig::defaults(id);
  c.duration = duration;
  c.seed = seed;
  return c;
}

bool same_samples(const Dataset& a, const Dataset& b) {
  if (a.samples.size() != b.samples.size()) return false;
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    const SensorSample &x = a.samples[k], &y = b.samples[k];
    if (x.t != y.t || x.w_m != y.w_m || x.a_m != y.a_m || x.m_m != y.m_m) return false;
    if (a.truth[k].q != b.truth[k].q || a.truth[k].b != b.truth[k].b || a.truth[k].w != b.truth[k].w) return false;
  }
  return true;
}

}  // namespace

TEST(Truth, CasesStartLevel) {
  for (CaseId id : {CaseId::I, CaseId::II, CaseId::III, CaseId::IV, CaseId::Static}) {
    const auto truth = generate_truth(short_case(id, 1.0));
    EXPECT_EQ(truth.front().q.coeffs(), Quaternion::identity().coeffs()) << to_string(id);
    EXPECT_TRUE(truth.front().w.allFinite()) << to_string(id);
  }
}

TEST(Truth, CaseIIIPitchExceedsNinetyDegrees) {
  const auto truth = generate_truth(ScenarioConfig::defaults(CaseId::III));
  double peak = 0.0;
  for (const TruthState& s : truth) peak = std::max(peak, std::abs(rad2deg(pitch_sweep_angle(s.q))));
  EXPECT_GT(peak, 90.0);
}

TEST(Truth, CaseIExcursionsStayBelowThirtyDegrees) {
  const ScenarioConfig c = ScenarioConfig::defaults(CaseId::I);
  for (double t = 0.0; t < c.duration; t += 0.1) {
    const Euler e = scenario_profile(c, t).angles;
    EXPECT_LT(std::abs(e.roll), deg2rad(30.0));
    EXPECT_LT(std::abs(e.pitch), deg2rad(30.0));
    EXPECT_LT(std::abs(e.yaw), deg2rad(30.0));
    // one axis at a time
    const int active = (std::abs(e.roll) > 1e-12) + (std::abs(e.pitch) > 1e-12) + (std::abs(e.yaw) > 1e-12);
    EXPECT_LE(active, 1) << "t=" << t;
  }
}

TEST(Truth, CaseIIExcursionsExceedThirtyDegreesOnEveryAxis) {
  const ScenarioConfig c = ScenarioConfig::defaults(CaseId::II);
  Vec3 peak = Vec3::Zero();
  for (double t = 0.0; t < c.duration; t += 0.01) {
    const Euler e = scenario_profile(c, t).angles;
    peak = peak.cwiseMax(Vec3(std::abs(e.roll), std::abs(e.pitch), std::abs(e.yaw)));
  }
  EXPECT_GT(peak.minCoeff(), deg2rad(30.0));
}

TEST(Truth, StaticCaseDoesNotMove) {
  const auto truth = generate_truth(short_case(CaseId::Static, 2.0));
  for (const TruthState& s : truth) EXPECT_EQ(s.q.coeffs(), Quaternion::identity().coeffs());
}

TEST(Truth, ZeroBiasWalkKeepsInitialBias) {
  ScenarioConfig c = short_case(CaseId::II, 2.0);
  c.noise.bias_walk = 0.0;
  for (const TruthState& s : generate_truth(c)) EXPECT_EQ(s.b, c.noise.initial_bias);
}

TEST(Truth, RejectsBadDurationAndRate) {
  ScenarioConfig c = ScenarioConfig::defaults(CaseId::I);
  c.duration = 0.0;
  EXPECT_THROW(generate_truth(c), std::invalid_argument);
  c = ScenarioConfig::defaults(CaseId::I);
  c.sample_rate = -1.0;
  EXPECT_THROW(generate_truth(c), std::invalid_argument);
}

TEST(Truth, ContinuityBoundedByPeakRate) {
  for (CaseId id : {CaseId::I, CaseId::II, CaseId::III, CaseId::IV}) {
    const ScenarioConfig c = ScenarioConfig::defaults(id);
    const auto truth = generate_truth(c);
    double w_max = 0.0;
    for (const TruthState& s : truth) w_max = std::max(w_max, s.w.norm());
    for (std::size_t k = 1; k < truth.size(); ++k)
      ASSERT_LE(angular_distance(truth[k - 1].q, truth[k].q), w_max * c.dt() + 1e-6) << to_string(id) << " k=" << k;
  }
}

TEST(Measure, NoiselessIdentity) {
  MeasurementRng rng(1);
  TruthState s;
  const ReferenceVectors ref;
  const SensorSample m = measure(s, NoiseParams::none(), ref, rng);
  EXPECT_EQ(m.w_m, Vec3::Zero());
  EXPECT_EQ(m.a_m, ref.gravity);
  EXPECT_EQ(m.m_m, ref.magnetic);
}

TEST(Measure, GyroAddsBias) {
  MeasurementRng rng(1);
  TruthState s;
  s.w = Vec3(0.1, 0, 0);
  s.b = Vec3(0.01, 0, 0);
  const SensorSample m = measure(s, NoiseParams::none(), ReferenceVectors{}, rng);
  EXPECT_NEAR(m.w_m.x(), 0.11, 1e-15);
  EXPECT_EQ(m.w_m.y(), 0.0);
}

TEST(Measure, NoiseStatisticsMatchConfiguredStd) {
  const NoiseParams n = NoiseParams::mpu9250();
  const ReferenceVectors ref;
  MeasurementRng rng(99);
  TruthState s;
  s.q = Quaternion::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7);
  const Dcm c = dcm_of(s.q);
  const int draws = 100000;
  Vec3 mean_a = Vec3::Zero(), sq_a = Vec3::Zero(), sq_w = Vec3::Zero(), sq_m = Vec3::Zero();
  for (int i = 0; i < draws; ++i) {
    const SensorSample m = measure(s, n, ref, rng);
    const Vec3 da = m.a_m - c * ref.gravity;
    mean_a += da;
    sq_a += da.cwiseAbs2();
    sq_w += m.w_m.cwiseAbs2();
    sq_m += (m.m_m - c * ref.magnetic).cwiseAbs2();
  }
  mean_a /= draws;
  for (int k = 0; k < 3; ++k) {
    EXPECT_LT(std::abs(mean_a[k]), 3.0 * n.accel_noise / std::sqrt(draws));
    EXPECT_NEAR(std::sqrt(sq_a[k] / draws), n.accel_noise, 0.05 * n.accel_noise);
    EXPECT_NEAR(std::sqrt(sq_w[k] / draws), n.gyro_noise, 0.05 * n.gyro_noise);
    EXPECT_NEAR(std::sqrt(sq_m[k] / draws), n.mag_noise, 0.05 * n.mag_noise);
  }
}

TEST(Measure, BiasWalkIncrementStd) {
  ScenarioConfig c = short_case(CaseId::Static, 1000.0, 5);
  c.noise.bias_walk = 1e-3;
  const auto truth = generate_truth(c);
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 1; k < truth.size(); ++k, ++n) sq += (truth[k].b - truth[k - 1].b).squaredNorm() / 3.0;
  const double expected = c.noise.bias_walk * std::sqrt(c.dt());
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(n)), expected, 0.05 * expected);
}

TEST(Dataset, CaseIRowCount) {
  EXPECT_EQ(generate_dataset(ScenarioConfig::defaults(CaseId::I)).samples.size(), 7500u);
}

TEST(Dataset, Deterministic) {
  for (CaseId id : {CaseId::I, CaseId::II, CaseId::III, CaseId::IV}) {
    const ScenarioConfig c = short_case(id, 3.0, 77);
    EXPECT_TRUE(same_samples(generate_dataset(c), generate_dataset(c))) << to_string(id);
  }
  ScenarioConfig a = short_case(CaseId::II, 1.0, 1), b = short_case(CaseId::II, 1.0, 2);
  EXPECT_FALSE(same_samples(generate_dataset(a), generate_dataset(b)));
}

TEST(Dataset, RoundTripIsBitwise) {
  const fs::path dir = scratch_dir("roundtrip");
  for (CaseId id : {CaseId::I, CaseId::II, CaseId::III, CaseId::IV, CaseId::Static}) {
    const Dataset d = generate_dataset(short_case(id, 2.0, 11));
    const fs::path csv = dir / ("d_" + std::string(to_string(id)) + ".csv");
    write_dataset(d, csv);
    const Dataset back = read_dataset(csv);
    EXPECT_EQ(back.config, d.config);
    EXPECT_TRUE(same_samples(d, back)) << to_string(id);
  }
  fs::remove_all(dir);
}

TEST(Dataset, RoundTripProperty) {
  const fs::path dir = scratch_dir("roundtrip-prop");
  std::mt19937_64 g(4);
  for (int i = 0; i < 1000; ++i) {
    ScenarioConfig c = ScenarioConfig::defaults(static_cast<CaseId>(i % 4));
    c.seed = g();
    c.duration = 0.05;
    const Dataset d = generate_dataset(c);
    const fs::path csv = dir / "p.csv";
    write_dataset(d, csv);
    ASSERT_TRUE(same_samples(d, read_dataset(csv))) << "instance " << i;
  }
  fs::remove_all(dir);
}

TEST(Dataset, WrongColumnCountNamesRow) {
  const fs::path dir = scratch_dir("badrow");
  const fs::path csv = dir / "bad.csv";
  write_dataset(generate_dataset(short_case(CaseId::I, 0.1)), csv);
  std::ifstream in(csv);
  std::stringstream ss;
  ss << in.rdbuf();
  in.close();
  std::string text = ss.str();
  // Drop the last field of the third data row.
  std::size_t pos = 0;
  for (int line = 0; line < 4; ++line) pos = text.find('\n', pos) + 1;
  const std::size_t end = text.find('\n', pos);
  text.erase(text.rfind(',', end), end - text.rfind(',', end));
  std::ofstream(csv, std::ios::trunc) << text;
  try {
    read_dataset(csv);
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.row(), 4);
  }
  fs::remove_all(dir);
}

TEST(Dataset, MalformedHeaderRejected) {
  const fs::path dir = scratch_dir("badheader");
  const fs::path csv = dir / "bad.csv";
  write_dataset(generate_dataset(short_case(CaseId::I, 0.1)), csv);
  std::ifstream in(csv);
  std::stringstream ss;
  ss << in.rdbuf();
  in.close();
  std::string text = ss.str();
  text.replace(0, 1, "x");
  std::ofstream(csv, std::ios::trunc) << text;
  EXPECT_THROW(read_dataset(csv), DatasetError);
  fs::remove_all(dir);
}

TEST(Config, UnknownKeyNamed) {
  try {
    scenario_from_json(nlohmann::json{{"case", "I"}, {"durration", 5.0}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("durration"), std::string::npos);
  }
}

TEST(Config, ParsesCaseIds) {
  EXPECT_EQ(parse_case_id("iii"), CaseId::III);
  EXPECT_EQ(parse_case_id("4"), CaseId::IV);
  EXPECT_EQ(parse_case_id("static"), CaseId::Static);
  EXPECT_THROW(parse_case_id("V"), std::invalid_argument);
}

TEST(Config, JsonRoundTrip) {
  ScenarioConfig c = short_case(CaseId::III, 4.0, 123);
  c.noise.mag_noise = 0.3;
  EXPECT_EQ(scenario_from_json(to_json(c)), c);
}
