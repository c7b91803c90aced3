#pragma once

// Ground-truth trajectories and MARG sensor corruption.

#include "attiq/attitude.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace attiq {

/// Sensor noise model. Gyro, accelerometer and magnetometer stds are per
/// sample; the bias random walk is a density (rad/s/sqrt(s)).
struct NoiseParams {
  double gyro_noise = 0.0;   ///< n_w, rad/s
  double bias_walk = 0.0;    ///< n_b, rad/s/sqrt(s)
  double accel_noise = 0.0;  ///< n_a, m/s^2
  double mag_noise = 0.0;    ///< n_m, uT
  Vec3 initial_bias = Vec3::Zero();  ///< b0, rad/s

  /// MPU-9250-class defaults at the given sample rate.
  static NoiseParams mpu9250(double sample_rate_hz = 150.0);
  static NoiseParams none() { return {}; }

  /// Same densities, zero initial bias.
  NoiseParams without_bias() const {
    NoiseParams n = *this;
    n.initial_bias.setZero();
    return n;
  }

  /// Throws std::invalid_argument on negative or non-finite fields.
  void validate() const;

  bool operator==(const NoiseParams&) const = default;
};

struct ReferenceVectors {
  Vec3 gravity{0.0, 0.0, 9.81};       ///< inertial (NED) gravity, m/s^2
  Vec3 magnetic{22.5, 1.5, 42.0};     ///< inertial magnetic field, uT

  bool operator==(const ReferenceVectors&) const = default;
};

/// The paper's four cases plus a level, motionless truth used for
/// convergence checks.
enum class CaseId { I, II, III, IV, Static };

std::string_view to_string(CaseId id);
/// Accepts "I".."IV" (case-insensitive), "1".."4" and "static".
CaseId parse_case_id(std::string_view s);

struct ScenarioConfig {
  CaseId case_id = CaseId::I;
  double duration = 50.0;      ///< s
  double sample_rate = 150.0;  ///< Hz
  double angular_rate = 0.0;   ///< rad/s, peak per-axis rate of the profile
  std::uint64_t seed = 1;
  NoiseParams noise;
  ReferenceVectors reference;

  /// Case defaults: durations, rates and MPU-9250 noise.
  static ScenarioConfig defaults(CaseId id);

  double dt() const { return 1.0 / sample_rate; }
  std::size_t sample_count() const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const ScenarioConfig&) const = default;
};

struct TruthState {
  double t = 0.0;
  Quaternion q;              ///< true attitude
  Vec3 w = Vec3::Zero();     ///< true body rate, held over [t, t + dt)
  Vec3 b = Vec3::Zero();     ///< true gyro bias
};

struct SensorSample {
  double t = 0.0;
  Vec3 w_m = Vec3::Zero();  ///< rad/s
  Vec3 a_m = Vec3::Zero();  ///< m/s^2
  Vec3 m_m = Vec3::Zero();  ///< uT
};

/// Portable seeded generator. Each channel is an independent mt19937_64
/// stream seeded through SplitMix64 from (seed, channel); normals come from
/// Box-Muller so sequences do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  enum class Channel : std::uint64_t { BiasWalk = 1, Gyro = 2, Accel = 3, Mag = 4, Setup = 5 };

  Rng(std::uint64_t seed, Channel channel);

  /// Uniform in (0, 1).
  double uniform();
  double normal();
  Vec3 normal3() { return {normal(), normal(), normal()}; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Independent per-channel streams for the three sensors.
struct MeasurementRng {
  explicit MeasurementRng(std::uint64_t seed)
      : gyro(seed, Rng::Channel::Gyro), accel(seed, Rng::Channel::Accel), mag(seed, Rng::Channel::Mag) {}
  Rng gyro;
  Rng accel;
  Rng mag;
};

/// Truth sampled at t_k = k / rate, k = 0..sample_count()-1. The body rate at
/// t_k is held constant over the following step and the attitude is advanced
/// with the exact exponential, so zero-noise gyro data integrates back to the
/// truth to round-off.
std::vector<TruthState> generate_truth(const ScenarioConfig& cfg);

/// Scripted profile of a case: Z-Y-X Euler angles and their rates at time t.
struct ProfilePoint {
  Euler angles;
  Euler rates;
};
ProfilePoint scenario_profile(const ScenarioConfig& cfg, double t);

/// Body rate the truth generator holds over [t, t + dt).
Vec3 truth_rate(const ScenarioConfig& cfg, double t);

/// Additive body-frame accelerometer disturbance (external acceleration).
using ExternalAccel = std::function<Vec3(double t)>;

SensorSample measure(const TruthState& truth, const NoiseParams& noise, const ReferenceVectors& ref,
                     MeasurementRng& rng, const Vec3& external_accel = Vec3::Zero());

struct Dataset {
  ScenarioConfig config;
  std::vector<SensorSample> samples;
  std::vector<TruthState> truth;
};

Dataset generate_dataset(const ScenarioConfig& cfg, const ExternalAccel& external_accel = {});

// ---- dataset files --------------------------------------------------------

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, long row = -1)
      : std::runtime_error(row >= 0 ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}
  /// 1-based data row, -1 when not row specific.
  long row() const { return row_; }

 private:
  long row_;
};

inline constexpr std::string_view kDatasetHeader =
    "t,wx_m,wy_m,wz_m,ax_m,ay_m,az_m,mx_m,my_m,mz_m,q1_true,q2_true,q3_true,q4_true,bx_true,by_true,bz_true";

/// Sidecar path for a dataset CSV: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// Writes the CSV (17 significant digits) and the sidecar config JSON.
void write_dataset(const Dataset& data, const std::filesystem::path& csv);

/// Reads a CSV + sidecar pair. Truth body rates are not stored in the CSV;
/// they are re-evaluated from the scripted profile named by the sidecar config.
Dataset read_dataset(const std::filesystem::path& csv);

}  // namespace attiq
