#pragma once

// Runtime attitude estimators: the gain-scheduled extended H2 filter and a
// multiplicative EKF baseline. Both carry (q_hat, b_hat) and correct it with a
// multiplicative error quaternion after every measurement.

#include "attiq/attitude.hpp"
#include "attiq/h2_synthesis.hpp"
#include "attiq/sensor_sim.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace attiq {

class FilterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FilterState {
  Quaternion q_hat;
  Vec3 b_hat = Vec3::Zero();  ///< rad/s
};

struct ErrorState {
  Vec3 dtheta = Vec3::Zero();  ///< rad
  Vec3 dbias = Vec3::Zero();   ///< rad/s

  bool is_zero() const { return dtheta.isZero(0.0) && dbias.isZero(0.0); }
  Vec6 stacked() const {
    Vec6 v;
    v << dtheta, dbias;
    return v;
  }
};

struct EkfState {
  Quaternion q_hat;
  Vec3 b_hat = Vec3::Zero();
  Mat6 p = Mat6::Identity();
};

/// q_hat <- exp(1/2 Omega(w_m - b_hat) dt) q_hat; b_hat unchanged.
FilterState predict(const FilterState& state, const Vec3& w_m, double dt);

/// (C(q_hat) g; C(q_hat) h).
Vec6 predict_measurement(const FilterState& state, const Vec3& g, const Vec3& h);

/// Hysteresis half-width (rad) around the +-pi/2 octant boundaries.
inline constexpr double kOctantHysteresis = 0.05;

/// Octant (1..8) of the nearest linearization attitude, deciding each Z-Y-X
/// Euler angle between 0 and pi. With a previous octant, an angle must cross
/// its boundary by kOctantHysteresis before its choice flips.
int select_octant(const Quaternion& q, std::optional<int> previous = std::nullopt);

/// Error-state dynamics F at the current rate estimate.
Mat6 error_dynamics(const Vec3& w_hat);

/// Error-state output matrix at the estimate: ([y_a x], 0; [y_m x], 0).
Mat6 error_output(const Vec6& y_hat);

struct H2UpdateResult {
  FilterState state;
  ErrorState err;  ///< zero after the fold-in
  bool skipped = false;
};

/// One correction of the error state with the octant's gain, fold-in into
/// (q_hat, b_hat) and reset. A non-finite measurement skips the step.
H2UpdateResult h2_update(const FilterState& state, const ErrorState& err, const SensorSample& sample,
                         const Mat6& gain, const Vec3& w_hat, const Vec3& g, const Vec3& h, double dt);

/// Folds the error estimate into the state: q <- dq(dtheta) (x) q, b += db.
FilterState fold_in(const FilterState& state, const ErrorState& err);

/// Discrete process noise for one step: diag(n_w^2 dt^2 I, n_b^2 dt I).
Mat6 ekf_process_noise(const NoiseParams& noise, double dt);

struct EkfStepResult {
  EkfState state;
  bool skipped = false;
};

/// Propagation with the gyro sample, then the multiplicative measurement
/// update with a Joseph-form covariance. Throws FilterError if the innovation
/// covariance is singular.
EkfStepResult ekf_step(const EkfState& state, const Vec3& w_m, const SensorSample& sample, const NoiseParams& noise,
                       const Vec3& g, const Vec3& h, double dt);

/// Attitude from one accelerometer/magnetometer pair.
Quaternion triad(const Vec3& a_body, const Vec3& m_body, const Vec3& g, const Vec3& h);

inline Mat6 default_ekf_covariance() {
  Mat6 p = Mat6::Zero();
  p.topLeftCorner<3, 3>() = 0.1 * 0.1 * Mat3::Identity();
  p.bottomRightCorner<3, 3>() = 0.01 * 0.01 * Mat3::Identity();
  return p;
}

class ExtendedH2Filter {
 public:
  ExtendedH2Filter(const GainSchedule& schedule, FilterState init);

  /// Propagate with the gyro sample of the previous instant, then correct with
  /// the current accelerometer/magnetometer sample. Returns false when the
  /// correction was skipped.
  bool step(const Vec3& w_m, const SensorSample& sample, double dt);

  const FilterState& state() const { return state_; }
  const ErrorState& error_state() const { return err_; }
  int octant() const { return octant_; }

 private:
  const GainSchedule* schedule_;
  FilterState state_;
  ErrorState err_;
  int octant_;
};

class MultiplicativeEkf {
 public:
  MultiplicativeEkf(const NoiseParams& tuning, const ReferenceVectors& ref, FilterState init,
                    const Mat6& p0 = default_ekf_covariance());

  bool step(const Vec3& w_m, const SensorSample& sample, double dt);

  FilterState state() const { return {s_.q_hat, s_.b_hat}; }
  const Mat6& covariance() const { return s_.p; }

 private:
  NoiseParams noise_;
  ReferenceVectors ref_;
  EkfState s_;
};

enum class FilterKind { ExtendedH2, Ekf };

std::string_view to_string(FilterKind k);
/// "extended_h2" | "h2" | "ekf"
FilterKind parse_filter_kind(std::string_view s);

struct TraceRow {
  double t = 0.0;
  Vec3 err_deg = Vec3::Zero();  ///< body-frame error angle components
  double err_total_deg = 0.0;
  Vec3 bias_err = Vec3::Zero();  ///< b_true - b_hat, rad/s
  double step_time_ns = 0.0;
  bool skipped = false;
};

struct RunOptions {
  FilterKind kind = FilterKind::ExtendedH2;
  const GainSchedule* schedule = nullptr;  ///< required for ExtendedH2
  NoiseParams ekf_tuning = NoiseParams::mpu9250();
  Mat6 ekf_p0 = default_ekf_covariance();
  /// Initial estimate; TRIAD on the first sample with b_hat = 0 if empty.
  std::optional<FilterState> init;
};

struct ScenarioResult {
  FilterKind kind = FilterKind::ExtendedH2;
  std::vector<TraceRow> trace;
  Vec3 rms_deg = Vec3::Zero();
  double rms_total_deg = 0.0;
  double max_error_deg = 0.0;
  double mean_step_ns = 0.0;
  double median_step_ns = 0.0;
  double std_step_ns = 0.0;
  double max_norm_deviation = 0.0;
  int skipped_steps = 0;
  bool finite = true;
  FilterState final_state;

  bool operator==(const ScenarioResult&) const;
};

/// Error angle dtheta with q_true = dq(dtheta) (x) q_hat, sign-invariant.
Vec3 attitude_error(const Quaternion& q_true, const Quaternion& q_hat);

ScenarioResult run_filter(const Dataset& data, const RunOptions& options);

/// Statistics over the rows (RMS, timing); used after concatenating runs.
void summarize(ScenarioResult& result);

inline constexpr const char* kTraceHeader =
    "t,err_roll_deg,err_pitch_deg,err_yaw_deg,err_total_deg,bias_err_x,bias_err_y,bias_err_z,step_time_ns";

void write_trace(const ScenarioResult& result, const std::filesystem::path& csv);
/// RMS per axis, timing statistics and the scenario config.
void write_summary(const ScenarioResult& result, const ScenarioConfig& cfg, const std::filesystem::path& json);

}  // namespace attiq
