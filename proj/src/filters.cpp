#include "attiq/filters.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "attiq/json_io.hpp"

namespace attiq {

FilterState predict(const FilterState& state, const Vec3& w_m, double dt) {
  return {integrate_constant_rate(state.q_hat, w_m - state.b_hat, dt), state.b_hat};
}

Vec6 predict_measurement(const FilterState& state, const Vec3& g, const Vec3& h) {
  const Dcm c = dcm_of(state.q_hat);
  Vec6 y;
  y << c * g, c * h;
  return y;
}

namespace {

// Decides between 0 and pi for an angle given its cosine and sine (up to a
// common positive factor).
bool near_pi(double c, double s, std::optional<bool> previous) {
  const double r = std::hypot(c, s);
  if (r == 0.0) return previous.value_or(false);
  const double band = std::sin(kOctantHysteresis) * r;
  if (!previous) return c < 0.0;
  return *previous ? c < band : c < -band;
}

}  // namespace

int select_octant(const Quaternion& q, std::optional<int> previous) {
  const Dcm c = dcm_of(q);
  std::optional<bool> prev_roll, prev_pitch, prev_yaw;
  if (previous) {
    const Euler p = linearization_point(*previous);
    prev_roll = p.roll != 0.0;
    prev_pitch = p.pitch != 0.0;
    prev_yaw = p.yaw != 0.0;
  }
  // Z-Y-X: roll = atan2(C12, C22), yaw = atan2(C01, C00), both scaled by
  // cos(pitch) >= 0; pitch = asin(-C02) never leaves [-pi/2, pi/2].
  const bool roll_pi = near_pi(c(2, 2), c(1, 2), prev_roll);
  const double cp = std::hypot(c(0, 0), c(0, 1));
  const bool pitch_pi = near_pi(cp, -c(0, 2), prev_pitch);
  const bool yaw_pi = near_pi(c(0, 0), c(0, 1), prev_yaw);
  return octant_of_triple(roll_pi, pitch_pi, yaw_pi);
}

Mat6 error_dynamics(const Vec3& w_hat) {
  Mat6 f = Mat6::Zero();
  f.topLeftCorner<3, 3>() = -skew(w_hat);
  f.topRightCorner<3, 3>() = -Mat3::Identity();
  return f;
}

Mat6 error_output(const Vec6& y_hat) {
  Mat6 c = Mat6::Zero();
  c.topLeftCorner<3, 3>() = skew(y_hat.head<3>());
  c.bottomLeftCorner<3, 3>() = skew(y_hat.tail<3>());
  return c;
}

FilterState fold_in(const FilterState& state, const ErrorState& err) {
  const Quaternion dq = renormalize(0.5 * err.dtheta);
  return {(dq * state.q_hat).normalized(), state.b_hat + err.dbias};
}

H2UpdateResult h2_update(const FilterState& state, const ErrorState& err, const SensorSample& sample,
                         const Mat6& gain, const Vec3& w_hat, const Vec3& g, const Vec3& h, double dt) {
  Vec6 y;
  y << sample.a_m, sample.m_m;
  if (!y.allFinite()) return {state, err, true};
  const Vec6 y_hat = predict_measurement(state, g, h);
  // x' = F x + L (Cy x - (y - y_hat)); after a reset x = 0 and the
  // correction reduces to L (y_hat - y).
  Vec6 x = err.stacked();
  Vec6 rate = gain * (y_hat - y);
  if (!err.is_zero()) rate += error_dynamics(w_hat) * x + gain * (error_output(y_hat) * x);
  x += dt * rate;
  const ErrorState folded{x.head<3>(), x.tail<3>()};
  return {fold_in(state, folded), ErrorState{}, false};
}

Mat6 ekf_process_noise(const NoiseParams& noise, double dt) {
  Mat6 q = Mat6::Zero();
  q.topLeftCorner<3, 3>().diagonal().setConstant(noise.gyro_noise * noise.gyro_noise * dt * dt);
  q.bottomRightCorner<3, 3>().diagonal().setConstant(noise.bias_walk * noise.bias_walk * dt);
  return q;
}

EkfStepResult ekf_step(const EkfState& state, const Vec3& w_m, const SensorSample& sample, const NoiseParams& noise,
                       const Vec3& g, const Vec3& h, double dt) {
  EkfStepResult out;
  EkfState& s = out.state;
  const Vec3 w_hat = w_m - state.b_hat;
  s.q_hat = integrate_constant_rate(state.q_hat, w_hat, dt);
  s.b_hat = state.b_hat;
  const Mat6 phi = Mat6::Identity() + error_dynamics(w_hat) * dt;
  s.p = phi * state.p * phi.transpose() + ekf_process_noise(noise, dt);

  Vec6 y;
  y << sample.a_m, sample.m_m;
  if (!y.allFinite()) {
    out.skipped = true;
    s.p = 0.5 * (s.p + s.p.transpose()).eval();
    return out;
  }
  const Vec6 y_hat = predict_measurement({s.q_hat, s.b_hat}, g, h);
  const Mat6 hm = error_output(y_hat);
  Mat6 r = Mat6::Zero();
  r.diagonal() << Vec3::Constant(noise.accel_noise * noise.accel_noise),
      Vec3::Constant(noise.mag_noise * noise.mag_noise);
  const Mat6 ph = s.p * hm.transpose();
  const Mat6 sm = hm * ph + r;
  const Eigen::LLT<Mat6> llt(sm);
  if (llt.info() != Eigen::Success) throw FilterError("EKF innovation covariance is singular");
  const Mat6 k = llt.solve(ph.transpose()).transpose();
  const Vec6 dx = k * (y - y_hat);
  const FilterState f = fold_in({s.q_hat, s.b_hat}, {dx.head<3>(), dx.tail<3>()});
  s.q_hat = f.q_hat;
  s.b_hat = f.b_hat;
  const Mat6 ikh = Mat6::Identity() - k * hm;
  s.p = ikh * s.p * ikh.transpose() + k * r * k.transpose();
  s.p = 0.5 * (s.p + s.p.transpose()).eval();
  return out;
}

Quaternion triad(const Vec3& a_body, const Vec3& m_body, const Vec3& g, const Vec3& h) {
  auto frame = [](const Vec3& v1, const Vec3& v2) {
    if (!(v1.cross(v2).norm() > 1e-9 * v1.norm() * v2.norm())) return Mat3(Mat3::Constant(std::numeric_limits<double>::quiet_NaN()));
    const Vec3 t1 = v1.normalized();
    const Vec3 t2 = v1.cross(v2).normalized();
    Mat3 m;
    m << t1, t2, t1.cross(t2);
    return m;
  };
  const Mat3 body = frame(a_body, m_body);
  const Mat3 ref = frame(g, h);
  if (!body.allFinite() || !ref.allFinite())
    throw FilterError("TRIAD needs two finite, non-parallel vector pairs");
  return quat_of_dcm(body * ref.transpose());
}

ExtendedH2Filter::ExtendedH2Filter(const GainSchedule& schedule, FilterState init)
    : schedule_(&schedule), state_(init), octant_(select_octant(init.q_hat)) {
  state_.q_hat = state_.q_hat.normalized();
}

bool ExtendedH2Filter::step(const Vec3& w_m, const SensorSample& sample, double dt) {
  const Vec3 w_hat = w_m - state_.b_hat;
  state_ = predict(state_, w_m, dt);
  octant_ = select_octant(state_.q_hat, octant_);
  const H2UpdateResult r = h2_update(state_, err_, sample, schedule_->gain(octant_), w_hat,
                                     schedule_->reference.gravity, schedule_->reference.magnetic, dt);
  state_ = r.state;
  err_ = r.err;
  return !r.skipped;
}

MultiplicativeEkf::MultiplicativeEkf(const NoiseParams& tuning, const ReferenceVectors& ref, FilterState init,
                                     const Mat6& p0)
    : noise_(tuning), ref_(ref), s_{init.q_hat.normalized(), init.b_hat, p0} {}

bool MultiplicativeEkf::step(const Vec3& w_m, const SensorSample& sample, double dt) {
  EkfStepResult r = ekf_step(s_, w_m, sample, noise_, ref_.gravity, ref_.magnetic, dt);
  s_ = r.state;
  return !r.skipped;
}

std::string_view to_string(FilterKind k) { return k == FilterKind::ExtendedH2 ? "extended_h2" : "ekf"; }

FilterKind parse_filter_kind(std::string_view s) {
  if (s == "extended_h2" || s == "h2") return FilterKind::ExtendedH2;
  if (s == "ekf") return FilterKind::Ekf;
  throw std::invalid_argument("unknown filter '" + std::string(s) + "' (expected extended_h2 or ekf)");
}

Vec3 attitude_error(const Quaternion& q_true, const Quaternion& q_hat) {
  const Quaternion dq = (q_true * quat_inverse(q_hat)).normalized();
  const double s = dq.vec().norm();
  if (s == 0.0) return Vec3::Zero();
  return dq.vec() * (2.0 * std::atan2(s, dq.scalar()) / s);
}

bool ScenarioResult::operator==(const ScenarioResult& o) const {
  if (kind != o.kind || trace.size() != o.trace.size()) return false;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceRow& a = trace[i];
    const TraceRow& b = o.trace[i];
    if (a.t != b.t || a.err_deg != b.err_deg || a.err_total_deg != b.err_total_deg || a.bias_err != b.bias_err ||
        a.skipped != b.skipped)
      return false;
  }
  return rms_deg == o.rms_deg && rms_total_deg == o.rms_total_deg && max_error_deg == o.max_error_deg &&
         max_norm_deviation == o.max_norm_deviation && skipped_steps == o.skipped_steps && finite == o.finite &&
         final_state.q_hat == o.final_state.q_hat && final_state.b_hat == o.final_state.b_hat;
}

void summarize(ScenarioResult& r) {
  const std::size_t n = r.trace.size();
  r.rms_deg.setZero();
  r.rms_total_deg = 0.0;
  r.max_error_deg = 0.0;
  r.skipped_steps = 0;
  if (n == 0) return;
  std::vector<double> times;
  times.reserve(n);
  for (const TraceRow& row : r.trace) {
    r.rms_deg += row.err_deg.cwiseAbs2();
    r.rms_total_deg += row.err_total_deg * row.err_total_deg;
    r.max_error_deg = std::max(r.max_error_deg, std::isfinite(row.err_total_deg) ? row.err_total_deg : INFINITY);
    if (row.skipped) ++r.skipped_steps;
    if (row.step_time_ns > 0.0) times.push_back(row.step_time_ns);
  }
  r.rms_deg = (r.rms_deg / static_cast<double>(n)).cwiseSqrt();
  r.rms_total_deg = std::sqrt(r.rms_total_deg / static_cast<double>(n));
  r.finite = std::isfinite(r.rms_total_deg) && r.rms_deg.allFinite();
  r.mean_step_ns = r.median_step_ns = r.std_step_ns = 0.0;
  if (!times.empty()) {
    const double m = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
    double v = 0.0;
    for (double t : times) v += (t - m) * (t - m);
    r.mean_step_ns = m;
    r.std_step_ns = times.size() > 1 ? std::sqrt(v / static_cast<double>(times.size() - 1)) : 0.0;
    auto mid = times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2);
    std::nth_element(times.begin(), mid, times.end());
    r.median_step_ns = *mid;
    if (times.size() % 2 == 0) r.median_step_ns = 0.5 * (r.median_step_ns + *std::max_element(times.begin(), mid));
  }
}

namespace {

using Clock = std::chrono::steady_clock;

TraceRow row_at(const TruthState& truth, const FilterState& est) {
  TraceRow row;
  row.t = truth.t;
  const Vec3 e = attitude_error(truth.q, est.q_hat);
  row.err_deg = e * rad2deg(1.0);
  row.err_total_deg = rad2deg(angular_distance(truth.q, est.q_hat));
  row.bias_err = truth.b - est.b_hat;
  return row;
}

template <typename Filter>
ScenarioResult run_loop(const Dataset& data, Filter& filter, FilterKind kind) {
  ScenarioResult res;
  res.kind = kind;
  const std::size_t n = data.samples.size();
  res.trace.reserve(n);
  const double dt = data.config.dt();
  auto track_norm = [&](const FilterState& s) {
    res.max_norm_deviation = std::max(res.max_norm_deviation, std::abs(s.q_hat.norm() - 1.0));
  };
  FilterState s = filter.state();
  track_norm(s);
  res.trace.push_back(row_at(data.truth[0], s));
  for (std::size_t k = 1; k < n; ++k) {
    const auto t0 = Clock::now();
    const bool ok = filter.step(data.samples[k - 1].w_m, data.samples[k], dt);
    const auto t1 = Clock::now();
    s = filter.state();
    track_norm(s);
    TraceRow row = row_at(data.truth[k], s);
    row.step_time_ns = static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    row.skipped = !ok;
    res.trace.push_back(row);
  }
  res.final_state = s;
  summarize(res);
  return res;
}

}  // namespace

ScenarioResult run_filter(const Dataset& data, const RunOptions& opt) {
  if (data.samples.empty() || data.samples.size() != data.truth.size())
    throw FilterError("dataset is empty or truth and samples differ in length");
  const ReferenceVectors& ref = data.config.reference;
  FilterState init;
  if (opt.init) {
    init = *opt.init;
  } else {
    init.q_hat = triad(data.samples[0].a_m, data.samples[0].m_m, ref.gravity, ref.magnetic);
  }
  if (opt.kind == FilterKind::ExtendedH2) {
    if (!opt.schedule) throw FilterError("extended H2 filter needs a gain schedule");
    if (!(opt.schedule->reference == ref))
      throw FilterError("gain schedule was synthesized for different reference vectors");
    ExtendedH2Filter f(*opt.schedule, init);
    return run_loop(data, f, opt.kind);
  }
  MultiplicativeEkf f(opt.ekf_tuning, ref, init, opt.ekf_p0);
  return run_loop(data, f, opt.kind);
}

void write_trace(const ScenarioResult& r, const std::filesystem::path& csv) {
  std::ofstream out(csv, std::ios::binary | std::ios::trunc);
  if (!out) throw FilterError("cannot open " + csv.string() + " for writing");
  out << kTraceHeader << '\n';
  for (const TraceRow& row : r.trace)
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.0f}\n", row.t,
                       row.err_deg.x(), row.err_deg.y(), row.err_deg.z(), row.err_total_deg, row.bias_err.x(),
                       row.bias_err.y(), row.bias_err.z(), row.step_time_ns);
  if (!out) throw FilterError("write failed: " + csv.string());
}

void write_summary(const ScenarioResult& r, const ScenarioConfig& cfg, const std::filesystem::path& path) {
  nlohmann::json j;
  j["filter"] = std::string(to_string(r.kind));
  j["rms_deg"] = {{"roll", r.rms_deg.x()}, {"pitch", r.rms_deg.y()}, {"yaw", r.rms_deg.z()},
                  {"total", r.rms_total_deg}};
  j["max_error_deg"] = r.max_error_deg;
  j["step_time_ns"] = {{"mean", r.mean_step_ns}, {"median", r.median_step_ns}, {"std", r.std_step_ns}};
  j["max_norm_deviation"] = r.max_norm_deviation;
  j["skipped_steps"] = r.skipped_steps;
  j["rows"] = r.trace.size();
  j["config"] = to_json(cfg);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FilterError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace attiq
