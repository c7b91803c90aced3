#include "attiq/sensor_sim.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>

namespace attiq {

namespace {

bool finite3(const Vec3& v) { return v.allFinite(); }

// Quintic smootherstep on [0, 1] and its derivative.
double smoother(double u) { return u * u * u * (u * (6.0 * u - 15.0) + 10.0); }
double smoother_d(double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); }

struct Keyframe {
  double t;  // fraction of the nominal 60 s profile, seconds
  double roll, pitch, yaw;  // degrees
};

// Take-off, three cruise legs with banked heading changes, landing. Times are
// on a 60 s base and rescaled to the configured duration.
constexpr std::array<Keyframe, 22> kFlightProfile{{
    {0.0, 0.0, 0.0, 0.0},
    {4.0, 0.0, 0.0, 0.0},      // spin-up on the pad
    {5.5, 2.5, -3.0, 1.0},     // lift-off transient
    {7.0, -1.5, 1.5, 0.0},
    {8.5, 0.0, 0.0, 0.0},      // climb
    {10.5, 6.0, -4.0, 15.0},   // banked turn to leg 1
    {12.5, 0.0, -8.0, 35.0},
    {20.0, 0.0, -8.0, 35.0},   // cruise leg 1
    {22.0, 9.0, -5.0, 70.0},   // turn to leg 2
    {24.0, 9.0, -5.0, 110.0},
    {26.0, 0.0, -8.0, 140.0},
    {33.0, 0.0, -8.0, 140.0},  // cruise leg 2
    {35.0, 10.0, -5.0, 175.0}, // turn to leg 3
    {37.0, 10.0, -5.0, 210.0},
    {39.0, 0.0, -8.0, 235.0},
    {46.0, 0.0, -8.0, 235.0},  // cruise leg 3
    {48.0, 0.0, 7.0, 235.0},   // flare / brake
    {50.0, 0.0, 0.0, 235.0},   // hover above the landing point
    {53.0, -2.0, 1.5, 233.0},  // descent corrections
    {56.0, 1.5, -1.0, 235.0},
    {58.0, 0.0, 0.0, 235.0},   // touchdown
    {60.0, 0.0, 0.0, 235.0},
}};

ProfilePoint flight_profile(double t, double duration) {
  const double scale = duration / 60.0;
  const double tn = std::clamp(t / scale, 0.0, 60.0);
  std::size_t k = 0;
  while (k + 2 < kFlightProfile.size() && kFlightProfile[k + 1].t <= tn) ++k;
  const Keyframe& a = kFlightProfile[k];
  const Keyframe& b = kFlightProfile[k + 1];
  const double span = b.t - a.t;
  const double u = std::clamp((tn - a.t) / span, 0.0, 1.0);
  const double s = smoother(u);
  const double ds = smoother_d(u) / (span * scale);
  ProfilePoint p;
  p.angles = {deg2rad(a.roll + (b.roll - a.roll) * s), deg2rad(a.pitch + (b.pitch - a.pitch) * s),
              deg2rad(a.yaw + (b.yaw - a.yaw) * s)};
  p.rates = {deg2rad((b.roll - a.roll) * ds), deg2rad((b.pitch - a.pitch) * ds),
             deg2rad((b.yaw - a.yaw) * ds)};
  return p;
}

// Raised-cosine excursion of the given amplitude over one window [0, T).
void raised_cosine(double tau, double window, double amplitude, double& angle, double& rate) {
  const double phase = 2.0 * std::numbers::pi * tau / window;
  angle = 0.5 * amplitude * (1.0 - std::cos(phase));
  rate = 0.5 * amplitude * (2.0 * std::numbers::pi / window) * std::sin(phase);
}

void sine(double t, double amplitude, double peak_rate, double& angle, double& rate) {
  const double omega = peak_rate / amplitude;
  angle = amplitude * std::sin(omega * t);
  rate = amplitude * omega * std::cos(omega * t);
}

}  // namespace

NoiseParams NoiseParams::mpu9250(double sample_rate_hz) {
  NoiseParams n;
  const double root_rate = std::sqrt(sample_rate_hz);
  n.gyro_noise = 8.7e-4 * root_rate;
  n.bias_walk = 1e-5;
  n.accel_noise = 8e-3 * root_rate;
  n.mag_noise = 0.6;
  n.initial_bias = Vec3(0.02, -0.01, 0.015);
  return n;
}

void NoiseParams::validate() const {
  const std::array<std::pair<const char*, double>, 4> fields{
      {{"gyro_noise", gyro_noise}, {"bias_walk", bias_walk}, {"accel_noise", accel_noise}, {"mag_noise", mag_noise}}};
  for (const auto& [name, value] : fields) {
    if (!std::isfinite(value) || value < 0.0)
      throw std::invalid_argument(std::string("noise.") + name + " must be finite and >= 0");
  }
  if (!finite3(initial_bias)) throw std::invalid_argument("noise.initial_bias must be finite");
}

std::string_view to_string(CaseId id) {
  switch (id) {
    case CaseId::I: return "I";
    case CaseId::II: return "II";
    case CaseId::III: return "III";
    case CaseId::IV: return "IV";
    case CaseId::Static: return "static";
  }
  return "?";
}

CaseId parse_case_id(std::string_view s) {
  std::string u(s);
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "I" || u == "1") return CaseId::I;
  if (u == "II" || u == "2") return CaseId::II;
  if (u == "III" || u == "3") return CaseId::III;
  if (u == "IV" || u == "4") return CaseId::IV;
  if (u == "STATIC") return CaseId::Static;
  throw std::invalid_argument("unknown case '" + std::string(s) + "' (expected I, II, III, IV or static)");
}

ScenarioConfig ScenarioConfig::defaults(CaseId id) {
  ScenarioConfig c;
  c.case_id = id;
  c.sample_rate = 150.0;
  switch (id) {
    case CaseId::I:
      c.duration = 50.0;
      c.angular_rate = std::numbers::pi / 50.0;
      break;
    case CaseId::II:
      c.duration = 10.0;
      c.angular_rate = std::numbers::pi / 3.0;
      break;
    case CaseId::III:
      c.duration = 10.0;
      c.angular_rate = std::numbers::pi / 2.0;
      break;
    case CaseId::IV:
      c.duration = 60.0;
      c.angular_rate = 0.0;  // scripted
      break;
    case CaseId::Static:
      c.duration = 10.0;
      c.angular_rate = 0.0;
      break;
  }
  c.noise = NoiseParams::mpu9250(c.sample_rate);
  return c;
}

std::size_t ScenarioConfig::sample_count() const {
  return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

void ScenarioConfig::validate() const {
  if (!std::isfinite(duration) || duration <= 0.0) throw std::invalid_argument("duration must be > 0");
  if (!std::isfinite(sample_rate) || sample_rate <= 0.0) throw std::invalid_argument("sample_rate must be > 0");
  if (!std::isfinite(angular_rate) || angular_rate < 0.0)
    throw std::invalid_argument("angular_rate must be >= 0");
  if (case_id != CaseId::IV && case_id != CaseId::Static && angular_rate <= 0.0)
    throw std::invalid_argument("angular_rate must be > 0 for case " + std::string(to_string(case_id)));
  if (sample_count() < 2) throw std::invalid_argument("duration * sample_rate must give at least 2 samples");
  noise.validate();
  if (!finite3(reference.gravity) || !finite3(reference.magnetic))
    throw std::invalid_argument("reference vectors must be finite");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, Channel channel)
    : engine_(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(channel))) {}

double Rng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

ProfilePoint scenario_profile(const ScenarioConfig& cfg, double t) {
  ProfilePoint p;
  switch (cfg.case_id) {
    case CaseId::I: {
      // One axis at a time, roll then pitch then yaw, each a raised-cosine
      // excursion whose peak rate equals the configured rate.
      const double window = cfg.duration / 3.0;
      const int axis = std::min(2, static_cast<int>(t / window));
      const double tau = t - axis * window;
      const double amplitude = std::min(cfg.angular_rate * window / std::numbers::pi, deg2rad(25.0));
      const double sign = axis == 1 ? -1.0 : 1.0;
      double a = 0.0, r = 0.0;
      raised_cosine(tau, window, sign * amplitude, a, r);
      double* angle[3] = {&p.angles.roll, &p.angles.pitch, &p.angles.yaw};
      double* rate[3] = {&p.rates.roll, &p.rates.pitch, &p.rates.yaw};
      *angle[axis] = a;
      *rate[axis] = r;
      break;
    }
    case CaseId::II:
      // All three axes at once with distinct amplitudes (> 30 deg).
      sine(t, deg2rad(40.0), cfg.angular_rate, p.angles.roll, p.rates.roll);
      sine(t, deg2rad(35.0), cfg.angular_rate, p.angles.pitch, p.rates.pitch);
      sine(t, deg2rad(50.0), cfg.angular_rate, p.angles.yaw, p.rates.yaw);
      break;
    case CaseId::III:
      // Pure pitch sweep through +/-100 deg.
      sine(t, deg2rad(100.0), cfg.angular_rate, p.angles.pitch, p.rates.pitch);
      break;
    case CaseId::IV:
      p = flight_profile(t, cfg.duration);
      break;
    case CaseId::Static:
      break;
  }
  return p;
}

Vec3 truth_rate(const ScenarioConfig& cfg, double t) {
  const ProfilePoint p = scenario_profile(cfg, t);
  if (cfg.case_id == CaseId::III) {
    // Body-y rotation from level; no Z-Y-X mapping so the sweep passes 90 deg.
    return {0.0, p.rates.pitch, 0.0};
  }
  return body_rate_from_euler_rates(p.angles, p.rates);
}

std::vector<TruthState> generate_truth(const ScenarioConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.sample_count();
  const double dt = cfg.dt();
  Rng bias_rng(cfg.seed, Rng::Channel::BiasWalk);
  const double bias_step = cfg.noise.bias_walk * std::sqrt(dt);

  std::vector<TruthState> out;
  out.reserve(n);
  TruthState s;
  s.t = 0.0;
  s.q = cfg.case_id == CaseId::III ? Quaternion::identity() : quat_of_euler(scenario_profile(cfg, 0.0).angles);
  s.b = cfg.noise.initial_bias;
  for (std::size_t k = 0; k < n; ++k) {
    s.t = static_cast<double>(k) / cfg.sample_rate;
    s.w = truth_rate(cfg, s.t);
    out.push_back(s);
    s.q = integrate_constant_rate(s.q, s.w, dt);
    if (bias_step > 0.0) s.b += bias_step * bias_rng.normal3();
  }
  return out;
}

SensorSample measure(const TruthState& truth, const NoiseParams& noise, const ReferenceVectors& ref,
                     MeasurementRng& rng, const Vec3& external_accel) {
  const Dcm c = dcm_of(truth.q);
  SensorSample s;
  s.t = truth.t;
  // Streams advance even for zero std so the sequence layout is fixed.
  s.w_m = truth.w + truth.b + noise.gyro_noise * rng.gyro.normal3();
  s.a_m = c * ref.gravity + external_accel + noise.accel_noise * rng.accel.normal3();
  s.m_m = c * ref.magnetic + noise.mag_noise * rng.mag.normal3();
  return s;
}

Dataset generate_dataset(const ScenarioConfig& cfg, const ExternalAccel& external_accel) {
  Dataset d;
  d.config = cfg;
  d.truth = generate_truth(cfg);
  MeasurementRng rng(cfg.seed);
  d.samples.reserve(d.truth.size());
  for (const TruthState& t : d.truth) {
    const Vec3 ext = external_accel ? external_accel(t.t) : Vec3::Zero();
    d.samples.push_back(measure(t, cfg.noise, cfg.reference, rng, ext));
  }
  return d;
}

}  // namespace attiq
