#include "attiq/acceptance.hpp"

#include "attiq/bench.hpp"
#include "attiq/filters.hpp"
#include "attiq/json_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <numbers>
#include <ostream>

namespace attiq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::uint64_t> seeds_from_json(const json& j, const char* key) {
  if (!j[key].is_array() || j[key].empty()) throw ConfigError(std::string("acceptance.") + key + ": expected a list of seeds");
  std::vector<std::uint64_t> out;
  for (const json& s : j[key]) {
    if (!s.is_number_unsigned()) throw ConfigError(std::string("acceptance.") + key + ": seeds must be non-negative integers");
    out.push_back(s.get<std::uint64_t>());
  }
  return out;
}

std::uint64_t seed_from_json(const json& j, const char* key) {
  if (!j[key].is_number_unsigned()) throw ConfigError(std::string("acceptance.") + key + ": expected a non-negative integer");
  return j[key].get<std::uint64_t>();
}

}  // namespace

AcceptanceConfig acceptance_config_from_json(const json& j) {
  require_known_keys(j, {"case_iii_seeds", "case_iv_seeds", "timing_seed", "timing_repetitions", "noiseless_seed",
                         "convergence_seeds", "property_instances", "property_seed"},
                     "acceptance");
  AcceptanceConfig c;
  if (j.contains("case_iii_seeds")) c.case_iii_seeds = seeds_from_json(j, "case_iii_seeds");
  if (j.contains("case_iv_seeds")) c.case_iv_seeds = seeds_from_json(j, "case_iv_seeds");
  if (j.contains("convergence_seeds")) c.convergence_seeds = seeds_from_json(j, "convergence_seeds");
  if (j.contains("timing_seed")) c.timing_seed = seed_from_json(j, "timing_seed");
  if (j.contains("noiseless_seed")) c.noiseless_seed = seed_from_json(j, "noiseless_seed");
  if (j.contains("property_seed")) c.property_seed = seed_from_json(j, "property_seed");
  if (j.contains("timing_repetitions")) c.timing_repetitions = static_cast<int>(seed_from_json(j, "timing_repetitions"));
  if (j.contains("property_instances")) c.property_instances = static_cast<int>(seed_from_json(j, "property_instances"));
  if (c.timing_repetitions < 1 || c.property_instances < 1)
    throw ConfigError("acceptance: repetitions and instance counts must be >= 1");
  return c;
}

std::string format_result(const CriterionResult& r) {
  return fmt::format("[{}] {}. {}: measured {}; required {} ({:.2f} s)", r.passed ? "PASS" : "FAIL", r.id, r.title,
                     r.measured, r.threshold, r.seconds);
}

bool all_passed(const std::vector<CriterionResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.passed; });
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Context {
  fs::path dir;
  AcceptanceConfig cfg;
  GainSchedule synthesized;
  double synthesis_seconds = 0.0;
  const GainSchedule* gains = nullptr;  ///< schedule used by the filter runs
  SynthesisConfig synthesis;
};

ScenarioConfig scenario(const Context& ctx, CaseId id, std::uint64_t seed) {
  ScenarioConfig c = load_scenario_config(id, ctx.dir);
  c.seed = seed;
  return c;
}

ScenarioResult run(const Dataset& d, FilterKind kind, const Context& ctx, const FilterState& init) {
  RunOptions o;
  o.kind = kind;
  o.schedule = ctx.gains;
  o.ekf_tuning = ctx.synthesis.noise;
  o.init = init;
  return run_filter(d, o);
}

bool diverged(const ScenarioResult& r) { return !r.finite || !(r.max_error_deg < 10.0); }

std::string seed_list(const std::vector<std::uint64_t>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out;
}

CriterionResult case_iii_pitch(const Context& ctx) {
  const auto t0 = Clock::now();
  CriterionResult r{1, "Case III extended-H2 pitch RMS", false, "", "", 0.0};
  double worst = 0.0;
  double worst_max_err = 0.0;
  std::vector<std::uint64_t> bad;
  bool divergence = false;
  std::string per_seed;
  for (std::uint64_t seed : ctx.cfg.case_iii_seeds) {
    const Dataset d = generate_dataset(scenario(ctx, CaseId::III, seed));
    const ScenarioResult h = run(d, FilterKind::ExtendedH2, ctx, initial_estimate(d, InitMode::Triad));
    const double pitch = h.rms_deg.y();
    per_seed += fmt::format("{}{:.4f}", per_seed.empty() ? "" : " ", pitch);
    worst = std::max(worst, std::isfinite(pitch) ? pitch : INFINITY);
    worst_max_err = std::max(worst_max_err, h.max_error_deg);
    if (!(pitch < 0.5)) bad.push_back(seed);
    divergence = divergence || diverged(h);
  }
  r.seconds = seconds_since(t0);
  r.passed = bad.empty() && !divergence && r.seconds < 10.0;
  r.measured = fmt::format("pitch RMS per seed [{}] deg, worst {:.4f}; max error {:.3f} deg{}{}", per_seed, worst,
                           worst_max_err, divergence ? " (diverged)" : "",
                           bad.empty() ? "" : "; failing seeds " + seed_list(bad));
  r.threshold = fmt::format("< 0.5 deg on seeds {}, error < 10 deg throughout, < 10 s", seed_list(ctx.cfg.case_iii_seeds));
  return r;
}

CriterionResult case_iv_relative(const Context& ctx) {
  const auto t0 = Clock::now();
  CriterionResult r{2, "Case IV extended-H2 vs EKF total RMS", false, "", "", 0.0};
  int ratio_ok = 0;
  bool absolute_ok = true;
  double worst_ratio = 0.0, worst_h2 = 0.0, worst_ekf = 0.0;
  std::string per_seed;
  for (std::uint64_t seed : ctx.cfg.case_iv_seeds) {
    const Dataset d = generate_dataset(scenario(ctx, CaseId::IV, seed));
    const FilterState init = initial_estimate(d, InitMode::Triad);
    const ScenarioResult h = run(d, FilterKind::ExtendedH2, ctx, init);
    const ScenarioResult e = run(d, FilterKind::Ekf, ctx, init);
    const double ratio = h.rms_total_deg / e.rms_total_deg;
    per_seed += fmt::format("{}{:.3f}", per_seed.empty() ? "" : " ", ratio);
    if (ratio <= 1.25) ++ratio_ok;
    absolute_ok = absolute_ok && h.rms_total_deg < 1.0 && e.rms_total_deg < 1.0;
    worst_ratio = std::max(worst_ratio, std::isfinite(ratio) ? ratio : INFINITY);
    worst_h2 = std::max(worst_h2, h.rms_total_deg);
    worst_ekf = std::max(worst_ekf, e.rms_total_deg);
  }
  const int n = static_cast<int>(ctx.cfg.case_iv_seeds.size());
  const int needed = (8 * n + 9) / 10;
  r.seconds = seconds_since(t0);
  r.passed = ratio_ok >= needed && absolute_ok;
  r.measured = fmt::format("ratio per seed [{}], {} of {} within 1.25; worst total RMS H2 {:.4f} deg, EKF {:.4f} deg",
                           per_seed, ratio_ok, n, worst_h2, worst_ekf);
  r.threshold = fmt::format("ratio <= 1.25 on >= {} of {} seeds, both filters < 1.0 deg on every seed", needed, n);
  return r;
}

CriterionResult timing_ratio(const Context& ctx) {
  const auto t0 = Clock::now();
  CriterionResult r{3, "Case II median step time ratio", false, "", "", 0.0};
  const Dataset d = generate_dataset(scenario(ctx, CaseId::II, ctx.cfg.timing_seed));
  RunSpec spec;
  spec.scenario = d.config;
  spec.repetitions = ctx.cfg.timing_repetitions;
  spec.init = InitMode::Triad;
  const ComparisonReport rep = compare_filters(d, spec, ctx.gains);
  const FilterReport* h = rep.find(FilterKind::ExtendedH2);
  const FilterReport* e = rep.find(FilterKind::Ekf);
  const double share = h->median_step_ns / e->median_step_ns;
  r.seconds = seconds_since(t0);
  r.passed = share <= 0.75 && r.seconds < 30.0;
  r.measured = fmt::format("H2 median {:.0f} ns, EKF median {:.0f} ns over {} steps each, H2/EKF {:.3f}",
                           h->median_step_ns, e->median_step_ns, h->timed_steps, share);
  r.threshold = fmt::format("H2/EKF <= 0.75 with {} repetitions, < 30 s", ctx.cfg.timing_repetitions);
  return r;
}

CriterionResult synthesis_oracle(const Context& ctx) {
  const auto t0 = Clock::now();
  CriterionResult r{4, "Gain synthesis LMI vs CARE", false, "", "", 0.0};
  const GainSchedule& s = ctx.synthesized;
  double worst_gain = 0.0, worst_gamma = 0.0, worst_eig = -INFINITY;
  for (int i = 1; i <= kOctantCount; ++i) {
    const LinearErrorPlant p = build_plant(i, s.noise, s.reference.gravity, s.reference.magnetic);
    const CareSolution care = solve_h2_care(p);
    const MatrixXd& l = s.gain(i);
    worst_gain = std::max(worst_gain, (l - care.gain).norm() / care.gain.norm());
    const double norm = closed_loop_h2_norm(p, l);
    worst_gamma = std::max(worst_gamma, std::abs(s.gamma[i - 1] - norm) / s.gamma[i - 1]);
    worst_eig = std::max(worst_eig, max_real_eigenvalue(p.a + l * p.cy));
  }
  r.seconds = ctx.synthesis_seconds + seconds_since(t0);
  r.passed = worst_gain < 1e-3 && worst_gamma < 1e-3 && worst_eig < 0.0 && r.seconds < 10.0;
  r.measured = fmt::format("worst relative gain difference {:.3e}, worst gamma mismatch {:.3e}, max Re eig(A+LC) {:.3e}",
                           worst_gain, worst_gamma, worst_eig);
  r.threshold = "gain difference < 1e-3, gamma mismatch < 1e-3, all eight A+LC Hurwitz, < 10 s";
  return r;
}

CriterionResult scalar_check() {
  const auto t0 = Clock::now();
  CriterionResult r{5, "Scalar closed-form plant", false, "", "", 0.0};
  LinearErrorPlant p;
  p.a = MatrixXd::Constant(1, 1, -1.0);
  p.bw = MatrixXd(1, 2);
  p.bw << 1.0, 0.0;
  p.cy = MatrixXd::Constant(1, 1, 1.0);
  p.dw = MatrixXd(1, 2);
  p.dw << 0.0, 1.0;
  p.cz = MatrixXd::Constant(1, 1, 1.0);
  const double expected = std::numbers::sqrt2 - 1.0;
  const CareSolution care = solve_h2_care(p);
  const LmiSolution lmi = solve_h2_lmi(p);
  const double norm = h2_norm(p.a, MatrixXd::Constant(1, 1, 1.0), p.cz);
  const double e_p = std::abs(care.p(0, 0) - expected);
  const double e_l = std::abs(lmi.gain(0, 0) + expected);
  const double e_n = std::abs(norm - 1.0 / std::numbers::sqrt2);
  r.seconds = seconds_since(t0);
  r.passed = e_p < 1e-9 && e_l < 1e-6 && e_n < 1e-9;
  r.measured = fmt::format("CARE P {:.12f} (error {:.2e}), LMI gain {:.12f} (error {:.2e}), h2 norm error {:.2e}",
                           care.p(0, 0), e_p, lmi.gain(0, 0), e_l, e_n);
  r.threshold = "P = sqrt2 - 1, LMI gain within 1e-6 of -(sqrt2 - 1), h2 norm within 1e-9 of 1/sqrt2";
  return r;
}

CriterionResult noiseless_tracking(const Context& ctx, const std::vector<CaseId>& cases) {
  const auto t0 = Clock::now();
  CriterionResult r{6, "Noiseless tracking with exact init", false, "", "", 0.0};
  double worst = 0.0;
  std::string per_case;
  for (CaseId id : cases) {
    ScenarioConfig c = scenario(ctx, id, ctx.cfg.noiseless_seed);
    const Vec3 b0 = c.noise.initial_bias;
    c.noise = NoiseParams::none();
    c.noise.initial_bias = b0;
    const Dataset d = generate_dataset(c);
    const FilterState init = initial_estimate(d, InitMode::Exact);
    const ScenarioResult h = run(d, FilterKind::ExtendedH2, ctx, init);
    const ScenarioResult e = run(d, FilterKind::Ekf, ctx, init);
    per_case += fmt::format("{}{}: H2 {:.2e} EKF {:.2e}", per_case.empty() ? "" : ", ", to_string(id),
                            h.rms_total_deg, e.rms_total_deg);
    for (double v : {h.rms_total_deg, e.rms_total_deg}) worst = std::max(worst, std::isfinite(v) ? v : INFINITY);
  }
  r.seconds = seconds_since(t0);
  r.passed = worst < 0.01;
  r.measured = fmt::format("total RMS deg {}", per_case);
  r.threshold = "< 0.01 deg for both filters on every case";
  return r;
}

CriterionResult convergence(const Context& ctx) {
  const auto t0 = Clock::now();
  CriterionResult r{7, "Convergence from 20 deg initial error", false, "", "", 0.0};
  int ok = 0;
  std::string per_seed;
  for (std::uint64_t seed : ctx.cfg.convergence_seeds) {
    const Dataset d = generate_dataset(scenario(ctx, CaseId::Static, seed));
    Rng rng(seed, Rng::Channel::Setup);
    const Vec3 axis = rng.normal3().normalized();
    FilterState init = initial_estimate(d, InitMode::Exact);
    init.q_hat = (Quaternion::from_axis_angle(axis, deg2rad(20.0)) * init.q_hat).normalized();
    const ScenarioResult h = run(d, FilterKind::ExtendedH2, ctx, init);
    double after = 0.0;
    for (const TraceRow& row : h.trace)
      if (row.t >= 5.0 - 1e-9) after = std::max(after, std::isfinite(row.err_total_deg) ? row.err_total_deg : INFINITY);
    if (after < 1.0) ++ok;
    per_seed += fmt::format("{}{:.3f}", per_seed.empty() ? "" : " ", after);
  }
  const int n = static_cast<int>(ctx.cfg.convergence_seeds.size());
  r.seconds = seconds_since(t0);
  r.passed = ok == n;
  r.measured = fmt::format("max error after 5 s per seed [{}] deg, {} of {} below 1 deg", per_seed, ok, n);
  r.threshold = fmt::format("< 1 deg from t = 5 s on, {} of {} seeds", n, n);
  return r;
}

// ---- randomized invariant suites -------------------------------------------

Quaternion random_unit(Rng& rng) {
  Vec4 v(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return Quaternion(v.normalized());
}

struct SuiteResult {
  std::string name;
  int failures = 0;
  double worst = 0.0;
};

CriterionResult invariant_suites(const Context& ctx) {
  const auto t0 = Clock::now();
  CriterionResult r{8, "Algebraic and determinism invariants", false, "", "", 0.0};
  const int n = ctx.cfg.property_instances;
  Rng rng(ctx.cfg.property_seed, Rng::Channel::Setup);
  std::vector<SuiteResult> suites;

  SuiteResult hom{"homomorphism"};
  SuiteResult iso{"isometry"};
  SuiteResult ren{"renormalize"};
  SuiteResult omg{"omega antisymmetry"};
  SuiteResult rot{"constant-rate angle"};
  for (int i = 0; i < n; ++i) {
    const Quaternion a = random_unit(rng), b = random_unit(rng);
    const double e = (dcm_of(a * b) - dcm_of(a) * dcm_of(b)).cwiseAbs().maxCoeff();
    hom.worst = std::max(hom.worst, e);
    hom.failures += !(e <= 1e-9);

    const Vec3 v = rng.normal3() * std::pow(10.0, 4.0 * rng.uniform() - 2.0);
    const double ei = std::abs((dcm_of(a) * v).norm() - v.norm()) / std::max(1.0, v.norm());
    iso.worst = std::max(iso.worst, ei);
    iso.failures += !(ei <= 1e-12);

    const Vec3 dq = rng.normal3() * std::pow(10.0, 11.0 * rng.uniform() - 8.0);
    const double en = std::abs(renormalize(dq).norm() - 1.0);
    ren.worst = std::max(ren.worst, en);
    ren.failures += !(en <= 1e-12);

    const Vec3 w = rng.normal3() * 3.0;
    const Mat4 om = omega_matrix(w);
    const double ea = (om + om.transpose()).cwiseAbs().maxCoeff();
    omg.worst = std::max(omg.worst, ea);
    omg.failures += ea != 0.0;

    const double wn = 0.05 + 0.5 * rng.uniform();
    const Vec3 wv = rng.normal3().normalized() * wn;
    const int steps = 100;
    const double dt = (std::numbers::pi / wn) * rng.uniform() / steps;
    Quaternion q;
    for (int k = 0; k < steps; ++k) q = integrate_constant_rate(q, wv, dt);
    const double er = std::abs(angular_distance(Quaternion::identity(), q) - wn * dt * steps);
    rot.worst = std::max(rot.worst, er);
    rot.failures += !(er <= 1e-9);
  }
  suites.insert(suites.end(), {hom, iso, ren, omg, rot});

  SuiteResult trip{"dataset round-trip"};
  SuiteResult det{"determinism"};
  const fs::path tmp = fs::temp_directory_path() /
                       fmt::format("attiq-acceptance-{}", Clock::now().time_since_epoch().count());
  fs::create_directories(tmp);
  const std::array<CaseId, 4> cases{CaseId::I, CaseId::II, CaseId::III, CaseId::IV};
  for (int i = 0; i < n; ++i) {
    ScenarioConfig c = ScenarioConfig::defaults(cases[static_cast<std::size_t>(i) % cases.size()]);
    c.seed = static_cast<std::uint64_t>(rng.uniform() * 1e15);
    c.duration = 0.05 + 0.15 * rng.uniform();
    const Dataset d = generate_dataset(c);
    const fs::path csv = tmp / fmt::format("d{}.csv", i);
    write_dataset(d, csv);
    const Dataset back = read_dataset(csv);
    bool same = back.config == d.config && back.samples.size() == d.samples.size();
    for (std::size_t k = 0; same && k < d.samples.size(); ++k) {
      const SensorSample &x = d.samples[k], &y = back.samples[k];
      same = x.t == y.t && x.w_m == y.w_m && x.a_m == y.a_m && x.m_m == y.m_m && d.truth[k].q == back.truth[k].q &&
             d.truth[k].b == back.truth[k].b && d.truth[k].w == back.truth[k].w;
    }
    trip.failures += !same;
    fs::remove(csv);
    fs::remove(sidecar_path(csv));

    const Dataset again = generate_dataset(c);
    bool identical = again.samples.size() == d.samples.size();
    for (std::size_t k = 0; identical && k < d.samples.size(); ++k) {
      const SensorSample &x = d.samples[k], &y = again.samples[k];
      identical = x.w_m == y.w_m && x.a_m == y.a_m && x.m_m == y.m_m && d.truth[k].q == again.truth[k].q;
    }
    const FilterState init = initial_estimate(d, InitMode::Triad);
    identical = identical && run(d, FilterKind::ExtendedH2, ctx, init) == run(again, FilterKind::ExtendedH2, ctx, init) &&
                run(d, FilterKind::Ekf, ctx, init) == run(again, FilterKind::Ekf, ctx, init);
    det.failures += !identical;
  }
  fs::remove_all(tmp);
  suites.insert(suites.end(), {trip, det});

  r.seconds = seconds_since(t0);
  bool ok = true;
  for (const SuiteResult& s : suites) {
    ok = ok && s.failures == 0;
    r.measured += fmt::format("{}{} {}/{}", r.measured.empty() ? "" : ", ", s.name, n - s.failures, n);
  }
  r.measured += fmt::format("; worst homomorphism {:.1e}, renormalize {:.1e}", hom.worst, ren.worst);
  r.passed = ok && r.seconds < 60.0;
  r.threshold = fmt::format("every suite passes all {} instances, < 60 s", n);
  return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt) {
  Context ctx;
  ctx.dir = opt.config_dir.empty() ? config_dir() : opt.config_dir;
  const fs::path accept = ctx.dir / "acceptance.json";
  ctx.cfg = fs::exists(accept) ? acceptance_config_from_json(load_json_file(accept)) : AcceptanceConfig{};
  ctx.synthesis = load_synthesis_config(ctx.dir / "synthesis.json");

  std::optional<GainSchedule> loaded;
  if (!opt.gain_file.empty()) loaded = read_gain_file(opt.gain_file);

  const auto t0 = Clock::now();
  ctx.synthesized =
      synthesize_schedule(ctx.synthesis.noise, ctx.synthesis.reference.gravity, ctx.synthesis.reference.magnetic);
  ctx.synthesis_seconds = seconds_since(t0);
  ctx.gains = loaded ? &*loaded : &ctx.synthesized;

  const auto wants = [&](std::initializer_list<CaseId> ids) {
    if (!opt.only_case) return true;
    return std::find(ids.begin(), ids.end(), *opt.only_case) != ids.end();
  };
  std::vector<CaseId> noiseless;
  for (CaseId id : {CaseId::I, CaseId::II, CaseId::III})
    if (!opt.only_case || *opt.only_case == id) noiseless.push_back(id);

  std::vector<std::function<CriterionResult()>> accuracy;
  if (wants({CaseId::III})) accuracy.push_back([&] { return case_iii_pitch(ctx); });
  if (wants({CaseId::IV})) accuracy.push_back([&] { return case_iv_relative(ctx); });
  if (!opt.only_case) accuracy.push_back([&] { return synthesis_oracle(ctx); });
  if (!opt.only_case) accuracy.push_back([] { return scalar_check(); });
  if (!noiseless.empty()) accuracy.push_back([&] { return noiseless_tracking(ctx, noiseless); });
  if (wants({CaseId::Static})) accuracy.push_back([&] { return convergence(ctx); });
  if (!opt.only_case) accuracy.push_back([&] { return invariant_suites(ctx); });

  std::vector<CriterionResult> results;
  auto report = [&](const CriterionResult& r) { results.push_back(r); };
  if (opt.parallel) {
    std::vector<std::future<CriterionResult>> jobs;
    for (auto& f : accuracy) jobs.push_back(std::async(std::launch::async, f));
    for (auto& j : jobs) report(j.get());
  } else {
    for (auto& f : accuracy) report(f());
  }
  if (wants({CaseId::II})) report(timing_ratio(ctx));
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  if (opt.log)
    for (const CriterionResult& r : results) *opt.log << format_result(r) << '\n';
  return results;
}

}  // namespace attiq
