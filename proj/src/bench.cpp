#include "attiq/bench.hpp"

#include "attiq/json_io.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <memory>

namespace attiq {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(InitMode m) { return m == InitMode::Triad ? "triad" : "exact"; }

InitMode parse_init_mode(std::string_view s) {
  if (s == "triad") return InitMode::Triad;
  if (s == "exact") return InitMode::Exact;
  throw std::invalid_argument("unknown init mode '" + std::string(s) + "' (expected triad or exact)");
}

fs::path config_dir() {
  if (const char* env = std::getenv("ATTIQ_CONFIG_DIR"); env && *env) return env;
  return ATTIQ_DEFAULT_CONFIG_DIR;
}

fs::path scenario_config_path(CaseId id, const fs::path& dir) {
  std::string name(to_string(id));
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  return dir / ("case_" + name + ".json");
}

ScenarioConfig load_scenario_config(CaseId id, const fs::path& dir) {
  const fs::path path = scenario_config_path(id, dir);
  ScenarioConfig c;
  try {
    c = scenario_from_json(load_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (c.case_id != id)
    throw ConfigError(path.string() + ": declares case " + std::string(to_string(c.case_id)) + ", expected " +
                      std::string(to_string(id)));
  return c;
}

SynthesisConfig synthesis_config_from_json(const json& j) {
  require_known_keys(j, {"sample_rate", "noise", "gravity", "magnetic_field"}, "synthesis");
  double rate = 150.0;
  if (j.contains("sample_rate")) {
    if (!j["sample_rate"].is_number() || !(j["sample_rate"].get<double>() > 0.0))
      throw ConfigError("synthesis.sample_rate: expected a positive number");
    rate = j["sample_rate"].get<double>();
  }
  SynthesisConfig c;
  c.noise = NoiseParams::mpu9250(rate);
  if (j.contains("noise")) c.noise = noise_from_json(j["noise"], c.noise);
  if (j.contains("gravity")) c.reference.gravity = vec3_from_json(j["gravity"], "synthesis.gravity");
  if (j.contains("magnetic_field"))
    c.reference.magnetic = vec3_from_json(j["magnetic_field"], "synthesis.magnetic_field");
  return c;
}

SynthesisConfig load_synthesis_config(const fs::path& path) {
  try {
    return synthesis_config_from_json(load_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    if (in.eof()) break;
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

void RunSpec::validate() const {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (filters.empty()) throw std::invalid_argument("no filters requested");
  for (std::size_t i = 0; i < filters.size(); ++i)
    for (std::size_t k = i + 1; k < filters.size(); ++k)
      if (filters[i] == filters[k]) throw std::invalid_argument("filter listed twice: " + std::string(to_string(filters[i])));
  if (!dataset.empty() && !fs::exists(dataset)) throw std::invalid_argument("dataset not found: " + dataset.string());
  const bool needs_gains = std::find(filters.begin(), filters.end(), FilterKind::ExtendedH2) != filters.end();
  if (needs_gains && gain_file.empty()) throw std::invalid_argument("extended_h2 needs a gain file (--gains)");
  if (needs_gains && !fs::exists(gain_file)) throw std::invalid_argument("gain file not found: " + gain_file.string());
}

const FilterReport* ComparisonReport::find(FilterKind k) const {
  for (const FilterReport& f : filters)
    if (f.kind == k) return &f;
  return nullptr;
}

FilterState initial_estimate(const Dataset& data, InitMode mode) {
  if (mode == InitMode::Exact) return {data.truth.front().q, data.truth.front().b};
  const ReferenceVectors& ref = data.config.reference;
  return {triad(data.samples.front().a_m, data.samples.front().m_m, ref.gravity, ref.magnetic), Vec3::Zero()};
}

namespace {

ScenarioResult run_one(const Dataset& data, FilterKind kind, const GainSchedule* schedule, const FilterState& init) {
  RunOptions o;
  o.kind = kind;
  o.schedule = schedule;
  o.init = init;
  return run_filter(data, o);
}

FilterReport make_report(const ScenarioResult& first, const std::vector<const ScenarioResult*>& reps) {
  FilterReport f;
  f.kind = first.kind;
  f.rms_deg = first.rms_deg;
  f.rms_total_deg = first.rms_total_deg;
  f.max_error_deg = first.max_error_deg;
  f.max_norm_deviation = first.max_norm_deviation;
  f.skipped_steps = first.skipped_steps;
  f.finite = first.finite;
  Vec3 mean = Vec3::Zero();
  for (const TraceRow& row : first.trace) mean += row.err_deg;
  const double n = static_cast<double>(first.trace.size());
  mean /= n;
  Vec3 var = Vec3::Zero();
  for (const TraceRow& row : first.trace) var += (row.err_deg - mean).cwiseAbs2();
  f.std_deg = n > 1 ? Vec3((var / (n - 1)).cwiseSqrt()) : Vec3::Zero();

  ScenarioResult pooled;
  for (const ScenarioResult* r : reps) pooled.trace.insert(pooled.trace.end(), r->trace.begin(), r->trace.end());
  summarize(pooled);
  f.mean_step_ns = pooled.mean_step_ns;
  f.median_step_ns = pooled.median_step_ns;
  f.std_step_ns = pooled.std_step_ns;
  for (const TraceRow& row : pooled.trace) f.timed_steps += row.step_time_ns > 0.0;
  return f;
}

}  // namespace

ComparisonReport compare_filters(const Dataset& data, const RunSpec& spec, const GainSchedule* schedule,
                                 std::vector<ScenarioResult>* first_runs) {
  if (spec.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  const FilterState init = initial_estimate(data, spec.init);

  std::vector<ScenarioResult> first(spec.filters.size());
  if (spec.parallel && spec.filters.size() > 1) {
    std::vector<std::future<ScenarioResult>> jobs;
    for (FilterKind k : spec.filters)
      jobs.push_back(std::async(std::launch::async, run_one, std::cref(data), k, schedule, init));
    for (std::size_t i = 0; i < jobs.size(); ++i) first[i] = jobs[i].get();
  }

  // Timing repetitions run one at a time; in parallel mode the concurrent
  // accuracy pass above contributes no timing.
  ComparisonReport report;
  report.scenario = data.config;
  report.rows = data.samples.size();
  report.repetitions = spec.repetitions;
  report.init = spec.init;
  for (std::size_t i = 0; i < spec.filters.size(); ++i) {
    std::vector<ScenarioResult> reps;
    for (int r = 0; r < spec.repetitions; ++r) reps.push_back(run_one(data, spec.filters[i], schedule, init));
    if (!(spec.parallel && spec.filters.size() > 1)) first[i] = reps.front();
    std::vector<const ScenarioResult*> ptrs;
    for (const ScenarioResult& r : reps) ptrs.push_back(&r);
    report.filters.push_back(make_report(first[i], ptrs));
  }
  const FilterReport* h2 = report.find(FilterKind::ExtendedH2);
  const FilterReport* ekf = report.find(FilterKind::Ekf);
  if (h2 && ekf && h2->median_step_ns > 0.0) report.timing_ratio = ekf->median_step_ns / h2->median_step_ns;
  report.checks = case_checks(report);
  if (first_runs) *first_runs = std::move(first);
  return report;
}

std::vector<CaseCheck> case_checks(const ComparisonReport& r) {
  std::vector<CaseCheck> out;
  for (const FilterReport& f : r.filters)
    out.push_back({std::string(to_string(f.kind)) + " finite", f.finite, f.finite ? 1.0 : 0.0, 1.0});
  const FilterReport* h2 = r.find(FilterKind::ExtendedH2);
  const FilterReport* ekf = r.find(FilterKind::Ekf);
  switch (r.scenario.case_id) {
    case CaseId::II:
      if (r.timing_ratio) {
        const double share = 1.0 / *r.timing_ratio;
        out.push_back({"extended_h2 median step / ekf median step", share <= 0.75, share, 0.75});
      }
      break;
    case CaseId::III:
      if (h2) {
        out.push_back({"extended_h2 pitch RMS (deg)", h2->rms_deg.y() < 0.5, h2->rms_deg.y(), 0.5});
        out.push_back({"extended_h2 max error (deg)", h2->max_error_deg < 10.0, h2->max_error_deg, 10.0});
      }
      break;
    case CaseId::IV:
      if (h2 && ekf) {
        const double ratio = h2->rms_total_deg / ekf->rms_total_deg;
        out.push_back({"extended_h2 total RMS / ekf total RMS", ratio <= 1.25, ratio, 1.25});
      }
      for (const FilterReport& f : r.filters)
        out.push_back({std::string(to_string(f.kind)) + " total RMS (deg)", f.rms_total_deg < 1.0, f.rms_total_deg, 1.0});
      break;
    case CaseId::I:
    case CaseId::Static:
      break;
  }
  return out;
}

ComparisonReport run_bench(const RunSpec& spec) {
  spec.validate();
  Dataset data = spec.dataset.empty() ? generate_dataset(spec.scenario) : read_dataset(spec.dataset);
  std::optional<GainSchedule> schedule;
  if (!spec.gain_file.empty()) schedule = read_gain_file(spec.gain_file);
  std::vector<ScenarioResult> runs;
  ComparisonReport report = compare_filters(data, spec, schedule ? &*schedule : nullptr, &runs);
  if (!spec.output_dir.empty()) {
    fs::create_directories(spec.output_dir);
    for (const ScenarioResult& r : runs)
      write_trace(r, spec.output_dir / ("trace_" + std::string(to_string(r.kind)) + ".csv"));
    std::ofstream js(spec.output_dir / "report.json", std::ios::binary | std::ios::trunc);
    js << to_json(report).dump(2) << '\n';
    std::ofstream txt(spec.output_dir / "report.txt", std::ios::binary | std::ios::trunc);
    txt << report_table(report);
    if (!js || !txt) throw std::runtime_error("cannot write report into " + spec.output_dir.string());
  }
  return report;
}

json to_json(const ComparisonReport& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["case"] = std::string(to_string(r.scenario.case_id));
  j["seed"] = r.scenario.seed;
  j["rows"] = r.rows;
  j["repetitions"] = r.repetitions;
  j["init"] = std::string(to_string(r.init));
  json filters = json::array();
  for (const FilterReport& f : r.filters) {
    filters.push_back({{"filter", std::string(to_string(f.kind))},
                       {"rms_deg", {{"roll", f.rms_deg.x()}, {"pitch", f.rms_deg.y()}, {"yaw", f.rms_deg.z()},
                                    {"total", f.rms_total_deg}}},
                       {"std_deg", {{"roll", f.std_deg.x()}, {"pitch", f.std_deg.y()}, {"yaw", f.std_deg.z()}}},
                       {"max_error_deg", f.max_error_deg},
                       {"step_time_ns", {{"mean", f.mean_step_ns}, {"median", f.median_step_ns},
                                         {"std", f.std_step_ns}, {"samples", f.timed_steps}}},
                       {"max_norm_deviation", f.max_norm_deviation},
                       {"skipped_steps", f.skipped_steps},
                       {"finite", f.finite}});
  }
  j["filters"] = filters;
  j["timing_ratio_ekf_over_h2"] = r.timing_ratio ? json(*r.timing_ratio) : json(nullptr);
  json checks = json::array();
  for (const CaseCheck& c : r.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"measured", c.measured}, {"threshold", c.threshold}});
  j["checks"] = checks;
  j["config"] = to_json(r.scenario);
  return j;
}

namespace {

std::string label(FilterKind k) { return k == FilterKind::ExtendedH2 ? "Extended H2" : "EKF"; }

}  // namespace

std::string report_table(const ComparisonReport& r) {
  std::string s = fmt::format("Case {}  seed {}  {} rows  {} repetition(s)  init {}\n\n", to_string(r.scenario.case_id),
                              r.scenario.seed, r.rows, r.repetitions, to_string(r.init));
  s += "RMS error\n";
  s += fmt::format("{:<12} | {:>15} | {:>16} | {:>14} | {:>15}\n", "Algorithm", "Roll angle(deg)", "Pitch angle(deg)",
                   "Yaw angle(deg)", "Total(deg)");
  for (const FilterReport& f : r.filters)
    s += fmt::format("{:<12} | {:>15.4f} | {:>16.4f} | {:>14.4f} | {:>15.4f}\n", label(f.kind), f.rms_deg.x(),
                     f.rms_deg.y(), f.rms_deg.z(), f.rms_total_deg);
  s += "\nStandard deviation of error\n";
  s += fmt::format("{:<12} | {:>15} | {:>16} | {:>14}\n", "Algorithm", "Roll (deg)", "Pitch (deg)", "Yaw (deg)");
  for (const FilterReport& f : r.filters)
    s += fmt::format("{:<12} | {:>15.4f} | {:>16.4f} | {:>14.4f}\n", label(f.kind), f.std_deg.x(), f.std_deg.y(),
                     f.std_deg.z());
  s += "\nComputational time per step\n";
  s += fmt::format("{:<12} | {:>14} | {:>16} | {:>22}\n", "Algorithm", "Mean Time(ns)", "Median Time(ns)",
                   "Standard Deviation(ns)");
  for (const FilterReport& f : r.filters)
    s += fmt::format("{:<12} | {:>14.1f} | {:>16.1f} | {:>22.1f}\n", label(f.kind), f.mean_step_ns, f.median_step_ns,
                     f.std_step_ns);
  if (r.timing_ratio) s += fmt::format("EKF / Extended H2 median time ratio: {:.3f}\n", *r.timing_ratio);
  if (!r.checks.empty()) {
    s += "\nChecks\n";
    for (const CaseCheck& c : r.checks)
      s += fmt::format("  [{}] {}: {:.4g} (threshold {:.4g})\n", c.passed ? "PASS" : "FAIL", c.name, c.measured,
                       c.threshold);
  }
  return s;
}

}  // namespace attiq
