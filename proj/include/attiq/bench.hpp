#pragma once

// Experiment harness behind the CLI: config loading, repeated filter runs and
// the comparison report.

#include "attiq/filters.hpp"
#include "attiq/h2_synthesis.hpp"
#include "attiq/sensor_sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace attiq {

inline constexpr int kReportSchemaVersion = 1;

enum class InitMode { Triad, Exact };

std::string_view to_string(InitMode m);
/// "triad" | "exact"
InitMode parse_init_mode(std::string_view s);

/// $ATTIQ_CONFIG_DIR if set, else the configs/ directory of the source tree.
std::filesystem::path config_dir();

/// configs/case_<id>.json, e.g. case_iii.json or case_static.json.
std::filesystem::path scenario_config_path(CaseId id, const std::filesystem::path& dir = config_dir());
ScenarioConfig load_scenario_config(CaseId id, const std::filesystem::path& dir = config_dir());

struct SynthesisConfig {
  NoiseParams noise = NoiseParams::mpu9250();
  ReferenceVectors reference;
};

/// {"sample_rate", "noise", "gravity", "magnetic_field"}; noise defaults follow
/// the sample rate.
SynthesisConfig synthesis_config_from_json(const nlohmann::json& j);
SynthesisConfig load_synthesis_config(const std::filesystem::path& path);

/// SHA-256 of the file contents, lowercase hex.
std::string sha256_file(const std::filesystem::path& path);

struct RunSpec {
  ScenarioConfig scenario;
  std::vector<FilterKind> filters{FilterKind::ExtendedH2, FilterKind::Ekf};
  /// Existing dataset CSV; generated from `scenario` when empty.
  std::filesystem::path dataset;
  std::filesystem::path gain_file;
  std::filesystem::path output_dir;
  int repetitions = 1;
  InitMode init = InitMode::Triad;
  /// Accuracy runs of different filters on separate threads. Timing
  /// repetitions stay serial.
  bool parallel = false;

  /// Throws std::invalid_argument: repetitions < 1, no filters, duplicates,
  /// or a named input file that does not exist.
  void validate() const;
};

struct FilterReport {
  FilterKind kind = FilterKind::ExtendedH2;
  Vec3 rms_deg = Vec3::Zero();
  Vec3 std_deg = Vec3::Zero();  ///< per-axis error standard deviation
  double rms_total_deg = 0.0;
  double max_error_deg = 0.0;
  double mean_step_ns = 0.0;
  double median_step_ns = 0.0;
  double std_step_ns = 0.0;
  std::size_t timed_steps = 0;
  double max_norm_deviation = 0.0;
  int skipped_steps = 0;
  bool finite = true;
};

struct CaseCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
};

struct ComparisonReport {
  int schema_version = kReportSchemaVersion;
  ScenarioConfig scenario;
  std::size_t rows = 0;
  int repetitions = 1;
  InitMode init = InitMode::Triad;
  std::vector<FilterReport> filters;
  /// EKF median step time over extended-H2 median step time, when both ran.
  std::optional<double> timing_ratio;
  std::vector<CaseCheck> checks;

  const FilterReport* find(FilterKind k) const;
};

/// Initial estimate for a run: TRIAD on the first sample with zero bias, or
/// the truth.
FilterState initial_estimate(const Dataset& data, InitMode mode);

/// Runs every filter over `data` spec.repetitions times from the same initial
/// state. Accuracy comes from the first repetition (all repetitions are
/// identical); timing statistics pool every repetition.
ComparisonReport compare_filters(const Dataset& data, const RunSpec& spec, const GainSchedule* schedule,
                                 std::vector<ScenarioResult>* first_runs = nullptr);

/// Per-case pass/fail against the thresholds declared for that case.
std::vector<CaseCheck> case_checks(const ComparisonReport& report);

/// Loads or generates the data, reads the gains, runs, and writes
/// <out>/report.json, <out>/report.txt and <out>/trace_<filter>.csv.
ComparisonReport run_bench(const RunSpec& spec);

nlohmann::json to_json(const ComparisonReport& r);
/// Aligned tables: RMS per axis, error standard deviation, step time.
std::string report_table(const ComparisonReport& r);

}  // namespace attiq
