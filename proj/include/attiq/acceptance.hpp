#pragma once

// End-to-end acceptance checks shared by `attiq verify` and the acceptance
// test binary.

#include "attiq/h2_synthesis.hpp"
#include "attiq/sensor_sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace attiq {

/// Pinned seeds and sizes, read from configs/acceptance.json.
struct AcceptanceConfig {
  std::vector<std::uint64_t> case_iii_seeds{1, 2, 3, 4, 5};
  std::vector<std::uint64_t> case_iv_seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t timing_seed = 1;
  int timing_repetitions = 5;
  std::uint64_t noiseless_seed = 1;
  std::vector<std::uint64_t> convergence_seeds{1, 2, 3, 4, 5};
  int property_instances = 1000;
  std::uint64_t property_seed = 20240601;
};

AcceptanceConfig acceptance_config_from_json(const nlohmann::json& j);

struct AcceptanceOptions {
  std::filesystem::path config_dir;  ///< empty: config_dir()
  /// Gains for the filter runs; synthesized from configs/synthesis.json when empty.
  std::filesystem::path gain_file;
  std::optional<CaseId> only_case;
  /// Run the accuracy criteria concurrently. Timing always runs alone.
  bool parallel = false;
  /// Receives one line per criterion, in criterion order.
  std::ostream* log = nullptr;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string measured;
  std::string threshold;
  double seconds = 0.0;
};

std::string format_result(const CriterionResult& r);

/// Runs every criterion selected by the options. Throws GainFileError or
/// ConfigError on unusable inputs before any criterion runs.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options = {});

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace attiq
