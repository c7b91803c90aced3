// attiq: dataset generation, gain synthesis, filter comparison and the
// acceptance run.

#include "attiq/acceptance.hpp"
#include "attiq/bench.hpp"
#include "attiq/json_io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace attiq;

namespace {

struct ScenarioArgs {
  std::string case_name = "I";
  std::optional<std::uint64_t> seed;
  std::optional<double> rate;
  std::string config;
};

void add_scenario_flags(CLI::App* cmd, ScenarioArgs& a) {
  cmd->add_option("--case", a.case_name, "I, II, III, IV or static")->capture_default_str();
  cmd->add_option("--seed", a.seed, "RNG seed (overrides the config)");
  cmd->add_option("--rate", a.rate, "sample rate in Hz (config default 150)");
  cmd->add_option("--config", a.config, "scenario config file (default: configs/case_<id>.json)");
}

ScenarioConfig resolve_scenario(const ScenarioArgs& a) {
  CaseId id;
  try {
    id = parse_case_id(a.case_name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--case: ") + e.what());
  }
  const fs::path path = a.config.empty() ? scenario_config_path(id) : fs::path(a.config);
  nlohmann::json j = load_json_file(path);
  if (a.seed) j["seed"] = *a.seed;
  if (a.rate) j["sample_rate"] = *a.rate;
  if (!a.config.empty() && !j.contains("case")) j["case"] = a.case_name;
  try {
    return scenario_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

int cmd_gen(const ScenarioArgs& a, const std::string& out) {
  const ScenarioConfig cfg = resolve_scenario(a);
  fs::path csv = out;
  if (csv.extension() != ".csv") {
    fs::create_directories(csv);
    csv /= fmt::format("case_{}_seed{}.csv", lower(std::string(to_string(cfg.case_id))), cfg.seed);
  } else if (csv.has_parent_path()) {
    fs::create_directories(csv.parent_path());
  }
  const Dataset d = generate_dataset(cfg);
  write_dataset(d, csv);
  fmt::print("wrote {} ({} rows)\nsha256 {}\n", csv.string(), d.samples.size(), sha256_file(csv));
  return 0;
}

int cmd_synth(const std::string& config, std::optional<double> rate, const std::string& out) {
  const fs::path path = config.empty() ? config_dir() / "synthesis.json" : fs::path(config);
  nlohmann::json j = load_json_file(path);
  if (rate) j["sample_rate"] = *rate;
  SynthesisConfig sc;
  try {
    sc = synthesis_config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  const GainSchedule s = synthesize_schedule(sc.noise, sc.reference.gravity, sc.reference.magnetic);
  fs::path file = out;
  if (file.extension() != ".json") {
    fs::create_directories(file);
    file /= "gains.json";
  } else if (file.has_parent_path()) {
    fs::create_directories(file.parent_path());
  }
  write_gain_file(s, file);
  fmt::print("{:>6} {:>14} {:>14} {:>14} {:>14}\n", "octant", "gamma", "h2 norm", "care diff", "riccati res");
  for (int i = 1; i <= kOctantCount; ++i) {
    const LinearErrorPlant p = build_plant(i, s.noise, s.reference.gravity, s.reference.magnetic);
    const CareSolution care = solve_h2_care(p);
    fmt::print("{:>6} {:>14.6e} {:>14.6e} {:>14.3e} {:>14.3e}\n", i, s.gamma[i - 1], closed_loop_h2_norm(p, s.gain(i)),
               s.care_difference[i - 1], care.residual);
  }
  fmt::print("wrote {}\nsha256 {}\n", file.string(), sha256_file(file));
  return 0;
}

std::vector<FilterKind> parse_filters(const std::string& list) {
  std::vector<FilterKind> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_filter_kind(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quaternion attitude estimation: extended H2 filter vs multiplicative EKF"};
  app.require_subcommand(1);

  ScenarioArgs gen_args;
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("gen", "generate a dataset CSV and its sidecar config");
  add_scenario_flags(gen, gen_args);
  gen->add_option("--out", gen_out, "output directory or .csv path")->capture_default_str();

  std::string synth_config, synth_out = "gains.json";
  std::optional<double> synth_rate;
  auto* synth = app.add_subcommand("synth", "synthesize the eight octant gains");
  synth->add_option("--config", synth_config, "noise config (default: configs/synthesis.json)");
  synth->add_option("--rate", synth_rate, "sample rate in Hz the noise stds refer to");
  synth->add_option("--out", synth_out, "output directory or .json path")->capture_default_str();

  ScenarioArgs run_args;
  RunSpec spec;
  std::string filters = "extended_h2,ekf", gains, dataset, out = "out", init = "triad";
  auto* run = app.add_subcommand("run", "run filters over a dataset and write the comparison report");
  add_scenario_flags(run, run_args);
  run->add_option("--filters", filters, "comma-separated: extended_h2, ekf")->capture_default_str();
  run->add_option("--gains", gains, "gain file from synth");
  run->add_option("--dataset", dataset, "existing dataset CSV instead of generating one");
  run->add_option("--out", out, "output directory")->capture_default_str();
  run->add_option("--reps", spec.repetitions, "repetitions for timing statistics")->capture_default_str();
  run->add_flag("--parallel", spec.parallel, "run the filters' accuracy passes concurrently");
  run->add_option("--init", init, "triad or exact")->capture_default_str();

  AcceptanceOptions vopt;
  std::string verify_case, verify_gains;
  auto* verify = app.add_subcommand("verify", "run the acceptance criteria");
  verify->add_option("--case", verify_case, "only criteria of this case");
  verify->add_option("--gains", verify_gains, "use this gain file for the filter runs");
  verify->add_flag("--parallel", vopt.parallel, "run independent criteria concurrently");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(gen_args, gen_out);
    if (*synth) return cmd_synth(synth_config, synth_rate, synth_out);
    if (*run) {
      spec.scenario = resolve_scenario(run_args);
      spec.filters = parse_filters(filters);
      spec.gain_file = gains;
      spec.dataset = dataset;
      spec.output_dir = out;
      spec.init = parse_init_mode(init);
      const ComparisonReport r = run_bench(spec);
      std::cout << report_table(r);
      fmt::print("\nwrote {}\n", (fs::path(out) / "report.json").string());
      return 0;
    }
    if (*verify) {
      if (!verify_case.empty()) vopt.only_case = parse_case_id(verify_case);
      vopt.gain_file = verify_gains;
      vopt.log = &std::cout;
      const auto results = run_acceptance(vopt);
      const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
      fmt::print("{} of {} criteria passed\n", results.size() - static_cast<std::size_t>(failed), results.size());
      return failed ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
