#include "attiq/json_io.hpp"

#include <fstream>
#include <sstream>

namespace attiq {

using nlohmann::json;

void require_known_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError(where + ": expected an array of 3 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

namespace {

double number(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j[key].get<double>();
}

}  // namespace

json to_json(const NoiseParams& n) {
  return json{{"gyro_noise", n.gyro_noise},
              {"bias_walk", n.bias_walk},
              {"accel_noise", n.accel_noise},
              {"mag_noise", n.mag_noise},
              {"initial_bias", vec3_to_json(n.initial_bias)}};
}

NoiseParams noise_from_json(const json& j, NoiseParams base) {
  require_known_keys(j, {"gyro_noise", "bias_walk", "accel_noise", "mag_noise", "initial_bias"}, "noise");
  NoiseParams n = base;
  n.gyro_noise = number(j, "gyro_noise", n.gyro_noise, "noise");
  n.bias_walk = number(j, "bias_walk", n.bias_walk, "noise");
  n.accel_noise = number(j, "accel_noise", n.accel_noise, "noise");
  n.mag_noise = number(j, "mag_noise", n.mag_noise, "noise");
  if (j.contains("initial_bias")) n.initial_bias = vec3_from_json(j["initial_bias"], "noise.initial_bias");
  try {
    n.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return n;
}

json to_json(const ScenarioConfig& c) {
  return json{{"case", std::string(to_string(c.case_id))},
              {"duration", c.duration},
              {"sample_rate", c.sample_rate},
              {"angular_rate", c.angular_rate},
              {"seed", c.seed},
              {"noise", to_json(c.noise)},
              {"gravity", vec3_to_json(c.reference.gravity)},
              {"magnetic_field", vec3_to_json(c.reference.magnetic)}};
}

ScenarioConfig scenario_from_json(const json& j) {
  require_known_keys(j, {"case", "duration", "sample_rate", "angular_rate", "seed", "noise", "gravity",
                         "magnetic_field"},
                     "scenario");
  if (!j.contains("case") || !j["case"].is_string()) throw ConfigError("scenario.case: required string");
  ScenarioConfig c;
  try {
    c = ScenarioConfig::defaults(parse_case_id(j["case"].get<std::string>()));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario.case: ") + e.what());
  }
  c.duration = number(j, "duration", c.duration, "scenario");
  const double default_rate = c.sample_rate;
  c.sample_rate = number(j, "sample_rate", c.sample_rate, "scenario");
  if (c.sample_rate != default_rate && c.sample_rate > 0.0) c.noise = NoiseParams::mpu9250(c.sample_rate);
  c.angular_rate = number(j, "angular_rate", c.angular_rate, "scenario");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      throw ConfigError("scenario.seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("noise")) c.noise = noise_from_json(j["noise"], c.noise);
  if (j.contains("gravity")) c.reference.gravity = vec3_from_json(j["gravity"], "scenario.gravity");
  if (j.contains("magnetic_field"))
    c.reference.magnetic = vec3_from_json(j["magnetic_field"], "scenario.magnetic_field");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  return c;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace attiq
