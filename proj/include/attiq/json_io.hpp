#pragma once

// JSON mapping for configuration types. Parsing is strict: unknown keys are
// rejected by name so typos in config files surface immediately.

#include "attiq/sensor_sim.hpp"

#include <json.hpp>

#include <initializer_list>
#include <stdexcept>
#include <string>

namespace attiq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws ConfigError if `j` is not an object or has a key outside `allowed`.
void require_known_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                        const std::string& where);

nlohmann::json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j, const std::string& where);

nlohmann::json to_json(const NoiseParams& n);
/// Missing keys keep the values already in `base`.
NoiseParams noise_from_json(const nlohmann::json& j, NoiseParams base = NoiseParams::mpu9250());

nlohmann::json to_json(const ScenarioConfig& c);
/// Requires "case"; other keys default to ScenarioConfig::defaults(case).
/// Validates the result.
ScenarioConfig scenario_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::filesystem::path& path);

}  // namespace attiq
