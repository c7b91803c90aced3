#include "attiq/h2_synthesis.hpp"
#include "attiq/json_io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace attiq {

using nlohmann::json;

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string vec_text(const Vec3& v) { return fmt::format("[{}, {}, {}]", num(v.x()), num(v.y()), num(v.z())); }

std::string matrix_text(const Mat6& m, const std::string& indent) {
  std::string s = "[\n";
  for (int r = 0; r < 6; ++r) {
    s += indent + "  [";
    for (int c = 0; c < 6; ++c) s += (c ? ", " : "") + num(m(r, c));
    s += r < 5 ? "],\n" : "]\n";
  }
  return s + indent + "]";
}

Mat6 matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 6) throw GainFileError(where + ": expected 6 rows");
  Mat6 m;
  for (int r = 0; r < 6; ++r) {
    if (!j[r].is_array() || j[r].size() != 6) throw GainFileError(where + ": expected 6 columns in row " + std::to_string(r));
    for (int c = 0; c < 6; ++c) {
      if (!j[r][c].is_number()) throw GainFileError(where + ": non-numeric entry");
      m(r, c) = j[r][c].get<double>();
    }
  }
  if (!m.allFinite()) throw GainFileError(where + ": non-finite entry");
  return m;
}

}  // namespace

std::string gain_file_text(const GainSchedule& s) {
  // Written by hand so every number carries 17 significant digits.
  std::string out = "{\n";
  out += fmt::format("  \"format\": \"{}\",\n", kGainFileFormat);
  out += fmt::format("  \"version\": {},\n", kGainFileVersion);
  const NoiseParams& n = s.noise;
  out += fmt::format(
      "  \"noise\": {{\"gyro_noise\": {}, \"bias_walk\": {}, \"accel_noise\": {}, \"mag_noise\": {}, "
      "\"initial_bias\": {}}},\n",
      num(n.gyro_noise), num(n.bias_walk), num(n.accel_noise), num(n.mag_noise), vec_text(n.initial_bias));
  out += fmt::format("  \"gravity\": {},\n", vec_text(s.reference.gravity));
  out += fmt::format("  \"magnetic_field\": {},\n", vec_text(s.reference.magnetic));
  out += "  \"cz\": " + matrix_text(s.cz, "  ") + ",\n";
  out += "  \"octants\": [\n";
  for (int i = 0; i < kOctantCount; ++i) {
    const Euler p = linearization_point(i + 1);
    out += "    {\n";
    out += fmt::format("      \"index\": {},\n", i + 1);
    out += fmt::format("      \"attitude\": [{}, {}, {}],\n", num(p.roll), num(p.pitch), num(p.yaw));
    out += fmt::format("      \"gamma\": {},\n", num(s.gamma[i]));
    out += fmt::format("      \"care_difference\": {},\n", num(s.care_difference[i]));
    out += "      \"gain\": " + matrix_text(s.gains[i], "      ") + "\n";
    out += i + 1 < kOctantCount ? "    },\n" : "    }\n";
  }
  out += "  ]\n}\n";
  return out;
}

void write_gain_file(const GainSchedule& schedule, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw GainFileError("cannot open " + path.string() + " for writing");
  out << gain_file_text(schedule);
  if (!out) throw GainFileError("write failed: " + path.string());
}

GainSchedule parse_gain_file(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw GainFileError(std::string("gain file is not valid JSON: ") + e.what());
  }
  try {
    require_known_keys(j, {"format", "version", "noise", "gravity", "magnetic_field", "cz", "octants"}, "gain file");
  } catch (const ConfigError& e) {
    throw GainFileError(e.what());
  }
  if (!j.contains("format") || j["format"] != kGainFileFormat) throw GainFileError("gain file: wrong or missing format tag");
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw GainFileError("gain file: missing version");
  if (j["version"].get<int>() != kGainFileVersion)
    throw GainFileError("gain file: schema version " + j["version"].dump() + " is not supported (expected " +
                        std::to_string(kGainFileVersion) + ")");
  for (const char* key : {"noise", "gravity", "magnetic_field", "cz", "octants"})
    if (!j.contains(key)) throw GainFileError(std::string("gain file: missing '") + key + "'");

  GainSchedule s;
  try {
    s.noise = noise_from_json(j["noise"], NoiseParams{});
    s.reference.gravity = vec3_from_json(j["gravity"], "gravity");
    s.reference.magnetic = vec3_from_json(j["magnetic_field"], "magnetic_field");
  } catch (const ConfigError& e) {
    throw GainFileError(std::string("gain file: ") + e.what());
  }
  s.cz = matrix_from_json(j["cz"], "cz");
  const json& oct = j["octants"];
  if (!oct.is_array() || oct.size() != kOctantCount) throw GainFileError("gain file: expected 8 octants");
  for (int i = 0; i < kOctantCount; ++i) {
    const json& o = oct[i];
    const std::string where = "octants[" + std::to_string(i) + "]";
    if (!o.is_object() || !o.contains("index") || !o.contains("gamma") || !o.contains("gain"))
      throw GainFileError("gain file: " + where + " needs index, gamma and gain");
    if (o["index"] != i + 1) throw GainFileError("gain file: " + where + " has index " + o["index"].dump());
    if (!o["gamma"].is_number()) throw GainFileError("gain file: " + where + ".gamma is not a number");
    s.gamma[i] = o["gamma"].get<double>();
    s.care_difference[i] = o.value("care_difference", 0.0);
    s.gains[i] = matrix_from_json(o["gain"], where + ".gain");
  }
  return s;
}

GainSchedule read_gain_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GainFileError("cannot open gain file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_gain_file(ss.str());
}

}  // namespace attiq
