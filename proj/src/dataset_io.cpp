#include "attiq/json_io.hpp"
#include "attiq/sensor_sim.hpp"

#include <fmt/format.h>

#include <array>
#include <charconv>
#include <fstream>
#include <string>

namespace attiq {

namespace {

constexpr int kColumns = 17;
constexpr int kDatasetVersion = 1;

void append(std::string& line, double v) {
  fmt::format_to(std::back_inserter(line), "{:.17g}", v);
}

bool parse_row(const std::string& line, std::array<double, kColumns>& out, int& fields) {
  fields = 0;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p <= end) {
    const char* comma = p;
    while (comma < end && *comma != ',') ++comma;
    const char* b = p;
    const char* e = comma;
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    if (fields < kColumns) {
      const auto res = std::from_chars(b, e, out[fields]);
      if (res.ec != std::errc() || res.ptr != e) return false;
    }
    ++fields;
    if (comma == end) break;
    p = comma + 1;
  }
  return true;
}

std::string strip_spaces(const std::string& s) {
  std::string r;
  for (char c : s)
    if (c != ' ' && c != '\t' && c != '\r') r.push_back(c);
  return r;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".json");
  return p;
}

void write_dataset(const Dataset& data, const std::filesystem::path& csv) {
  if (data.samples.size() != data.truth.size())
    throw DatasetError("samples and truth have different lengths");
  std::ofstream out(csv, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open " + csv.string() + " for writing");
  out << kDatasetHeader << '\n';
  std::string line;
  for (std::size_t k = 0; k < data.samples.size(); ++k) {
    const SensorSample& s = data.samples[k];
    const TruthState& t = data.truth[k];
    line.clear();
    const std::array<double, kColumns> row{s.t,      s.w_m.x(), s.w_m.y(), s.w_m.z(), s.a_m.x(), s.a_m.y(),
                                           s.a_m.z(), s.m_m.x(), s.m_m.y(), s.m_m.z(), t.q.x(),   t.q.y(),
                                           t.q.z(),   t.q.w(),   t.b.x(),   t.b.y(),   t.b.z()};
    for (int i = 0; i < kColumns; ++i) {
      if (i) line.push_back(',');
      append(line, row[i]);
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw DatasetError("write failed: " + csv.string());

  nlohmann::json side{{"format", "attiq-dataset"},
                      {"version", kDatasetVersion},
                      {"rows", data.samples.size()},
                      {"config", to_json(data.config)}};
  std::ofstream js(sidecar_path(csv), std::ios::binary | std::ios::trunc);
  if (!js) throw DatasetError("cannot open " + sidecar_path(csv).string() + " for writing");
  js << side.dump(2) << '\n';
  if (!js) throw DatasetError("write failed: " + sidecar_path(csv).string());
}

Dataset read_dataset(const std::filesystem::path& csv) {
  Dataset d;
  std::size_t expected_rows = 0;
  try {
    const nlohmann::json side = load_json_file(sidecar_path(csv));
    require_known_keys(side, {"format", "version", "rows", "config"}, "dataset sidecar");
    if (side.value("format", "") != "attiq-dataset") throw DatasetError("sidecar: not an attiq dataset");
    if (side.value("version", 0) != kDatasetVersion)
      throw DatasetError("sidecar: unsupported version " + side.value("version", nlohmann::json()).dump());
    if (!side.contains("rows") || !side["rows"].is_number_unsigned())
      throw DatasetError("sidecar: missing row count");
    expected_rows = side["rows"].get<std::size_t>();
    if (!side.contains("config")) throw DatasetError("sidecar: missing config");
    d.config = scenario_from_json(side["config"]);
  } catch (const ConfigError& e) {
    throw DatasetError(std::string("sidecar: ") + e.what());
  }

  std::ifstream in(csv, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("empty file: " + csv.string());
  if (strip_spaces(line) != kDatasetHeader) throw DatasetError("malformed header: '" + line + "'");

  d.samples.reserve(expected_rows);
  d.truth.reserve(expected_rows);
  std::array<double, kColumns> v{};
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (strip_spaces(line).empty()) continue;
    int fields = 0;
    const bool ok = parse_row(line, v, fields);
    if (fields != kColumns)
      throw DatasetError("expected " + std::to_string(kColumns) + " columns, found " + std::to_string(fields), row);
    if (!ok) throw DatasetError("non-numeric field", row);
    SensorSample s;
    s.t = v[0];
    s.w_m = Vec3(v[1], v[2], v[3]);
    s.a_m = Vec3(v[4], v[5], v[6]);
    s.m_m = Vec3(v[7], v[8], v[9]);
    TruthState t;
    t.t = v[0];
    t.q = Quaternion(v[10], v[11], v[12], v[13]);
    t.b = Vec3(v[14], v[15], v[16]);
    t.w = truth_rate(d.config, t.t);
    d.samples.push_back(s);
    d.truth.push_back(t);
  }
  if (d.samples.size() != expected_rows)
    throw DatasetError("row count mismatch: sidecar says " + std::to_string(expected_rows) + ", file has " +
                       std::to_string(d.samples.size()));
  return d;
}

}  // namespace attiq
