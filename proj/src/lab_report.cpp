#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "freegeo/lab.hpp"

namespace freegeo::lab {

namespace {

const char* comparison_name(Comparison c) {
  switch (c) {
    case Comparison::Within:
      return "within";
    case Comparison::AtMost:
      return "at_most";
    case Comparison::AtLeast:
      return "at_least";
  }
  return "?";
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// JSON has no infinities; encode them as strings.
nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

}  // namespace

Metric make_metric(std::string name, double value, Comparison cmp, double target, double tolerance,
                   std::string provenance, std::string slack) {
  Metric m{std::move(name), value, target, tolerance, cmp, std::move(provenance), std::move(slack), false};
  if (std::isnan(value)) {
    m.pass = false;
    return m;
  }
  switch (cmp) {
    case Comparison::Within:
      m.pass = std::abs(value - target) <= tolerance;
      break;
    case Comparison::AtMost:
      m.pass = value <= target + tolerance;
      break;
    case Comparison::AtLeast:
      m.pass = value >= target - tolerance;
      break;
  }
  return m;
}

std::vector<double> Series::column(const std::string& c) const {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] != c) continue;
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.at(k));
    return out;
  }
  throw std::out_of_range("no column '" + c + "' in series '" + name + "'");
}

std::string series_to_csv(const Series& s) {
  std::string out;
  for (std::size_t k = 0; k < s.columns.size(); ++k) out += (k ? "," : "") + s.columns[k];
  out += "\n";
  for (const auto& r : s.rows) {
    for (std::size_t k = 0; k < r.size(); ++k) out += (k ? "," : "") + fmt(r[k]);
    out += "\n";
  }
  return out;
}

Series series_from_csv(const std::string& name, const std::string& text) {
  Series s;
  s.name = name;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty CSV");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) s.columns.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell == "inf") {
        row.push_back(INFINITY);
      } else if (cell == "-inf") {
        row.push_back(-INFINITY);
      } else if (cell == "nan") {
        row.push_back(NAN);
      } else {
        double v = 0.0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || p != cell.data() + cell.size()) {
          throw std::invalid_argument("bad CSV cell '" + cell + "'");
        }
        row.push_back(v);
      }
    }
    if (row.size() != s.columns.size()) throw std::invalid_argument("CSV row width differs from header");
    s.rows.push_back(std::move(row));
  }
  return s;
}

bool Report::all_pass() const {
  for (const auto& m : metrics) {
    if (!m.pass) return false;
  }
  return true;
}

const Metric& Report::metric(const std::string& name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return m;
  }
  throw std::out_of_range("no metric '" + name + "'");
}

nlohmann::json Report::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["code_version"] = code_version();
  j["experiment"] = experiment;
  j["config"] = config;
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : metrics) {
    ms.push_back({{"name", m.name},
                  {"value", number(m.value)},
                  {"target", number(m.target)},
                  {"tolerance", number(m.tolerance)},
                  {"comparison", comparison_name(m.comparison)},
                  {"provenance", m.provenance},
                  {"slack", m.slack},
                  {"pass", m.pass}});
  }
  j["metrics"] = ms;
  j["pass"] = all_pass();
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [k, v] : quantities) q[k] = number(v);
  j["quantities"] = q;
  j["notes"] = notes;
  nlohmann::json series_j = nlohmann::json::object();
  for (const auto& s : series) {
    nlohmann::json entry = {{"columns", s.columns}, {"rows", s.rows.size()}};
    if (auto it = artifacts.find(s.name); it != artifacts.end()) entry["path"] = it->second;
    series_j[s.name] = entry;
  }
  j["series"] = series_j;
  return j;
}

void write_report(Report& report, const std::filesystem::path& dir, const std::string& format) {
  if (format != "json" && format != "csv") throw std::invalid_argument("format must be json or csv");
  std::filesystem::create_directories(dir);
  auto write_file = [](const std::filesystem::path& p, const std::string& body) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << body;
  };
  for (const auto& s : report.series) {
    const auto p = dir / (report.experiment + "_" + s.name + ".csv");
    write_file(p, series_to_csv(s));
    report.artifacts[s.name] = p.string();
  }
  if (format == "csv") {
    std::string body = "name,value,target,tolerance,comparison,pass,provenance\n";
    for (const auto& m : report.metrics) {
      body += m.name + "," + fmt(m.value) + "," + fmt(m.target) + "," + fmt(m.tolerance) + "," +
              comparison_name(m.comparison) + "," + (m.pass ? "PASS" : "FAIL") + "," + m.provenance + "\n";
    }
    const auto p = dir / (report.experiment + "_metrics.csv");
    write_file(p, body);
    report.artifacts["metrics"] = p.string();
  }
  write_file(dir / (report.experiment + ".json"), report.to_json().dump(2) + "\n");
}

Report run_experiment(const RunConfig& cfg) {
  const std::string& e = cfg.experiment();
  if (e == "counterexample") return run_counterexample(cfg);
  if (e == "talagrand") return run_talagrand(cfg);
  if (e == "geodesic") return run_geodesic(cfg);
  if (e == "moment") return run_moment_fixed_point(cfg);
  if (e == "qfconv") return run_qf_convergence(cfg);
  throw ConfigError("unknown experiment '" + e + "'");
}

}  // namespace freegeo::lab
