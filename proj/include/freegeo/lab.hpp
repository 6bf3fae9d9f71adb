#pragma once

// Experiment harness: typed flat configs, metric reports with explicit
// targets and verdicts, CSV series, and the batch experiments.

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace freegeo::lab {

inline constexpr int kSchemaVersion = 1;
const char* code_version();

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ValueType { Int, Real, Bool, String, RealList };
using ConfigValue = std::variant<long, double, bool, std::string, std::vector<double>>;

struct KeySpec {
  std::string name;
  ValueType type;
  ConfigValue default_value;
  std::string help;
};

// Schemas for every experiment; the "seed" key is always present.
const std::vector<KeySpec>& experiment_schema(const std::string& experiment);
std::vector<std::string> experiment_names();

class RunConfig {
 public:
  // Defaults of the named experiment.
  explicit RunConfig(std::string experiment);

  // "key = value" lines, '#' comments, lists comma separated. The
  // experiment key selects the schema; a missing experiment uses fallback.
  static RunConfig parse(const std::string& text, const std::string& fallback_experiment = "");
  static RunConfig load(const std::filesystem::path& path, const std::string& fallback_experiment = "");

  const std::string& experiment() const { return experiment_; }
  // Parses and validates a textual value against the schema.
  void set(const std::string& key, const std::string& text);
  void set_value(const std::string& key, ConfigValue v);

  long get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  const std::vector<double>& get_list(const std::string& key) const;

  nlohmann::json to_json() const;
  std::string to_text() const;

 private:
  const KeySpec& spec(const std::string& key) const;
  const ConfigValue& raw(const std::string& key, ValueType t) const;

  std::string experiment_;
  std::map<std::string, ConfigValue> values_;
};

enum class Comparison { Within, AtMost, AtLeast };

struct Metric {
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  Comparison comparison = Comparison::Within;
  std::string provenance;  // where the target comes from
  std::string slack;       // human-readable description of the tolerance
  bool pass = false;
};

// Builds a metric and sets its verdict.
Metric make_metric(std::string name, double value, Comparison cmp, double target, double tolerance,
                   std::string provenance, std::string slack = "");

struct Series {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& c) const;
};

std::string series_to_csv(const Series& s);
Series series_from_csv(const std::string& name, const std::string& text);

struct Report {
  std::string experiment;
  nlohmann::json config;
  std::vector<Metric> metrics;
  std::vector<Series> series;
  std::map<std::string, double> quantities;  // supporting values without a verdict
  std::vector<std::string> notes;
  std::map<std::string, std::string> artifacts;  // series name -> written path

  bool all_pass() const;
  const Metric& metric(const std::string& name) const;
  nlohmann::json to_json() const;
};

// Writes <dir>/<experiment>.json plus one CSV per series, recording the CSV
// paths in the report; csv format also writes <dir>/<experiment>_metrics.csv.
void write_report(Report& report, const std::filesystem::path& dir, const std::string& format = "json");

Report run_counterexample(const RunConfig& cfg);
Report run_talagrand(const RunConfig& cfg);
Report run_geodesic(const RunConfig& cfg);
Report run_moment_fixed_point(const RunConfig& cfg);
Report run_qf_convergence(const RunConfig& cfg);
Report run_experiment(const RunConfig& cfg);

}  // namespace freegeo::lab
