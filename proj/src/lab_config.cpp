#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "freegeo/lab.hpp"

namespace freegeo::lab {

const char* code_version() { return "0.1.0"; }

namespace {

using V = ValueType;

std::vector<KeySpec> with_seed(std::vector<KeySpec> keys, long seed) {
  keys.push_back({"seed", V::Int, seed, "master seed; every random stream derives from it"});
  keys.push_back({"experiment", V::String, std::string(), "experiment name"});
  return keys;
}

const std::map<std::string, std::vector<KeySpec>>& schemas() {
  static const std::map<std::string, std::vector<KeySpec>> s = {
      {"counterexample",
       with_seed({{"epsilon", V::Real, 0.01, "mixing parameter in (0, 1)"},
                  {"k", V::Int, 8L, "size of the free factor block"},
                  {"l", V::Int, 8L, "size of the tensor factor block"},
                  {"samples", V::Int, 50L, "number of model draws"},
                  {"normalize_factors", V::Bool, true, "rescale GUE factors to tr(G^2) = 1"},
                  {"coupling", V::String, std::string("aligned"),
                   "aligned: Y = (X1, X2, eps S3'); literal: Y = (A1, A2, eps S3')"},
                  {"scaling", V::Bool, true, "fit the commutator scaling in epsilon"},
                  {"scaling_epsilons", V::RealList, std::vector<double>{0.04, 0.01, 0.0025}, "epsilons for the fit"},
                  {"scaling_samples", V::Int, 10L, "draws per epsilon in the fit"}},
                 2024)},
      {"talagrand",
       with_seed({{"potential", V::String, std::string(), "quantifier-free formula; empty means (c/2)|X|^2"},
                  {"c", V::Real, 1.0, "strong convexity constant"},
                  {"quartic", V::Real, 0.0, "weight of re tr((x_j' x_j)^2) added to every coordinate"},
                  {"tilt", V::RealList, std::vector<double>{1.0}, "real parts of the linear tilt, one per coordinate"},
                  {"tilt_imag", V::RealList, std::vector<double>{}, "imaginary parts of the tilt (empty: zero)"},
                  {"n", V::Int, 8L, "matrix size"},
                  {"m", V::Int, 1L, "number of matrices"},
                  {"samples", V::Int, 200L, "samples per ensemble"},
                  {"nodes", V::Int, 8L, "Gauss-Legendre nodes for the tilt integral"},
                  {"seeds", V::Int, 1L, "repetitions with derived seeds"},
                  {"coupling_step_factor", V::Real, 0.25, "MALA step of the coupled chains relative to the tuned step"}},
                 7)},
      {"geodesic",
       with_seed({{"dimension", V::Int, 1L, "real dimension, 1 to 4"},
                  {"cov0", V::RealList, std::vector<double>{}, "row-major covariance of the source (empty: default)"},
                  {"cov1", V::RealList, std::vector<double>{}, "row-major covariance of the target (empty: default)"},
                  {"grid", V::RealList, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9},
                   "interpolation times"},
                  {"samples", V::Int, 5000L, "cloud size for the k-NN estimates"},
                  {"knn_k", V::Int, 1L, "neighbour index for the k-NN estimator"},
                  {"tolerance", V::Real, 0.05, "slack on both sides of the sandwich"}},
                 11)},
      {"moment",
       with_seed({{"mu", V::String, std::string("delta0"), "delta0, normal or atoms"},
                  {"atoms", V::RealList, std::vector<double>{}, "support of mu when mu = atoms"},
                  {"atom_count", V::Int, 200L, "quantile atoms when mu = normal"},
                  {"t", V::Real, 1.0, "weight of the quadratic term"},
                  {"iterations", V::Int, 40L, "alternating steps"},
                  {"grid_points", V::Int, 4001L, "grid size for nu"},
                  {"grid_half_width", V::Real, 0.0, "grid is [-w, w]; 0 picks 10/sqrt(t) plus the support"},
                  {"damping", V::Real, 1.0, "weight of the new Gibbs measure in each update"},
                  {"tolerance", V::Real, 0.01, "W2 tolerance for the Gaussian fixed point"},
                  {"monotone_tolerance", V::Real, 0.02, "allowed decrease of the objective per step"}},
                 13)},
      {"qfconv",
       with_seed({{"potential", V::String, std::string(), "quantifier-free formula; empty means (c/2)|X|^2"},
                  {"c", V::Real, 1.0, "strong convexity constant"},
                  {"m", V::Int, 1L, "number of matrices"},
                  {"n_ladder", V::RealList, std::vector<double>{4, 8, 16, 32}, "matrix sizes"},
                  {"samples", V::Int, 60L, "samples per size"},
                  {"formulas", V::String, std::string("re tr(x1*x1'); re tr(x1*x1'*x1*x1'); 1.0"),
                   "formulas separated by ';'"},
                  {"rate_ratio", V::Real, 3.0, "max/min of n times the std allowed"}},
                 17)},
  };
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& key, std::string_view t) {
  double v = 0.0;
  const std::string s = trim(t);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw ConfigError("key '" + key + "' expects a real number, got '" + s + "'");
  }
  return v;
}

ConfigValue parse_value(const KeySpec& spec, const std::string& text) {
  const std::string s = trim(text);
  switch (spec.type) {
    case V::Int: {
      long v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
        throw ConfigError("key '" + spec.name + "' expects an integer, got '" + s + "'");
      }
      return v;
    }
    case V::Real:
      return parse_real(spec.name, s);
    case V::Bool: {
      std::string l = s;
      std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
      if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
      if (l == "false" || l == "0" || l == "no" || l == "off") return false;
      throw ConfigError("key '" + spec.name + "' expects a boolean, got '" + s + "'");
    }
    case V::String: {
      if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
      return s;
    }
    case V::RealList: {
      std::string body = s;
      if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
      std::vector<double> out;
      if (trim(body).empty()) return out;
      std::stringstream ss(body);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(parse_real(spec.name, item));
      return out;
    }
  }
  throw ConfigError("unknown value type");
}

std::string format_value(const ConfigValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return x;
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          std::string out;
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (i) out += ", ";
            char buf[32];
            auto r = std::to_chars(buf, buf + sizeof(buf), x[i]);
            out.append(buf, r.ptr);
          }
          return out;
        } else {
          char buf[32];
          auto r = std::to_chars(buf, buf + sizeof(buf), x);
          return std::string(buf, r.ptr);
        }
      },
      v);
}

}  // namespace

const std::vector<KeySpec>& experiment_schema(const std::string& experiment) {
  const auto it = schemas().find(experiment);
  if (it == schemas().end()) throw ConfigError("unknown experiment '" + experiment + "'");
  return it->second;
}

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : schemas()) out.push_back(k);
  return out;
}

RunConfig::RunConfig(std::string experiment) : experiment_(std::move(experiment)) {
  for (const auto& k : experiment_schema(experiment_)) values_[k.name] = k.default_value;
  values_["experiment"] = experiment_;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& fallback_experiment) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string experiment = fallback_experiment;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (key == "experiment") {
      if (!fallback_experiment.empty() && val != fallback_experiment) {
        throw ConfigError("config is for experiment '" + val + "', not '" + fallback_experiment + "'");
      }
      experiment = val;
      continue;
    }
    entries.emplace_back(std::move(key), std::move(val));
  }
  if (experiment.empty()) throw ConfigError("config does not name an experiment");
  RunConfig cfg(experiment);
  for (const auto& [k, v] : entries) cfg.set(k, v);
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const std::string& fallback_experiment) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), fallback_experiment);
}

const KeySpec& RunConfig::spec(const std::string& key) const {
  for (const auto& k : experiment_schema(experiment_)) {
    if (k.name == key) return k;
  }
  throw ConfigError("unknown key '" + key + "' for experiment '" + experiment_ + "'");
}

void RunConfig::set(const std::string& key, const std::string& text) {
  if (key == "experiment") throw ConfigError("the experiment key cannot be overridden");
  values_[key] = parse_value(spec(key), text);
}

void RunConfig::set_value(const std::string& key, ConfigValue v) {
  const KeySpec& s = spec(key);
  if (v.index() != s.default_value.index()) throw ConfigError("wrong value type for key '" + key + "'");
  values_[key] = std::move(v);
}

const ConfigValue& RunConfig::raw(const std::string& key, ValueType t) const {
  const KeySpec& s = spec(key);
  if (s.type != t) throw ConfigError("key '" + key + "' has a different type");
  return values_.at(key);
}

long RunConfig::get_int(const std::string& key) const { return std::get<long>(raw(key, V::Int)); }
double RunConfig::get_real(const std::string& key) const { return std::get<double>(raw(key, V::Real)); }
bool RunConfig::get_bool(const std::string& key) const { return std::get<bool>(raw(key, V::Bool)); }
const std::string& RunConfig::get_string(const std::string& key) const {
  return std::get<std::string>(raw(key, V::String));
}
const std::vector<double>& RunConfig::get_list(const std::string& key) const {
  return std::get<std::vector<double>>(raw(key, V::RealList));
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) {
    std::visit([&](const auto& x) { j[k] = x; }, v);
  }
  return j;
}

std::string RunConfig::to_text() const {
  std::string out = "experiment = " + experiment_ + "\n";
  for (const auto& [k, v] : values_) {
    if (k == "experiment") continue;
    out += k + " = " + format_value(v) + "\n";
  }
  return out;
}

}  // namespace freegeo::lab
