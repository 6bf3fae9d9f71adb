#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>
#include <json.hpp>

#include "freegeo/entropy.hpp"
#include "freegeo/gibbs.hpp"
#include "freegeo/lab.hpp"
#include "freegeo/logic.hpp"
#include "freegeo/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace freegeo;

namespace {

struct Common {
  std::string config;
  long seed = -1;
  std::string out;
  std::string format = "json";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "run configuration file");
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--out", c.out, "output directory or file");
  app->add_option("--format", c.format, "report format")->check(CLI::IsMember({"json", "csv"}));
  app->add_option("--set", c.overrides, "key=value override, repeatable");
}

void emit(const json& j, const Common& c, const std::string& stem) {
  if (c.out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  fs::create_directories(c.out);
  const fs::path p = fs::path(c.out) / (stem + ".json");
  std::ofstream(p) << j.dump(2) << "\n";
  std::cout << "wrote " << p.string() << "\n";
}

Potential potential_from(const std::string& text, double c, int m) {
  return text.empty() ? Potential::quadratic(c, m) : Potential::parse(text, c);
}

int run_lab(const std::string& experiment, const Common& c) {
  lab::RunConfig cfg = c.config.empty() ? lab::RunConfig(experiment) : lab::RunConfig::load(c.config, experiment);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw lab::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed >= 0) cfg.set_value("seed", c.seed);
  lab::Report r = lab::run_experiment(cfg);
  if (!c.out.empty()) lab::write_report(r, c.out, c.format);
  for (const auto& m : r.metrics) {
    std::printf("%-40s %-4s value=%.6g target=%.6g tol=%.3g\n", m.name.c_str(), m.pass ? "PASS" : "FAIL", m.value,
                m.target, m.tolerance);
  }
  if (c.out.empty() && c.format == "json") std::cout << r.to_json().dump(2) << "\n";
  return r.all_pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gibbs ensembles, free entropy and transport experiments on matrix tuples"};
  app.require_subcommand(1);
  Common common;

  std::string formula, input, potential;
  int n = 8, m = 1, count = 100, nodes = 16, samples = 300;
  double c = 1.0;
  auto* eval = app.add_subcommand("eval", "evaluate a formula on every tuple of an ensemble file");
  eval->add_option("formula", formula, "formula text")->required();
  eval->add_option("input", input, "ensemble file (.fige)")->required()->check(CLI::ExistingFile);
  add_common(eval, common);

  auto* sample = app.add_subcommand("sample", "sample a Gibbs ensemble and save it");
  sample->add_option("--potential", potential, "quantifier-free potential (default: (c/2)|X|^2)");
  sample->add_option("-c", c, "strong convexity constant");
  sample->add_option("-n", n, "matrix size")->check(CLI::Range(1, 256));
  sample->add_option("-m", m, "number of matrices")->check(CLI::Range(1, 16));
  sample->add_option("--count", count, "number of samples")->check(CLI::PositiveNumber);
  add_common(sample, common);

  auto* entropy = app.add_subcommand("entropy", "normalized entropy by thermodynamic integration");
  entropy->add_option("--potential", potential, "quantifier-free potential (default: (c/2)|X|^2)");
  entropy->add_option("-c", c, "strong convexity constant");
  entropy->add_option("-n", n, "matrix size")->check(CLI::Range(1, 256));
  entropy->add_option("-m", m, "number of matrices")->check(CLI::Range(1, 16));
  entropy->add_option("--nodes", nodes, "quadrature nodes")->check(CLI::PositiveNumber);
  entropy->add_option("--samples", samples, "samples per node")->check(CLI::PositiveNumber);
  add_common(entropy, common);

  std::string a_path, b_path, method = "exact";
  auto* w2 = app.add_subcommand("w2", "empirical W2 between two ensemble files");
  w2->add_option("a", a_path, "first ensemble")->required()->check(CLI::ExistingFile);
  w2->add_option("b", b_path, "second ensemble")->required()->check(CLI::ExistingFile);
  w2->add_option("--method", method)->check(CLI::IsMember({"exact", "sinkhorn"}));
  add_common(w2, common);

  const std::vector<std::pair<std::string, std::string>> experiments = {
      {"counterexample", "finite-n models of the non-embeddable counterexample"},
      {"talagrand", "transport-entropy inequality for tilted Gibbs ensembles"},
      {"geodesic", "entropy sandwich along a Gaussian displacement interpolation"},
      {"moment", "one-dimensional moment-measure fixed point iteration"},
      {"qfconv", "concentration of quantifier-free formulas across matrix sizes"}};
  std::vector<CLI::App*> labs;
  for (const auto& [name, help] : experiments) {
    auto* s = app.add_subcommand(name, help);
    add_common(s, common);
    labs.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const Seed seed{static_cast<std::uint64_t>(common.seed < 0 ? 0 : common.seed), 0};
    if (eval->parsed()) {
      const Formula f = parse(formula);
      const Ensemble e = load_ensemble(input);
      EvalOptions eo;
      eo.seed = seed;
      std::vector<double> v;
      for (const auto& x : e.samples()) v.push_back(evaluate(f, x, eo));
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      emit(json{{"formula", f.to_string()}, {"n", e.n()}, {"m", e.m()}, {"values", v}, {"mean", mean}}, common,
           "eval");
      return 0;
    }
    if (sample->parsed()) {
      const Potential pot = potential_from(potential, c, m);
      SamplerOptions so;
      so.seed = seed;
      const Ensemble e = sample_gibbs(pot, n, m, count, so);
      const auto& d = e.info().diagnostics;
      const fs::path dir = common.out.empty() ? fs::path(".") : fs::path(common.out);
      fs::create_directories(dir);
      const fs::path file = dir / "ensemble.fige";
      save_ensemble(file.string(), e);
      std::cout << json{{"file", file.string()},
                        {"potential", pot.text()},
                        {"acceptance", d.acceptance},
                        {"step", d.step},
                        {"iat", d.iat},
                        {"ess", d.ess},
                        {"burn_in", d.burn_in},
                        {"thin", d.thin}}
                       .dump(2)
                << "\n";
      return 0;
    }
    if (entropy->parsed()) {
      const Potential pot = potential_from(potential, c, m);
      EntropyOptions eo;
      eo.seed = seed;
      eo.nodes = nodes;
      eo.samples = samples;
      const EntropyReport r = gibbs_entropy(pot, n, m, eo);
      json ladder = json::array();
      for (const auto& p : r.ladder) {
        ladder.push_back({{"lambda", p.lambda}, {"weight", p.weight}, {"mean", p.mean_stat}, {"se", p.std_error}});
      }
      json j{{"potential", pot.text()}, {"n", n},           {"m", m},
             {"c", c},                  {"h_n", r.h_n},     {"error_bar", r.error_bar},
             {"log_Z", r.log_Z},        {"ladder", ladder}, {"mean_potential", r.mean_potential}};
      if (potential.empty()) j["h_n_closed_form"] = gaussian_gibbs_entropy(c, m);
      emit(j, common, "entropy");
      return 0;
    }
    if (w2->parsed()) {
      const Ensemble a = load_ensemble(a_path);
      const Ensemble b = load_ensemble(b_path);
      const W2Result r = empirical_w2(a, b, method == "exact" ? W2Method::Exact : W2Method::Sinkhorn);
      emit(json{{"w2", r.w2}, {"cost", r.cost}, {"method", method}, {"regularization", r.regularization},
                {"iterations", r.iterations}},
           common, "w2");
      return 0;
    }
    for (std::size_t i = 0; i < labs.size(); ++i) {
      if (labs[i]->parsed()) return run_lab(experiments[i].first, common);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
