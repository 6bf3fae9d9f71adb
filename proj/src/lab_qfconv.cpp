#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "freegeo/gibbs.hpp"
#include "freegeo/lab.hpp"

namespace freegeo::lab {

Report run_qf_convergence(const RunConfig& cfg) {
  const double c = cfg.get_real("c");
  const long m = cfg.get_int("m");
  const long count = cfg.get_int("samples");
  if (m < 1 || count < 2) throw ConfigError("need m >= 1 and samples >= 2");
  const std::string& text = cfg.get_string("potential");
  const Potential pot = text.empty() ? Potential::quadratic(c, static_cast<int>(m)) : Potential::parse(text, c);

  std::vector<int> ladder;
  for (double v : cfg.get_list("n_ladder")) {
    if (v < 1 || v != std::floor(v) || v > 256) throw ConfigError("n_ladder entries must be integers in [1, 256]");
    ladder.push_back(static_cast<int>(v));
  }
  if (ladder.size() < 2) throw ConfigError("n_ladder needs at least two sizes");
  std::sort(ladder.begin(), ladder.end());

  std::vector<Formula> formulas;
  std::vector<std::string> texts;
  {
    std::stringstream ss(cfg.get_string("formulas"));
    std::string item;
    while (std::getline(ss, item, ';')) {
      const auto b = item.find_first_not_of(" \t");
      if (b == std::string::npos) continue;
      Formula f = parse(item.substr(b));
      if (!f.quantifier_free()) throw ConfigError("qfconv formulas must be quantifier-free");
      if (f.free_arity() > m) throw ConfigError("formula uses more variables than m");
      texts.push_back(f.to_string());
      formulas.push_back(std::move(f));
    }
  }
  if (formulas.empty()) throw ConfigError("no formulas given");

  Report r;
  r.experiment = "qfconv";
  r.config = cfg.to_json();
  Series ser{"std", {"n"}, {}};
  for (std::size_t f = 0; f < formulas.size(); ++f) {
    ser.columns.push_back("mean_" + std::to_string(f + 1));
    ser.columns.push_back("std_" + std::to_string(f + 1));
  }
  std::vector<std::vector<double>> stds(formulas.size());
  const Seed root{static_cast<std::uint64_t>(cfg.get_int("seed")), 0};
  for (int n : ladder) {
    SamplerOptions so;
    so.seed = root.child(static_cast<std::uint64_t>(n));
    const Ensemble e = sample_gibbs(pot, n, static_cast<int>(m), static_cast<int>(count), so);
    std::vector<double> row{static_cast<double>(n)};
    for (std::size_t f = 0; f < formulas.size(); ++f) {
      std::vector<double> v;
      for (const auto& x : e.samples()) v.push_back(evaluate(formulas[f], x));
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double var = 0.0;
      for (double s : v) var += (s - mean) * (s - mean);
      const double sd = std::sqrt(var / static_cast<double>(v.size() - 1));
      row.push_back(mean);
      row.push_back(sd);
      stds[f].push_back(sd);
    }
    ser.rows.push_back(row);
  }
  r.series.push_back(ser);

  const double ratio_cap = cfg.get_real("rate_ratio");
  for (std::size_t f = 0; f < formulas.size(); ++f) {
    const std::string tag = "formula_" + std::to_string(f + 1);
    r.notes.push_back(tag + ": " + texts[f]);
    r.metrics.push_back(make_metric(tag + "_std_decay", stds[f].back(), Comparison::AtMost, stds[f].front(), 0.0,
                                    "concentration: spread shrinks with n", "none"));
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
      const double scaled = stds[f][k] * ladder[k];
      lo = std::min(lo, scaled);
      hi = std::max(hi, scaled);
    }
    // A constant formula has no spread at all; its rate check is trivial.
    const double ratio = hi <= 1e-13 ? 1.0 : hi / lo;
    r.metrics.push_back(make_metric(tag + "_rate_ratio", ratio, Comparison::AtMost, ratio_cap, 0.0,
                                    "Herbst rate: std of order 1/n", "max/min of n * std across the ladder"));
  }
  return r;
}

}  // namespace freegeo::lab
