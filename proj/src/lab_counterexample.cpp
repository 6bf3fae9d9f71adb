#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "freegeo/entropy.hpp"
#include "freegeo/lab.hpp"
#include "freegeo/matcore.hpp"
#include "freegeo/transport.hpp"

namespace freegeo::lab {

namespace {

struct Draw {
  MatrixTuple x;
  MatrixTuple y;
};

Matrix normalized_gue(int size, Seed seed, bool normalize) {
  Matrix g = sample_gue(size, seed);
  if (normalize) g /= std::sqrt(normalized_trace(g * g).real());
  return g;
}

Draw draw_models(int k, int l, double eps, bool normalize, bool aligned, Seed seed) {
  const int n = k * l;
  const Matrix g1 = normalized_gue(k, seed.child(1), normalize);
  const Matrix g2 = normalized_gue(k, seed.child(2), normalize);
  const Matrix g3 = normalized_gue(l, seed.child(3), normalize);
  const Matrix ik = Matrix::Identity(k, k);
  const Matrix il = Matrix::Identity(l, l);
  const Matrix a1 = tensor_embed(g1, il).first;
  const Matrix a2 = tensor_embed(g2, il).first;
  const Matrix a3 = tensor_embed(ik, g3).second;
  const Matrix s1 = sample_gue(n, seed.child(4));
  const Matrix s2 = sample_gue(n, seed.child(5));
  const Matrix s3 = sample_gue(n, seed.child(6));
  const double p = std::sqrt(1.0 - eps);
  const double q = std::sqrt(eps);
  std::vector<Matrix> xs = {p * a1 + q * s1, p * a2 + q * s2, p * a3 + q * s3};
  std::vector<Matrix> ys;
  if (aligned) {
    ys = {xs[0], xs[1], eps * s3};
  } else {
    ys = {a1, a2, eps * s3};
  }
  return {MatrixTuple(std::move(xs)), MatrixTuple(std::move(ys))};
}

double commutator_norm(const Matrix& a, const Matrix& b) {
  const Matrix c = a * b - b * a;
  return std::sqrt(c.squaredNorm() / static_cast<double>(c.rows()));
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Upper bound on h^(n) of one free coordinate of Y (self-adjoint convention):
// the Gaussian entropy with the same covariance. In tr_n coordinates the
// k^2 directions of the tensor block carry (1-eps)/k^2 + eps/n^2 and the
// rest eps/n^2.
double gaussian_bound_free_coordinate(int k, int n, double eps) {
  const double n2 = static_cast<double>(n) * n;
  const double k2 = static_cast<double>(k) * k;
  const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  const double big = (1.0 - eps) / k2 + eps / n2;
  const double small = eps / n2;
  const double h = 0.5 * k2 * std::log(two_pi_e * big) + 0.5 * (n2 - k2) * std::log(two_pi_e * small);
  return h / n2 + std::log(static_cast<double>(n));
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

}  // namespace

Report run_counterexample(const RunConfig& cfg) {
  const double eps = cfg.get_real("epsilon");
  const long k = cfg.get_int("k");
  const long l = cfg.get_int("l");
  const long samples = cfg.get_int("samples");
  const bool normalize = cfg.get_bool("normalize_factors");
  const std::string coupling = cfg.get_string("coupling");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (k < 1 || l < 1 || k * l > 256) throw ConfigError("need k, l >= 1 and k*l <= 256");
  if (samples < 1) throw ConfigError("samples must be positive");
  if (coupling != "aligned" && coupling != "literal") throw ConfigError("coupling must be aligned or literal");
  const bool aligned = coupling == "aligned";
  const int n = static_cast<int>(k * l);
  const Seed root{static_cast<std::uint64_t>(cfg.get_int("seed")), 0};

  Report r;
  r.experiment = "counterexample";
  r.config = cfg.to_json();

  Series per{"samples", {"draw", "commutator_13", "commutator_23", "distance_sq", "spectral_w2", "op_norm"}, {}};
  std::vector<double> c13, c23, d2, sw, ops;
  for (long i = 0; i < samples; ++i) {
    const Draw dr = draw_models(static_cast<int>(k), static_cast<int>(l), eps, normalize, aligned,
                                root.child(static_cast<std::uint64_t>(i)));
    c13.push_back(commutator_norm(dr.x[0], dr.x[2]));
    c23.push_back(commutator_norm(dr.x[1], dr.x[2]));
    d2.push_back((dr.x - dr.y).squared_norm());
    sw.push_back(spectral_w2_1d(dr.x[2], dr.y[2]));
    ops.push_back(std::max(operator_norm(dr.x), operator_norm(dr.y)));
    per.rows.push_back({static_cast<double>(i), c13.back(), c23.back(), d2.back(), sw.back(), ops.back()});
  }
  r.series.push_back(per);

  const double tw = 1.0 + 5.0 * std::pow(static_cast<double>(n), -2.0 / 3.0);
  const double comm_bound = 24.0 * std::sqrt(eps) * tw;
  const std::string comm_slack = "finite-n operator norm slack factor (1 + 5 n^(-2/3)) = " + fmt(tw);
  r.metrics.push_back(make_metric("commutator_13", mean(c13), Comparison::AtMost, comm_bound, 0.0,
                                  "operator-norm bound 24 eps^(1/2)", comm_slack));
  r.metrics.push_back(make_metric("commutator_23", mean(c23), Comparison::AtMost, comm_bound, 0.0,
                                  "operator-norm bound 24 eps^(1/2)", comm_slack));

  const double dist = std::sqrt(mean(d2));
  const double dist_target = std::sqrt(1.0 - 2.0 * std::pow(eps, 1.5) + eps * eps);
  r.metrics.push_back(make_metric("coupled_distance", dist, Comparison::Within, dist_target, 0.01,
                                  "analytic coupling distance", "Monte Carlo tolerance 0.01"));
  r.metrics.push_back(make_metric("spectral_lower_bound", mean(sw), Comparison::AtLeast, 1.0 - eps, 0.02,
                                  "Wasserstein lower bound 1 - eps", "finite-n slack 0.02"));

  // Entropy deficit of Y against chi(nu), lower-bounded through Gaussian
  // upper bounds on h^(n)(Y_j); a larger a only increases the left side.
  const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  const double chi_stated = 1.5 * std::log(two_pi_e) + 0.5 * std::log(eps);
  const double chi_consistent = 1.5 * std::log(two_pi_e) + std::log(eps);
  const double h_y3 = semicircular_entropy(eps * eps);  // exact: eps S3' is Gaussian
  const double h_y12 = aligned ? 2.0 * gaussian_bound_free_coordinate(static_cast<int>(k), n, eps)
                               : -std::numeric_limits<double>::infinity();  // supported on a subspace
  const double h_upper = h_y12 + h_y3;
  const double a_stated = chi_stated - h_upper;
  const double a_consistent = chi_consistent - h_upper;
  const double R = *std::max_element(ops.begin(), ops.end());
  const double rhs = std::pow(eps, 0.25);
  auto lhs = [&](double a, double b) {
    return std::exp(0.5 * a) * ((25.0 + 6.0 * R) * std::sqrt(eps) + 2.0 * R * std::sqrt(b));
  };
  const double dsq = mean(d2);
  const double b_lower = std::max(0.0, dsq - std::pow(1.0 - eps, 2));
  const double b_upper = std::max(0.0, dsq - std::pow(1.0 - std::pow(eps, 1.5), 2));
  r.metrics.push_back(make_metric("uncertainty_bracket_low", lhs(a_stated, b_lower), Comparison::AtLeast, rhs, 0.0,
                                  "uncertainty inequality, d = 1 - eps", "none"));
  r.metrics.push_back(make_metric("uncertainty_bracket_high", lhs(a_stated, b_upper), Comparison::AtLeast, rhs, 0.0,
                                  "uncertainty inequality, d = 1 - eps^(3/2)", "none"));
  r.quantities["R"] = R;
  r.quantities["a"] = a_stated;
  r.quantities["a_consistent_chi"] = a_consistent;
  r.quantities["b_bracket_low"] = b_lower;
  r.quantities["b_bracket_high"] = b_upper;
  r.quantities["h_upper_Y"] = h_upper;
  r.quantities["chi_nu"] = chi_stated;
  r.quantities["chi_nu_consistent"] = chi_consistent;
  r.quantities["uncertainty_rhs"] = rhs;
  r.quantities["uncertainty_lhs_consistent_low"] = lhs(a_consistent, b_lower);
  r.quantities["uncertainty_lhs_consistent_high"] = lhs(a_consistent, b_upper);
  r.quantities["coupled_distance_sq"] = dsq;
  r.quantities["n"] = n;
  r.notes.push_back("coupling " + coupling + ": Y = " +
                    (aligned ? std::string("(X1, X2, eps S3')") : std::string("(A1, A2, eps S3')")));
  r.notes.push_back("chi(nu) uses (3/2) log 2 pi e + (1/2) log eps; with Y3 = eps S3' the scaling gives log eps, "
                    "reported as chi_nu_consistent");
  r.notes.push_back("a is a lower bound: h(Y) <= sum of Gaussian entropies with matching covariance");

  if (cfg.get_bool("scaling")) {
    const auto& epsilons = cfg.get_list("scaling_epsilons");
    const long per_eps = cfg.get_int("scaling_samples");
    if (epsilons.size() < 2) throw ConfigError("scaling needs at least two epsilons");
    Series sc{"scaling", {"epsilon", "mean_commutator_13"}, {}};
    std::vector<double> lx, ly;
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
      const double ee = epsilons[e];
      if (!(ee > 0.0 && ee < 1.0)) throw ConfigError("scaling epsilons must lie in (0, 1)");
      std::vector<double> vals;
      for (long i = 0; i < per_eps; ++i) {
        const Draw dr = draw_models(static_cast<int>(k), static_cast<int>(l), ee, normalize, aligned,
                                    root.child(1000000 + e * 10000 + static_cast<std::uint64_t>(i)));
        vals.push_back(commutator_norm(dr.x[0], dr.x[2]));
      }
      sc.rows.push_back({ee, mean(vals)});
      lx.push_back(std::log(ee));
      ly.push_back(std::log(mean(vals)));
    }
    const double mx = mean(lx), my = mean(ly);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    r.metrics.push_back(make_metric("commutator_scaling_slope", sxy / sxx, Comparison::Within, 0.5, 0.1,
                                    "least-squares fit of log commutator against log eps", "slope tolerance 0.1"));
    r.series.push_back(sc);
  }
  return r;
}

}  // namespace freegeo::lab
