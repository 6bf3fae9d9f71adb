#include <cmath>
#include <limits>
#include <set>

#include "freegeo/entropy.hpp"
#include "freegeo/lab.hpp"
#include "freegeo/matcore.hpp"

namespace freegeo::lab {

namespace {

Eigen::MatrixXd covariance_from(const std::vector<double>& v, int d, const char* key) {
  if (v.size() != static_cast<std::size_t>(d * d)) {
    throw ConfigError(std::string(key) + " needs dimension^2 entries");
  }
  Eigen::MatrixXd s(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) s(i, j) = v[static_cast<std::size_t>(i * d + j)];
  }
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ConfigError(std::string(key) + " is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw ConfigError(std::string(key) + " is not positive definite");
  return s;
}

// Optimal map between centred Gaussians: S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}.
Eigen::MatrixXd gaussian_map(const Eigen::MatrixXd& s0, const Eigen::MatrixXd& s1) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e0(s0);
  const Eigen::MatrixXd r = e0.operatorSqrt();
  const Eigen::MatrixXd ri = e0.operatorInverseSqrt();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mid(r * s1 * r);
  return ri * mid.operatorSqrt() * ri;
}

}  // namespace

Report run_geodesic(const RunConfig& cfg) {
  const long d = cfg.get_int("dimension");
  if (d < 1 || d > 4) throw ConfigError("dimension must be 1 to 4");
  const int di = static_cast<int>(d);
  const long count = cfg.get_int("samples");
  const double tol = cfg.get_real("tolerance");
  std::vector<double> c0 = cfg.get_list("cov0");
  std::vector<double> c1 = cfg.get_list("cov1");
  if (c0.empty()) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(di, di);
    if (di >= 2) s(1, 1) = 0.5;
    c0.assign(s.data(), s.data() + s.size());
  }
  if (c1.empty()) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(di, di);
    const double diag[4] = {4.0, 1.0, 1.5, 3.0};
    for (int i = 0; i < di; ++i) s(i, i) = diag[i];
    if (di >= 2) s(0, 1) = s(1, 0) = 0.5;
    c1.assign(s.data(), s.data() + s.size());
  }
  const Eigen::MatrixXd s0 = covariance_from(c0, di, "cov0");
  const Eigen::MatrixXd s1 = covariance_from(c1, di, "cov1");
  const Eigen::MatrixXd T = gaussian_map(s0, s1);

  std::set<double> times;
  for (double t : cfg.get_list("grid")) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("grid times must lie in [0, 1]");
    times.insert(t);
  }
  if (times.size() < 2) throw ConfigError("grid needs at least two times");

  Rng rng(Seed{static_cast<std::uint64_t>(cfg.get_int("seed")), 0});
  Eigen::MatrixXd z(count, di);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
  }
  const Eigen::MatrixXd l0 = s0.llt().matrixL();
  const Eigen::MatrixXd x0 = z * l0.transpose();
  const double h0 = gaussian_entropy(s0);

  Report r;
  r.experiment = "geodesic";
  r.config = cfg.to_json();
  Series ent{"entropy", {"t", "h_analytic", "h_knn"}, {}};
  std::map<double, std::pair<double, double>> h;
  for (double t : times) {
    const Eigen::MatrixXd mt = (1.0 - t) * Eigen::MatrixXd::Identity(di, di) + t * T;
    const double ha = entropy_linear_change(h0, mt);
    const double hk = knn_entropy(x0 * mt.transpose(), static_cast<int>(cfg.get_int("knn_k")));
    h[t] = {ha, hk};
    ent.rows.push_back({t, ha, hk});
  }
  Series pairs{"pairs", {"s", "t", "lower", "dh_analytic", "dh_knn", "upper"}, {}};
  const double inf = std::numeric_limits<double>::infinity();
  double worst_a = -inf, worst_k = -inf, worst_est = 0.0;
  for (auto is = times.begin(); is != times.end(); ++is) {
    for (auto it = std::next(is); it != times.end(); ++it) {
      const double s = *is, t = *it;
      const double lower = t < 1.0 ? d * std::log((1.0 - t) / (1.0 - s)) : -inf;
      const double upper = s > 0.0 ? d * std::log(t / s) : inf;
      const double da = h[t].first - h[s].first;
      const double dk = h[t].second - h[s].second;
      worst_a = std::max({worst_a, lower - da, da - upper});
      worst_k = std::max({worst_k, lower - dk, dk - upper});
      pairs.rows.push_back({s, t, lower, da, dk, upper});
    }
  }
  for (double t : times) worst_est = std::max(worst_est, std::abs(h[t].first - h[t].second));
  r.metrics.push_back(make_metric("sandwich_violation_analytic", worst_a, Comparison::AtMost, 0.0, tol,
                                  "entropy sandwich along the geodesic", "tolerance on both sides"));
  r.metrics.push_back(make_metric("sandwich_violation_knn", worst_k, Comparison::AtMost, 0.0, tol,
                                  "entropy sandwich along the geodesic", "tolerance on both sides; k-NN estimates"));
  r.metrics.push_back(make_metric("knn_vs_analytic", worst_est, Comparison::AtMost, 0.0, 2.0 * tol,
                                  "analytic Gaussian entropy", "k-NN estimator bias allowance"));
  r.series.push_back(ent);
  r.series.push_back(pairs);
  r.notes.push_back("violation = max over pairs s < t of (lower - dh, dh - upper); negative means slack");
  return r;
}

}  // namespace freegeo::lab
