#include "freegeo/entropy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <tuple>
#include <numbers>
#include <thread>

namespace freegeo {

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("Gauss-Legendre needs at least one node");
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = z;
        p0 = 1.0;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (z * p1 - p0) / (z * z - 1.0);
    const auto idx = static_cast<std::size_t>(n - 1 - i);
    x[idx] = 0.5 * (a + b) + 0.5 * (b - a) * z;
    w[idx] = (b - a) / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

double gaussian_log_partition(double c, int n, int m) {
  const double n2 = static_cast<double>(n) * n;
  const double d = 2.0 * m * n2;
  return 0.5 * d * std::log(2.0 * std::numbers::pi / (n2 * c));
}

namespace {

struct NodeResult {
  double mean = 0.0;
  double std_error = 0.0;
  double mean_potential = 0.0;
  double potential_error = 0.0;
};

NodeResult run_node(const Potential& pot, const Formula& q_formula, double lambda, int n, int m,
                    const EntropyOptions& opts, Seed seed) {
  Formula mixed = Formula::connective(
      Connective::Add, {Formula::connective(Connective::Mul, {Formula::constant(1.0 - lambda), q_formula}),
                        Formula::connective(Connective::Mul, {Formula::constant(lambda), pot.formula()})});
  const Potential node_pot(mixed, pot.c());
  SamplerOptions so = opts.sampler;
  so.seed = seed;
  so.check_convexity = false;  // a convex combination of c-convex potentials
  const Ensemble e = sample_gibbs(node_pot, n, m, opts.samples, so);
  const double half_c = 0.5 * pot.c();
  std::vector<double> stat, val;
  stat.reserve(e.size());
  val.reserve(e.size());
  for (const auto& x : e.samples()) {
    const double v = pot.value(x);
    val.push_back(v);
    stat.push_back(v - half_c * x.squared_norm());
  }
  auto mean_se = [&](const std::vector<double>& s) {
    const double mu = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    double var = 0.0;
    for (double v : s) var += (v - mu) * (v - mu);
    var /= std::max<double>(1.0, static_cast<double>(s.size()) - 1.0);
    const double ess = std::max(1.0, e.info().diagnostics.ess);
    return std::pair{mu, std::sqrt(var / ess)};
  };
  NodeResult r;
  std::tie(r.mean, r.std_error) = mean_se(stat);
  std::tie(r.mean_potential, r.potential_error) = mean_se(val);
  return r;
}

}  // namespace

EntropyReport gibbs_entropy(const Potential& pot, int n, int m, const EntropyOptions& opts) {
  if (n < 1 || m < 1) throw DimensionError("n and m must be positive");
  if (opts.nodes < 1 || opts.samples < 2) throw std::invalid_argument("need at least one node and two samples");
  if (pot.arity() > m) throw DimensionError("potential uses more variables than m");
  if (opts.sampler.check_convexity) {
    const double v = convexity_spot_check(pot, n, m, opts.seed.child(0xc0417e5ULL));
    if (v > 1e-8) throw std::invalid_argument("potential fails its strong convexity spot check");
  }
  const Formula q_formula = Potential::quadratic(pot.c(), m).formula();

  std::vector<LadderPoint> ladder;
  const auto [u, wu] = gauss_legendre(opts.nodes);
  for (std::size_t k = 0; k < u.size(); ++k) {
    LadderPoint p;
    if (opts.ladder == LadderKind::Squared) {
      p.lambda = u[k] * u[k];
      p.weight = 2.0 * u[k] * wu[k];
    } else {
      p.lambda = u[k];
      p.weight = wu[k];
    }
    ladder.push_back(p);
  }

  // Slot nodes.size() is the lambda = 1 ensemble for E phi.
  const std::size_t tasks = ladder.size() + 1;
  std::vector<NodeResult> results(tasks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks) return;
      try {
        const double lambda = k < ladder.size() ? ladder[k].lambda : 1.0;
        results[k] = run_node(pot, q_formula, lambda, n, m, opts, opts.seed.child(k));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nthreads =
      std::min<std::size_t>(tasks, opts.threads > 0 ? static_cast<std::size_t>(opts.threads) : hw);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const double n2 = static_cast<double>(n) * n;
  double integral = 0.0, var = 0.0;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    ladder[k].mean_stat = results[k].mean;
    ladder[k].std_error = results[k].std_error;
    integral += ladder[k].weight * results[k].mean;
    var += std::pow(ladder[k].weight * results[k].std_error, 2);
  }
  EntropyReport r;
  r.n = n;
  r.m = m;
  r.c = pot.c();
  r.ladder = ladder;
  r.log_Z = gaussian_log_partition(pot.c(), n, m) - n2 * integral;
  r.mean_potential = results.back().mean_potential;
  r.h_n = r.log_Z / n2 + r.mean_potential + 2.0 * m * std::log(static_cast<double>(n));
  r.error_bar = std::sqrt(var + std::pow(results.back().potential_error, 2));
  if (!std::isfinite(r.h_n)) throw EntropyError("entropy estimate is not finite");
  return r;
}

double gaussian_gibbs_entropy(double c, int m) {
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  return m * (std::log(2.0 * std::numbers::pi * std::numbers::e) - std::log(c));
}

double semicircular_entropy(double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("variance must be positive");
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + 0.5 * std::log(variance);
}

double log_energy_integral(double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("variance must be positive");
  return -0.25 + 0.5 * std::log(variance);
}

double entropy_linear_change(double h, const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw DimensionError("linear map must be square");
  const double det = a.fullPivLu().determinant();
  if (!(std::abs(det) > 0.0) || !std::isfinite(det)) throw std::invalid_argument("linear map is singular");
  return h + std::log(std::abs(det));
}

double gaussian_entropy(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols()) throw DimensionError("covariance must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance is not positive definite");
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double d = static_cast<double>(covariance.rows());
  return 0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e) + 0.5 * logdet;
}

double knn_entropy(const Eigen::MatrixXd& points, int k) {
  const Eigen::Index N = points.rows();
  const Eigen::Index d = points.cols();
  if (d < 1 || d > 6) throw DimensionError("k-NN entropy accepts dimension 1 to 6");
  if (N < 100) throw std::invalid_argument("k-NN entropy needs at least 100 points");
  if (k < 1 || k >= N) throw std::invalid_argument("invalid neighbour count");
  std::vector<double> dist(static_cast<std::size_t>(N));
  double sum_log = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) {
      dist[static_cast<std::size_t>(j)] = j == i ? std::numeric_limits<double>::infinity()
                                                 : (points.row(i) - points.row(j)).squaredNorm();
    }
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    const double r2 = dist[static_cast<std::size_t>(k - 1)];
    if (!(r2 > 0.0)) throw EntropyError("degenerate cloud: coincident points");
    sum_log += 0.5 * std::log(r2);
  }
  auto digamma_int = [](Eigen::Index v) {
    double s = -0.57721566490153286061;
    for (Eigen::Index j = 1; j < v; ++j) s += 1.0 / static_cast<double>(j);
    return s;
  };
  const double dd = static_cast<double>(d);
  const double log_unit_ball = 0.5 * dd * std::log(std::numbers::pi) - std::lgamma(0.5 * dd + 1.0);
  return digamma_int(N) - digamma_int(k) + log_unit_ball + dd * sum_log / static_cast<double>(N);
}

}  // namespace freegeo
