#include "freegeo/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace freegeo {

std::uint64_t ensemble_hash(const Ensemble& e) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const int dims[2] = {e.n(), e.m()};
  mix(dims, sizeof(dims));
  for (const auto& x : e.samples()) {
    for (const auto& mat : x.entries()) mix(mat.data(), sizeof(cplx) * static_cast<std::size_t>(mat.size()));
  }
  return h;
}

Eigen::MatrixXd cost_matrix(const Ensemble& a, const Ensemble& b) {
  if (a.n() != b.n() || a.m() != b.m()) throw DimensionError("ensembles differ in n or m");
  const auto rows = static_cast<Eigen::Index>(a.size());
  const auto cols = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd c(rows, cols);
  auto work = [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index i = lo; i < hi; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        c(i, j) = (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)]).squared_norm();
      }
    }
  };
  const auto hw = static_cast<Eigen::Index>(std::max(1u, std::thread::hardware_concurrency()));
  const Eigen::Index workers = std::min<Eigen::Index>(hw, std::max<Eigen::Index>(1, rows * cols / 4096));
  if (workers <= 1) {
    work(0, rows);
    return c;
  }
  std::vector<std::thread> pool;
  const Eigen::Index chunk = (rows + workers - 1) / workers;
  for (Eigen::Index lo = 0; lo < rows; lo += chunk) pool.emplace_back(work, lo, std::min(rows, lo + chunk));
  for (auto& t : pool) t.join();
  return c;
}

std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.cols() != cost.rows()) throw DimensionError("assignment needs a square cost matrix");
  if (n > kMaxAssignmentSize) throw DimensionError("assignment size exceeds 4096");
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual root.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

TransportPlan make_plan(const Ensemble& a, const Ensemble& b, std::vector<std::size_t> pairing) {
  if (a.n() != b.n() || a.m() != b.m()) throw DimensionError("ensembles differ in n or m");
  if (a.size() != b.size() || pairing.size() != a.size()) throw DimensionError("plan needs equal counts");
  std::vector<char> seen(b.size(), 0);
  for (std::size_t j : pairing) {
    if (j >= b.size() || seen[j]) throw std::invalid_argument("pairing is not a bijection");
    seen[j] = 1;
  }
  TransportPlan plan{a, b, std::move(pairing), 0.0};
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[plan.pairing[i]]).squared_norm();
  plan.cost = a.size() ? s / static_cast<double>(a.size()) : 0.0;
  return plan;
}

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

W2Result sinkhorn(const Eigen::MatrixXd& c, const SinkhornOptions& o) {
  const Eigen::Index rows = c.rows(), cols = c.cols();
  double eps = o.regularization;
  if (!(eps > 0.0)) {
    std::vector<double> all(c.data(), c.data() + c.size());
    auto mid = all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2);
    std::nth_element(all.begin(), mid, all.end());
    eps = 0.01 * *mid;
    if (!(eps > 0.0)) eps = 1e-12;
  }
  const double log_a = -std::log(static_cast<double>(rows));
  const double log_b = -std::log(static_cast<double>(cols));
  Eigen::VectorXd f = Eigen::VectorXd::Zero(rows), g = Eigen::VectorXd::Zero(cols);
  W2Result r;
  r.method = W2Method::Sinkhorn;
  r.regularization = eps;
  auto sweep = [&](double e) {
    for (Eigen::Index i = 0; i < rows; ++i) f(i) = e * log_a - e * log_sum_exp((g - c.row(i).transpose()) / e);
    for (Eigen::Index j = 0; j < cols; ++j) g(j) = e * log_b - e * log_sum_exp((f - c.col(j)) / e);
  };
  auto marginal_error = [&](double e) {
    double err = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double row = ((f(i) + g.array() - c.row(i).transpose().array()) / e).exp().sum();
      err += std::abs(row - 1.0 / static_cast<double>(rows));
    }
    if (!std::isfinite(err)) throw ConvergenceError("Sinkhorn iterates became non-finite");
    return err;
  };
  // Epsilon scaling: warm-started passes at geometrically decreasing
  // regularization, each run to a loose marginal error.
  int used = 0;
  for (double e = std::max(eps, c.maxCoeff()); e > eps; e = std::max(eps, e / 4.0)) {
    for (int k = 1; k <= 200 && used < o.max_iter; ++k, ++used) {
      sweep(e);
      if (k % 10 == 0 && marginal_error(e) <= 1e-3) break;
    }
    if (e / 4.0 <= eps) break;
  }
  for (int it = used + 1; it <= o.max_iter; ++it) {
    sweep(eps);
    if (it % 10 == 0 || it == o.max_iter) {
      if (marginal_error(eps) <= o.tol) {
        double cost = 0.0;
        for (Eigen::Index i = 0; i < rows; ++i) {
          for (Eigen::Index j = 0; j < cols; ++j) cost += std::exp((f(i) + g(j) - c(i, j)) / eps) * c(i, j);
        }
        r.cost = cost;
        r.w2 = std::sqrt(std::max(0.0, cost));
        r.iterations = it;
        return r;
      }
    }
  }
  throw ConvergenceError("Sinkhorn did not reach the marginal tolerance");
}

}  // namespace

W2Result empirical_w2(const Ensemble& a, const Ensemble& b, W2Method method, const SinkhornOptions& sopts) {
  if (a.n() != b.n() || a.m() != b.m()) throw DimensionError("ensembles differ in n or m");
  if (a.size() == 0 || b.size() == 0) throw DimensionError("empty ensemble");
  const Eigen::MatrixXd c = cost_matrix(a, b);
  if (method == W2Method::Sinkhorn) return sinkhorn(c, sopts);
  if (a.size() != b.size()) throw DimensionError("exact W2 needs equal sample counts");
  W2Result r;
  r.method = W2Method::Exact;
  r.plan = make_plan(a, b, solve_assignment(c));
  r.cost = r.plan.cost;
  r.w2 = std::sqrt(r.cost);
  return r;
}

double plan_inner_product(const TransportPlan& plan) {
  if (plan.pairing.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < plan.pairing.size(); ++i) {
    s += real_inner_product(plan.source[i], plan.target[plan.pairing[i]]);
  }
  return s / static_cast<double>(plan.pairing.size());
}

double optimal_inner_product(const Ensemble& a, const Ensemble& b) {
  const W2Result r = empirical_w2(a, b);
  return 0.5 * (a.mean_squared_norm() + b.mean_squared_norm() - r.cost);
}

Ensemble displacement(const TransportPlan& plan, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("displacement time must lie in [0, 1]");
  std::vector<MatrixTuple> out;
  out.reserve(plan.pairing.size());
  for (std::size_t i = 0; i < plan.pairing.size(); ++i) {
    out.push_back((1.0 - t) * plan.source[i] + t * plan.target[plan.pairing[i]]);
  }
  return Ensemble(plan.source.n(), plan.source.m(), std::move(out));
}

namespace {

Eigen::VectorXd sorted_spectrum(const Matrix& x) {
  if (x.rows() != x.cols()) throw DimensionError("matrix must be square");
  const double scale = 1.0 + x.cwiseAbs().maxCoeff();
  if (!is_hermitian(x, 1e-10 * scale)) throw std::invalid_argument("spectral transport needs Hermitian input");
  const Matrix h = 0.5 * (x + x.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues();  // ascending
}

}  // namespace

double spectral_w2_1d(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw DimensionError("spectral transport needs equal sizes");
  const Eigen::VectorXd a = sorted_spectrum(x);
  const Eigen::VectorXd b = sorted_spectrum(y);
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

Quantile1D::Quantile1D(std::vector<double> points, std::vector<double> weights) {
  if (points.empty()) throw std::invalid_argument("empty support");
  if (weights.empty()) weights.assign(points.size(), 1.0);
  if (weights.size() != points.size()) throw DimensionError("weights and points differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("weights sum to zero");
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return points[i] < points[j]; });
  for (std::size_t k : idx) {
    if (!std::isfinite(points[k])) throw std::invalid_argument("support points must be finite");
    support_.push_back(points[k]);
    weights_.push_back(weights[k] / total);
  }
}

Quantile1D Quantile1D::spectrum(const Matrix& hermitian) {
  const Eigen::VectorXd ev = sorted_spectrum(hermitian);
  return Quantile1D(std::vector<double>(ev.data(), ev.data() + ev.size()));
}

double Quantile1D::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * support_[i];
  return s;
}

double Quantile1D::second_moment() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * support_[i] * support_[i];
  return s;
}

std::vector<CouplingAtom> monotone_coupling(const Quantile1D& mu, const Quantile1D& nu) {
  std::vector<CouplingAtom> out;
  std::size_t i = 0, j = 0;
  double left_i = mu.weights()[0], left_j = nu.weights()[0];
  for (;;) {
    const double m = std::min(left_i, left_j);
    if (m > 0.0) out.push_back({i, j, m});
    left_i -= m;
    left_j -= m;
    // The side with less remaining mass is exhausted; ties advance both.
    const bool adv_i = left_i <= left_j;
    const bool adv_j = left_j <= left_i;
    if (adv_i) {
      if (i + 1 == mu.size()) break;
      left_i = mu.weights()[++i];
    }
    if (adv_j) {
      if (j + 1 == nu.size()) break;
      left_j = nu.weights()[++j];
    }
  }
  return out;
}

double w2_1d(const Quantile1D& mu, const Quantile1D& nu) {
  double s = 0.0;
  for (const auto& a : monotone_coupling(mu, nu)) {
    const double d = mu.support()[a.i] - nu.support()[a.j];
    s += a.mass * d * d;
  }
  return std::sqrt(s);
}

double inner_product_1d(const Quantile1D& mu, const Quantile1D& nu) {
  double s = 0.0;
  for (const auto& a : monotone_coupling(mu, nu)) s += a.mass * mu.support()[a.i] * nu.support()[a.j];
  return s;
}

KantorovichPair kantorovich_potentials_1d(const Quantile1D& mu, const Quantile1D& nu) {
  const auto coupling = monotone_coupling(mu, nu);
  const std::size_t k = mu.size();
  const auto& xs = mu.support();
  const auto& ys = nu.support();
  std::vector<double> ymin(k, std::numeric_limits<double>::infinity());
  std::vector<double> ymax(k, -std::numeric_limits<double>::infinity());
  for (const auto& a : coupling) {
    ymin[a.i] = std::min(ymin[a.i], ys[a.j]);
    ymax[a.i] = std::max(ymax[a.i], ys[a.j]);
  }
  // Atoms of mu that received no mass (zero weight) inherit a neighbour's range.
  for (std::size_t i = 0; i < k; ++i) {
    if (std::isfinite(ymin[i])) continue;
    for (std::size_t d = 1; d < k; ++d) {
      if (i >= d && std::isfinite(ymax[i - d])) {
        ymin[i] = ymax[i] = ymax[i - d];
        break;
      }
      if (i + d < k && std::isfinite(ymin[i + d])) {
        ymin[i] = ymax[i] = ymin[i + d];
        break;
      }
    }
  }
  // Slopes between consecutive support points; coincident points share a value.
  std::vector<double> slope(k > 0 ? k - 1 : 0);
  std::vector<double> phi(k, 0.0);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    slope[i] = 0.5 * (ymax[i] + ymin[i + 1]);
    phi[i + 1] = phi[i] + slope[i] * (xs[i + 1] - xs[i]);
  }
  const double left_slope = ymin.front();
  const double right_slope = ymax.back();

  KantorovichPair out;
  out.phi_values = phi;
  out.inner_product = inner_product_1d(mu, nu);

  out.phi.value = [xs, phi, slope, left_slope, right_slope](const Point& p) {
    const double x = p.scalar_value();
    if (x <= xs.front()) return phi.front() + left_slope * (x - xs.front());
    if (x >= xs.back()) return phi.back() + right_slope * (x - xs.back());
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    return phi[i] + slope[i] * (x - xs[i]);
  };
  out.phi.subgradient = [xs, slope, left_slope, right_slope](const Point& p) {
    const double x = p.scalar_value();
    if (x < xs.front()) return Point::scalar(left_slope);
    if (x >= xs.back()) return Point::scalar(right_slope);
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    return Point::scalar(slope[static_cast<std::size_t>(it - xs.begin()) - 1]);
  };
  auto psi_eval = [xs, phi](double y) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) best = std::max(best, xs[i] * y - phi[i]);
    return best;
  };
  out.psi.value = [psi_eval](const Point& p) { return psi_eval(p.scalar_value()); };
  out.psi.subgradient = [xs, phi](const Point& p) {
    const double y = p.scalar_value();
    double best = -std::numeric_limits<double>::infinity();
    double arg = xs.front();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double v = xs[i] * y - phi[i];
      if (v > best) {
        best = v;
        arg = xs[i];
      }
    }
    return Point::scalar(arg);
  };
  out.psi_values.reserve(ys.size());
  for (double y : ys) out.psi_values.push_back(psi_eval(y));
  return out;
}

}  // namespace freegeo
