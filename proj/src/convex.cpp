#include "freegeo/convex.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace freegeo {

namespace {

[[noreturn]] void backend_mismatch() { throw DimensionError("points live in different spaces"); }

}  // namespace

Eigen::Index Point::dim() const {
  if (is_vector()) return vec().size();
  const auto& x = tuple();
  return 2 * static_cast<Eigen::Index>(x.m()) * x.n() * x.n();
}

Eigen::VectorXd Point::coords() const {
  if (is_vector()) return vec();
  const auto& x = tuple();
  Eigen::VectorXd c(dim());
  const double s = 1.0 / std::sqrt(static_cast<double>(x.n()));
  Eigen::Index k = 0;
  for (const auto& e : x.entries()) {
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      c(k++) = s * e.data()[i].real();
      c(k++) = s * e.data()[i].imag();
    }
  }
  return c;
}

Point Point::from_coords(const Eigen::VectorXd& c) const {
  if (c.size() != dim()) throw DimensionError("coordinate vector has the wrong length");
  if (is_vector()) return Point(c);
  const auto& x = tuple();
  const double s = std::sqrt(static_cast<double>(x.n()));
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(x.m()));
  Eigen::Index k = 0;
  for (int j = 0; j < x.m(); ++j) {
    Matrix e(x.n(), x.n());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      e.data()[i] = cplx(s * c(k), s * c(k + 1));
      k += 2;
    }
    out.push_back(std::move(e));
  }
  return Point(MatrixTuple(std::move(out)));
}

Point Point::zero_like() const {
  if (is_vector()) return Point(Eigen::VectorXd::Zero(vec().size()));
  return Point(MatrixTuple::zeros(tuple().n(), tuple().m()));
}

double Point::inner(const Point& o) const {
  if (is_vector() != o.is_vector()) backend_mismatch();
  if (is_vector()) {
    if (vec().size() != o.vec().size()) throw DimensionError("vector length mismatch");
    return vec().dot(o.vec());
  }
  return real_inner_product(tuple(), o.tuple());
}

double Point::norm() const { return std::sqrt(std::max(0.0, squared_norm())); }

Point operator+(const Point& a, const Point& b) {
  if (a.is_vector() != b.is_vector()) backend_mismatch();
  if (a.is_vector()) {
    if (a.vec().size() != b.vec().size()) throw DimensionError("vector length mismatch");
    return Point(Eigen::VectorXd(a.vec() + b.vec()));
  }
  return Point(a.tuple() + b.tuple());
}

Point operator-(const Point& a, const Point& b) { return a + (-1.0) * b; }

Point operator*(double s, const Point& a) {
  if (a.is_vector()) return Point(Eigen::VectorXd(s * a.vec()));
  return Point(s * a.tuple());
}

Point finite_difference_gradient(const std::function<double(const Point&)>& f, const Point& x, double h) {
  Eigen::VectorXd c = x.coords();
  Eigen::VectorXd g(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double saved = c(i);
    const double step = h * (1.0 + std::abs(saved));
    c(i) = saved + step;
    const double fp = f(x.from_coords(c));
    c(i) = saved - step;
    const double fm = f(x.from_coords(c));
    c(i) = saved;
    g(i) = (fp - fm) / (2.0 * step);
  }
  return x.from_coords(g);
}

Point ScalarFn::gradient(const Point& x) const {
  if (subgradient) return subgradient(x);
  return finite_difference_gradient(value, x);
}

ScalarFn quadratic(double c) {
  ScalarFn f;
  f.value = [c](const Point& x) { return 0.5 * c * x.squared_norm(); };
  f.subgradient = [c](const Point& x) { return c * x; };
  f.c = c;
  f.u = c;
  return f;
}

ScalarFn linear(const Point& a) {
  ScalarFn f;
  f.value = [a](const Point& x) { return a.inner(x); };
  f.subgradient = [a](const Point&) { return a; };
  f.c = 0.0;
  f.u = 0.0;
  return f;
}

ScalarFn operator+(const ScalarFn& f, const ScalarFn& g) {
  ScalarFn h;
  h.value = [f, g](const Point& x) { return f.value(x) + g.value(x); };
  if (f.subgradient && g.subgradient) {
    h.subgradient = [f, g](const Point& x) { return f.subgradient(x) + g.subgradient(x); };
  }
  h.c = f.c + g.c;
  h.u = f.u + g.u;
  return h;
}

ScalarFn operator*(double s, const ScalarFn& f) {
  if (s < 0.0) throw std::invalid_argument("only nonnegative scalings keep curvature bounds");
  ScalarFn h;
  h.value = [s, f](const Point& x) { return s * f.value(x); };
  if (f.subgradient) h.subgradient = [s, f](const Point& x) { return s * f.subgradient(x); };
  h.c = s * f.c;
  h.u = s == 0.0 ? 0.0 : s * f.u;
  return h;
}

// ------------------------------------------------------------------ prox

ProxResult prox(const ScalarFn& f, double t, const Point& x, const ProxOptions& opts) {
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("prox parameter t must be positive");
  auto objective = [&](const Point& y) { return f(y) + (y - x).squared_norm() / (2.0 * t); };
  auto cap = [&](const Point& y) {
    if (!std::isfinite(opts.search_radius)) return y;
    const Point d = y - x;
    const double r = d.norm();
    return r <= opts.search_radius ? y : x + (opts.search_radius / r) * d;
  };
  const double scale = 1.0 + x.norm();
  Point y = x;
  double py = objective(y);
  if (!std::isfinite(py)) throw ConvergenceError("prox objective is not finite at the start point");
  for (int it = 0; it < opts.max_iter; ++it) {
    const Point d = x - t * f.gradient(y) - y;
    const double dn = d.norm();
    if (!std::isfinite(dn)) throw ConvergenceError("prox iteration produced a non-finite step");
    if (dn <= opts.tol * scale) return {py, y, it};

    Point trial = cap(y + opts.damping * d);
    double pt = objective(trial);
    if (!(pt < py)) {
      // Golden-section search for the best multiple of d in [0, 1].
      constexpr double g = 0.6180339887498949;
      double lo = 0.0, hi = 1.0;
      double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      double fa = objective(cap(y + a * d)), fb = objective(cap(y + b * d));
      for (int k = 0; k < 80 && hi - lo > 1e-14; ++k) {
        if (fa < fb) {
          hi = b;
          b = a;
          fb = fa;
          a = hi - g * (hi - lo);
          fa = objective(cap(y + a * d));
        } else {
          lo = a;
          a = b;
          fa = fb;
          b = lo + g * (hi - lo);
          fb = objective(cap(y + b * d));
        }
      }
      const double theta = fa < fb ? a : b;
      trial = cap(y + theta * d);
      pt = objective(trial);
      if (!(pt < py)) {
        // No representable progress: accept as converged near the noise floor.
        if (dn <= 1e-6 * scale) return {py, y, it};
        std::ostringstream msg;
        msg << "prox stalled with step norm " << dn;
        throw ConvergenceError(msg.str());
      }
    }
    if (!std::isfinite(pt) || trial.norm() > 1e12 * scale) throw ConvergenceError("prox iteration diverged");
    y = std::move(trial);
    py = pt;
  }
  throw ConvergenceError("prox did not converge within " + std::to_string(opts.max_iter) + " iterations");
}

double inf_convolution(const ScalarFn& f, double t, const Point& x, const ProxOptions& opts) {
  return prox(f, t, x, opts).value;
}

ScalarFn hopf_lax(const ScalarFn& f, double t, const ProxOptions& opts) {
  if (!(t > 0.0)) throw std::invalid_argument("Hopf-Lax time must be positive");
  ScalarFn h;
  h.value = [f, t, opts](const Point& x) { return prox(f, t, x, opts).value; };
  h.subgradient = [f, t, opts](const Point& x) { return (1.0 / t) * (x - prox(f, t, x, opts).argmin); };
  h.c = f.c > 0.0 ? 1.0 / (1.0 / f.c + t) : 0.0;
  h.u = std::isfinite(f.u) && f.u > 0.0 ? 1.0 / (1.0 / f.u + t) : 1.0 / t;
  return h;
}

namespace {

// f - c q, the convex remainder of a c-strongly convex function.
ScalarFn convex_part(const ScalarFn& f) {
  const double c = f.c;
  ScalarFn g;
  g.value = [f, c](const Point& x) { return f.value(x) - 0.5 * c * x.squared_norm(); };
  if (f.subgradient) g.subgradient = [f, c](const Point& x) { return f.subgradient(x) - c * x; };
  g.c = 0.0;
  g.u = f.u - c;
  return g;
}

}  // namespace

double legendre_strongly_convex(const ScalarFn& f, const Point& y, const ProxOptions& opts) {
  if (!(f.c > 0.0) || !std::isfinite(f.c)) {
    throw std::invalid_argument("legendre_strongly_convex needs a declared convexity constant c > 0");
  }
  const double c = f.c;
  const ProxResult r = prox(convex_part(f), 1.0 / c, (1.0 / c) * y, opts);
  return y.squared_norm() / (2.0 * c) - r.value;
}

ScalarFn legendre_transform(const ScalarFn& f, const ProxOptions& opts) {
  if (!(f.c > 0.0)) throw std::invalid_argument("legendre_transform needs c > 0");
  const double c = f.c;
  const ScalarFn g = convex_part(f);
  ScalarFn l;
  l.value = [g, c, opts](const Point& y) {
    return y.squared_norm() / (2.0 * c) - prox(g, 1.0 / c, (1.0 / c) * y, opts).value;
  };
  l.subgradient = [g, c, opts](const Point& y) { return prox(g, 1.0 / c, (1.0 / c) * y, opts).argmin; };
  l.u = 1.0 / c;
  l.c = std::isfinite(f.u) && f.u > 0.0 ? 1.0 / f.u : 0.0;
  return l;
}

double duality_gap(const ScalarFn& phi, const ScalarFn& psi, const Point& x, const Point& y) {
  return phi(x) + psi(y) - x.inner(y);
}

// --------------------------------------------------------- interpolation

namespace {

// The shared shape of phi_{s,t} (a = s, b = t) and psi_{s,t}
// (a = 1 - t, b = 1 - s):
//   a == b: q
//   a == 0: (1-b)/2 |x|^2 + b f(x)
//   else:   (1-b)/(2(1-a)) |x|^2 + (b-a) f_tau(x/(1-a)),  tau = a/(1-a)
ScalarFn interpolate(const ScalarFn& f, double a, double b, const ProxOptions& opts) {
  if (a == b) return quadratic(1.0);
  if (a == 0.0) {
    ScalarFn out;
    out.value = [f, b](const Point& x) { return 0.5 * (1.0 - b) * x.squared_norm() + b * f(x); };
    out.subgradient = [f, b](const Point& x) { return (1.0 - b) * x + b * f.gradient(x); };
    out.c = (1.0 - b) + b * f.c;
    out.u = b == 0.0 ? 1.0 : (1.0 - b) + b * f.u;
    return out;
  }
  const double tau = a / (1.0 - a);
  const double quad = (1.0 - b) / (1.0 - a);
  const double weight = b - a;
  ScalarFn out;
  out.value = [=](const Point& x) {
    const Point z = (1.0 / (1.0 - a)) * x;
    return 0.5 * quad * x.squared_norm() + weight * prox(f, tau, z, opts).value;
  };
  out.subgradient = [=](const Point& x) {
    const Point z = (1.0 / (1.0 - a)) * x;
    const Point y = prox(f, tau, z, opts).argmin;
    return quad * x + (weight / ((1.0 - a) * tau)) * (z - y);
  };
  out.c = quad;
  out.u = b / a;
  return out;
}

}  // namespace

InterpolationPair interpolation_pair(const ScalarFn& phi, const ScalarFn& psi, double s, double t,
                                     const std::vector<std::pair<Point, Point>>& admissibility_samples,
                                     const ProxOptions& opts) {
  if (!(0.0 <= s && s <= t && t <= 1.0)) throw std::invalid_argument("need 0 <= s <= t <= 1");
  for (const auto& [x, y] : admissibility_samples) {
    const double gap = duality_gap(phi, psi, x, y);
    const double scale = 1.0 + std::abs(x.inner(y));
    if (gap < -1e-9 * scale) {
      std::ostringstream msg;
      msg << "pair is not admissible: phi(x) + psi(y) - <x,y> = " << gap << " at |x| = " << x.norm()
          << ", |y| = " << y.norm();
      throw AdmissibilityError(msg.str());
    }
  }
  InterpolationPair p;
  p.s = s;
  p.t = t;
  if (s == 0.0 && t == 1.0) {
    p.phi = phi;
    p.psi = psi;
    return p;
  }
  p.phi = interpolate(phi, s, t, opts);
  p.psi = interpolate(psi, 1.0 - t, 1.0 - s, opts);
  return p;
}

// ---------------------------------------------------------------- checks

namespace {

template <class Violation>
ViolationReport run_check(const std::vector<MidpointSample>& samples, double tol, Violation violation) {
  ViolationReport r;
  r.tol = tol;
  for (const auto& smp : samples) {
    const double v = violation(smp);
    ++r.samples;
    if (v > tol) ++r.violations;
    if (v > r.max_violation) {
      r.max_violation = v;
      r.worst = smp;
    }
  }
  return r;
}

}  // namespace

ViolationReport check_strong_convexity(const ScalarFn& f, double c, const std::vector<MidpointSample>& samples,
                                       double tol) {
  return run_check(samples, tol, [&](const MidpointSample& s) {
    const double a = s.alpha;
    const Point xa = (1.0 - a) * s.x + a * s.y;
    const double rhs = (1.0 - a) * f(s.x) + a * f(s.y) - 0.5 * c * a * (1.0 - a) * (s.x - s.y).squared_norm();
    return f(xa) - rhs;
  });
}

ViolationReport check_semiconcavity(const ScalarFn& f, double u, const std::vector<MidpointSample>& samples,
                                    double tol) {
  if (!std::isfinite(u)) {
    ViolationReport r;
    r.tol = tol;
    r.samples = samples.size();
    return r;
  }
  return run_check(samples, tol, [&](const MidpointSample& s) {
    const double a = s.alpha;
    const Point xa = (1.0 - a) * s.x + a * s.y;
    const double rhs = (1.0 - a) * f(s.x) + a * f(s.y) - 0.5 * u * a * (1.0 - a) * (s.x - s.y).squared_norm();
    return rhs - f(xa);
  });
}

Point random_point(const Point& like, double scale, Rng& rng) {
  Eigen::VectorXd c(like.dim());
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = scale * rng.normal();
  return like.from_coords(c);
}

std::vector<MidpointSample> random_midpoint_samples(const Point& like, std::size_t count, double scale,
                                                    Seed seed) {
  Rng rng(seed);
  std::vector<MidpointSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    MidpointSample s;
    s.x = random_point(like, scale, rng);
    s.y = random_point(like, scale, rng);
    s.alpha = rng.uniform();
    out.push_back(std::move(s));
  }
  return out;
}

double subgradient_mismatch(const ScalarFn& f, const Point& x, const Point& dir, double h) {
  const double fd = (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
  return std::abs(fd - f.gradient(x).inner(dir));
}

}  // namespace freegeo
