#pragma once

// Convex analysis on a real inner-product space: Hopf-Lax inf-convolution,
// Legendre transforms, displacement interpolation pairs and midpoint
// convexity checks. Points are either real vectors or matrix tuples with
// the real part of the normalized-trace inner product.

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "freegeo/matcore.hpp"

namespace freegeo {

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AdmissibilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Point {
 public:
  Point() : v_(Eigen::VectorXd()) {}
  Point(Eigen::VectorXd v) : v_(std::move(v)) {}
  Point(MatrixTuple x) : v_(std::move(x)) {}
  static Point scalar(double a) { return Point(Eigen::VectorXd::Constant(1, a)); }

  bool is_vector() const { return std::holds_alternative<Eigen::VectorXd>(v_); }
  const Eigen::VectorXd& vec() const { return std::get<Eigen::VectorXd>(v_); }
  const MatrixTuple& tuple() const { return std::get<MatrixTuple>(v_); }
  // First coordinate of a vector point.
  double scalar_value() const { return vec()(0); }

  // Real dimension of the space.
  Eigen::Index dim() const;
  // Coordinates in an orthonormal real basis, and the inverse map using
  // this point's shape.
  Eigen::VectorXd coords() const;
  Point from_coords(const Eigen::VectorXd& c) const;
  Point zero_like() const;

  double inner(const Point& o) const;
  double squared_norm() const { return inner(*this); }
  double norm() const;

  friend Point operator+(const Point& a, const Point& b);
  friend Point operator-(const Point& a, const Point& b);
  friend Point operator*(double s, const Point& a);

 private:
  std::variant<Eigen::VectorXd, MatrixTuple> v_;
};

inline double inner(const Point& a, const Point& b) { return a.inner(b); }

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// A real function with optional subgradient oracle and declared curvature
// bounds: f - (c/2)|x|^2 convex, f - (u/2)|x|^2 concave.
struct ScalarFn {
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> subgradient;
  double c = 0.0;
  double u = kInf;

  double operator()(const Point& x) const { return value(x); }
  // The supplied subgradient, else central differences.
  Point gradient(const Point& x) const;
};

ScalarFn quadratic(double c = 1.0);  // (c/2)|x|^2
ScalarFn linear(const Point& a);     // <a, x>
ScalarFn operator+(const ScalarFn& f, const ScalarFn& g);
ScalarFn operator*(double s, const ScalarFn& f);

Point finite_difference_gradient(const std::function<double(const Point&)>& f, const Point& x,
                                 double h = 1e-6);

struct ProxOptions {
  int max_iter = 10000;
  double tol = 1e-12;
  double damping = 0.5;
  // Optional cap on |y - x| for the minimizer search.
  double search_radius = kInf;
};

struct ProxResult {
  double value = 0.0;  // inf_y f(y) + |x - y|^2 / 2t
  Point argmin;
  int iterations = 0;
};

ProxResult prox(const ScalarFn& f, double t, const Point& x, const ProxOptions& opts = {});
double inf_convolution(const ScalarFn& f, double t, const Point& x, const ProxOptions& opts = {});
// The Hopf-Lax transform as a function, with gradient (x - prox)/t.
ScalarFn hopf_lax(const ScalarFn& f, double t, const ProxOptions& opts = {});

// sup_x <x,y> - f(x) for f with declared c > 0.
double legendre_strongly_convex(const ScalarFn& f, const Point& y, const ProxOptions& opts = {});
ScalarFn legendre_transform(const ScalarFn& f, const ProxOptions& opts = {});

double duality_gap(const ScalarFn& phi, const ScalarFn& psi, const Point& x, const Point& y);

struct InterpolationPair {
  double s = 0.0;
  double t = 0.0;
  ScalarFn phi;
  ScalarFn psi;
};

// phi_{s,t}, psi_{s,t} for 0 <= s <= t <= 1. Sample pairs, when given, are
// checked for phi(x) + psi(y) >= <x,y>.
InterpolationPair interpolation_pair(const ScalarFn& phi, const ScalarFn& psi, double s, double t,
                                     const std::vector<std::pair<Point, Point>>& admissibility_samples = {},
                                     const ProxOptions& opts = {});

struct MidpointSample {
  Point x;
  Point y;
  double alpha = 0.5;
};

struct ViolationReport {
  double max_violation = -kInf;
  std::size_t samples = 0;
  std::size_t violations = 0;  // samples whose violation exceeds tol
  double tol = 0.0;
  MidpointSample worst;

  bool passed() const { return violations == 0; }
};

// Violation of f(x_a) <= (1-a)f(x) + a f(y) - (c/2)a(1-a)|x-y|^2.
ViolationReport check_strong_convexity(const ScalarFn& f, double c, const std::vector<MidpointSample>& samples,
                                       double tol = 1e-8);
// Violation of f(x_a) >= (1-a)f(x) + a f(y) - (u/2)a(1-a)|x-y|^2.
ViolationReport check_semiconcavity(const ScalarFn& f, double u, const std::vector<MidpointSample>& samples,
                                    double tol = 1e-8);

// Gaussian points shaped like `like`, each coordinate with std `scale`.
Point random_point(const Point& like, double scale, Rng& rng);
std::vector<MidpointSample> random_midpoint_samples(const Point& like, std::size_t count, double scale, Seed seed);

// |finite-difference directional derivative - <g, dir>| at x.
double subgradient_mismatch(const ScalarFn& f, const Point& x, const Point& dir, double h = 1e-6);

}  // namespace freegeo
