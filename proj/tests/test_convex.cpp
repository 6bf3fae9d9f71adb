#include <doctest.h>

#include "freegeo/convex.hpp"

using namespace freegeo;

namespace {

Point vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return Point(v);
}

}  // namespace

TEST_CASE("inf-convolution closed forms") {
  ScalarFn zero;
  zero.value = [](const Point&) { return 0.0; };
  zero.subgradient = [](const Point& x) { return x.zero_like(); };
  const Point x = vec2(0.7, -1.3);
  CHECK(inf_convolution(zero, 0.8, x) == doctest::Approx(0.0));

  for (double c : {0.5, 1.0, 3.0}) {
    for (double t : {0.1, 1.0, 4.0}) {
      const double ref = c * x.squared_norm() / (2.0 * (1.0 + c * t));
      CHECK(inf_convolution(quadratic(c), t, x) == doctest::Approx(ref).epsilon(1e-10));
    }
  }
  const Point a = vec2(2.0, 0.5);
  const double t = 0.6;
  CHECK(inf_convolution(linear(a), t, x) == doctest::Approx(a.inner(x) - t * a.squared_norm() / 2.0).epsilon(1e-10));
}

TEST_CASE("inf-convolution on the matrix backend") {
  const MatrixTuple x = sample_ginibre(3, 2, Seed{1, 0});
  const double ref = x.squared_norm() / (2.0 * (1.0 + 0.5));
  CHECK(inf_convolution(quadratic(1.0), 0.5, Point(x)) == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("Legendre transforms") {
  const Point y = vec2(-0.4, 2.2);
  CHECK(legendre_strongly_convex(quadratic(1.0), y) == doctest::Approx(y.squared_norm() / 2.0).epsilon(1e-10));
  CHECK(legendre_strongly_convex(quadratic(2.5), y) == doctest::Approx(y.squared_norm() / 5.0).epsilon(1e-10));
  const Point a = vec2(1.0, -1.0);
  const ScalarFn f = quadratic(1.0) + linear(a);
  CHECK(legendre_strongly_convex(f, y) == doctest::Approx((y - a).squared_norm() / 2.0).epsilon(1e-10));
  ScalarFn flat = linear(a);
  CHECK_THROWS(legendre_strongly_convex(flat, y));
}

TEST_CASE("Fenchel-Young on random pairs") {
  ScalarFn f;
  f.value = [](const Point& x) { return 0.5 * x.squared_norm() + std::log(std::cosh(x.vec()(0))); };
  f.subgradient = [](const Point& x) {
    Eigen::VectorXd g = x.vec();
    g(0) += std::tanh(x.vec()(0));
    return Point(g);
  };
  f.c = 1.0;
  f.u = 2.0;
  const ScalarFn g = legendre_transform(f);
  Rng rng(Seed{2, 0});
  for (int i = 0; i < 200; ++i) {
    const Point x = random_point(vec2(0, 0), 2.0, rng);
    const Point y = random_point(vec2(0, 0), 2.0, rng);
    CHECK(duality_gap(f, g, x, y) >= -1e-9);
  }
  const Point x = vec2(0.3, -0.8);
  CHECK(std::abs(duality_gap(f, g, x, f.gradient(x))) < 1e-8);
}

TEST_CASE("duality gap of the quadratic pair") {
  const ScalarFn q = quadratic(1.0);
  const Point x = vec2(1.0, 2.0), h = vec2(0.3, -0.1);
  CHECK(duality_gap(q, q, x, x) == doctest::Approx(0.0));
  CHECK(duality_gap(q, q, x, x + h) == doctest::Approx(h.squared_norm() / 2.0));
}

TEST_CASE("interpolation pair matches a dense grid") {
  const ScalarFn q = quadratic(1.0);
  const double s = 0.25, t = 0.75;
  const InterpolationPair p = interpolation_pair(q, q, s, t);
  for (double x : {-1.5, -0.2, 0.0, 0.9, 2.0}) {
    double best = 1e300;
    for (int k = -400000; k <= 400000; ++k) {
      const double xp = k * 1e-5;
      const double v = t / (2 * s) * x * x - (t - s) / s * x * xp + (t - s) * (1 - s) / (2 * s) * xp * xp +
                       (t - s) * 0.5 * xp * xp;
      best = std::min(best, v);
    }
    CHECK(std::abs(p.phi(Point::scalar(x)) - best) < 1e-6);
  }
}

TEST_CASE("interpolation boundary cases") {
  const ScalarFn phi = quadratic(2.0) + linear(vec2(1.0, 0.0));
  ScalarFn psi;
  psi.value = [](const Point& y) { return (y - vec2(1.0, 0.0)).squared_norm() / 4.0; };
  psi.c = 0.5;
  psi.u = 0.5;
  const Point x = vec2(0.3, 1.1);
  const InterpolationPair same = interpolation_pair(phi, psi, 0.5, 0.5);
  CHECK(same.phi(x) == doctest::Approx(x.squared_norm() / 2.0));
  CHECK(same.psi(x) == doctest::Approx(x.squared_norm() / 2.0));
  const InterpolationPair id = interpolation_pair(phi, psi, 0.0, 1.0);
  CHECK(id.phi(x) == phi(x));
  CHECK(id.psi(x) == psi(x));
  CHECK_THROWS_AS(interpolation_pair(phi, psi, 0.7, 0.3), std::invalid_argument);
}

TEST_CASE("inadmissible pairs are rejected") {
  const ScalarFn q = quadratic(1.0);
  const ScalarFn half = 0.25 * q;
  std::vector<std::pair<Point, Point>> samples{{vec2(1, 1), vec2(1, 1)}};
  CHECK_THROWS_AS(interpolation_pair(half, half, 0.2, 0.6, samples), AdmissibilityError);
}

TEST_CASE("midpoint checkers") {
  const ScalarFn q = quadratic(1.0);
  const auto samples = random_midpoint_samples(vec2(0, 0), 100, 1.0, Seed{3, 0});
  CHECK(check_strong_convexity(q, 1.0, samples).max_violation <= 1e-10);
  CHECK(check_semiconcavity(q, 1.0, samples).max_violation <= 1e-10);

  // |x|^2 is 2-strongly convex; claiming 3 fails by 1/8 at x=0, y=1, a=1/2.
  ScalarFn sq;
  sq.value = [](const Point& x) { return x.squared_norm(); };
  const std::vector<MidpointSample> one{{Point::scalar(0.0), Point::scalar(1.0), 0.5}};
  CHECK(check_strong_convexity(sq, 3.0, one).max_violation == doctest::Approx(0.125));
  CHECK(check_semiconcavity(sq, 1.0, one).max_violation == doctest::Approx(0.125));

  ScalarFn ex;
  ex.value = [](const Point& x) { return std::exp(x.scalar_value()); };
  const auto s1 = random_midpoint_samples(Point::scalar(0.0), 100, 2.0, Seed{3, 1});
  CHECK(check_strong_convexity(ex, 0.0, s1).passed());
  CHECK(!check_semiconcavity(ex, 0.0, s1, 1e-12).passed());
}

TEST_CASE("Hopf-Lax curvature of a perturbed quadratic") {
  ScalarFn f;
  f.value = [](const Point& x) { return 0.5 * x.squared_norm() + 0.1 * std::sin(x.vec()(0)); };
  f.subgradient = [](const Point& x) {
    Eigen::VectorXd g = x.vec();
    g(0) += 0.1 * std::cos(x.vec()(0));
    return Point(g);
  };
  const double t = 0.7;
  const ScalarFn ft = hopf_lax(f, t);
  const auto samples = random_midpoint_samples(vec2(0, 0), 50, 1.5, Seed{4, 0});
  CHECK(check_semiconcavity(ft, 1.0 / t, samples).passed());
  CHECK(check_semiconcavity(ft, 1.1 / (1.0 + 1.1 * t), samples).passed());
  CHECK(check_strong_convexity(ft, 0.9 / (1.0 + 0.9 * t), samples).passed());
}

TEST_CASE("supplied subgradients agree with finite differences") {
  const ScalarFn f = quadratic(2.0) + linear(vec2(0.5, -0.5));
  const Point x = vec2(0.2, 0.4);
  CHECK(subgradient_mismatch(f, x, vec2(1.0, 0.0)) < 1e-5);
  CHECK(subgradient_mismatch(f, x, vec2(0.6, 0.8)) < 1e-5);
  const ScalarFn hl = hopf_lax(f, 0.5);
  CHECK(subgradient_mismatch(hl, x, vec2(0.6, 0.8)) < 1e-5);
}
