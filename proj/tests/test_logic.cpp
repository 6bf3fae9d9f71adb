#include <doctest.h>

#include "freegeo/logic.hpp"

using namespace freegeo;

TEST_CASE("parser builds the expected nodes") {
  const Formula a = parse("re tr(x1' * x2)");
  CHECK(a.node().kind == FormulaNode::Atom);
  CHECK(a.quantifier_free());
  CHECK(a.free_arity() == 2);

  const Formula q = parse("sup{y:1.0} re tr(y * x1)");
  CHECK(q.node().kind == FormulaNode::Quant);
  CHECK(q.node().radius == 1.0);
  CHECK(q.quantifier_depth() == 1);

  const Formula m = parse("max(re tr(x1), 0.0)");
  CHECK(m.node().kind == FormulaNode::Conn);
  CHECK(m.node().conn == Connective::Max);
}

TEST_CASE("printing and parsing are inverse") {
  for (const char* text : {"re tr(x1' * x2)", "sup{y:1.5} re tr(y * x1) - 0.5 * re tr(y' * y)",
                           "max(re tr(x1), 0.0) + sqrt(abs(re tr(x1*x1')))",
                           "inf{y:2} sup{z:1} re tr(y*z*x1) ^ 2", "exp(-re tr(x1'*x1)) / (1 + log(2))"}) {
    const Formula f = parse(text);
    CHECK(parse(f.to_string()) == f);
  }
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse("re tr(x1"), ParseError);
  CHECK_THROWS_AS(parse("sup{y:0} re tr(y)"), ParseError);
  CHECK_THROWS_AS(parse("re tr(z1)"), ParseError);
  CHECK_THROWS_AS(parse("1 +"), ParseError);
}

TEST_CASE("atoms are exact") {
  const MatrixTuple I({Matrix::Identity(4, 4)});
  CHECK(evaluate(parse("re tr(x1)"), I) == doctest::Approx(1.0));
  const MatrixTuple x = sample_ginibre(4, 2, Seed{1, 0});
  const Matrix& a = x[0];
  const Matrix& b = x[1];
  const double direct = (a * b * a.adjoint()).trace().real() / 4.0;
  CHECK(std::abs(evaluate(parse("re tr(x1*x2*x1')"), x) - direct) < 1e-12);
  CHECK(std::abs(evaluate(parse("re tr(2*x1 - x2)"), x) -
                 (2.0 * a - b).trace().real() / 4.0) < 1e-12);
}

TEST_CASE("sentences with a quantifier") {
  const MatrixTuple x = MatrixTuple::zeros(3, 1);
  const QuantResult r = evaluate_quantifier(parse("sup{y:1.0} re tr(y)"), x);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-6));
  REQUIRE(r.argopt.size() == 1);
  CHECK((r.argopt[0] - Matrix::Identity(3, 3)).norm() < 1e-3);
}

TEST_CASE("cutoff predicate vanishes inside the ball") {
  const Formula d = parse("inf{y:1.0} 0.5*re tr((x1-y)'*(x1-y))");
  const Matrix x = 0.4 * sample_gue(5, Seed{2, 0});
  REQUIRE(operator_norm(x) <= 1.0);
  CHECK(std::abs(evaluate(d, MatrixTuple({x}))) < 1e-8);
}

TEST_CASE("more starts never worsen a sup") {
  const Formula f = parse("sup{y:1.0} re tr(y*x1*y*x2)");
  const MatrixTuple x = sample_ginibre(3, 2, Seed{7, 0});
  EvalOptions few, many;
  few.starts = 1;
  many.starts = 12;
  CHECK(evaluate(f, x, many) >= evaluate(f, x, few) - few.tol);
}

TEST_CASE("gradients match finite differences") {
  const Formula f = parse("re tr(x1'*x1*x1'*x1) + 0.3 * re tr(x1*x2)");
  const MatrixTuple x = sample_ginibre(3, 2, Seed{9, 0});
  const auto [v, g] = value_and_gradient(f, x);
  CHECK(v == doctest::Approx(evaluate(f, x)));
  // Directional derivative along a random direction equals re<g, dir>.
  const MatrixTuple dir = sample_ginibre(3, 2, Seed{9, 1});
  const double h = 1e-6;
  const double fd = (evaluate(f, x + h * dir) - evaluate(f, x - h * dir)) / (2.0 * h);
  CHECK(real_inner_product(g, dir) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("gradient of the tilted quadratic at zero") {
  const Formula f = parse("0.5*re tr(x1'*x1) + re tr(x1)");
  const auto [v, g] = value_and_gradient(f, MatrixTuple::zeros(3, 1));
  CHECK(v == doctest::Approx(0.0));
  CHECK((g[0] - Matrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("quantifier-free types") {
  const QfType ti = qf_type(MatrixTuple({Matrix::Identity(3, 3)}), 4);
  for (const auto& [w, v] : ti.moments()) CHECK(std::abs(v - cplx(1.0, 0.0)) < 1e-12);

  const MatrixTuple x = sample_ginibre(4, 2, Seed{5, 5});
  const QfType t = qf_type(x, 3);
  for (const auto& [w, v] : t.moments()) {
    CHECK(std::abs(t.moment(adjoint_word(w)) - std::conj(v)) < 1e-12);
    if (!w.empty()) {
      Word rot(w.begin() + 1, w.end());
      rot.push_back(w.front());
      CHECK(std::abs(t.moment(rot) - v) < 1e-12);
    }
  }
  const QfType u = qf_type(x.conjugated(sample_haar_unitary(4, Seed{5, 6})), 3);
  CHECK(qf_distance(t, t) == 0.0);
  CHECK(qf_distance(t, u) < 1e-12);
  const QfType s = qf_type(sample_ginibre(4, 2, Seed{5, 7}), 3);
  CHECK(qf_distance(t, s) == doctest::Approx(qf_distance(s, t)));
}

TEST_CASE("GUE moments as a type") {
  const MatrixTuple x({sample_gue(200, Seed{12, 0})});
  const QfType t = qf_type(x, 3);
  const Letter l{Letter::Free, 0, false};
  CHECK(t.moment(Word{l, l}).real() == doctest::Approx(1.0).epsilon(0.1));
  CHECK(std::abs(t.moment(Word{l, l, l})) < 0.1);
}

TEST_CASE("domain errors are reported") {
  CHECK_THROWS_AS(evaluate(parse("log(re tr(x1) - 2)"), MatrixTuple({Matrix::Identity(2, 2)})), EvalError);
  CHECK_THROWS(evaluate(parse("re tr(x2)"), MatrixTuple::zeros(2, 1)));
}
