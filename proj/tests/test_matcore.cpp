#include <doctest.h>

#include <sstream>

#include "freegeo/matcore.hpp"

using namespace freegeo;

TEST_CASE("random streams are pure functions of the seed") {
  Rng a(Seed{5, 2}), b(Seed{5, 2}), c(Seed{5, 3});
  bool differ = false;
  for (int i = 0; i < 32; ++i) {
    const auto x = a(), y = b(), z = c();
    CHECK(x == y);
    differ = differ || x != z;
  }
  CHECK(differ);
  CHECK(!(Seed{5, 2}.child(1) == Seed{5, 2}.child(2)));
}

TEST_CASE("uniform and normal draws have the right moments") {
  Rng r(Seed{1, 0});
  const int N = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double g = r.normal();
    sn += g;
    sn2 += g * g;
  }
  CHECK(su / N == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / N) < 0.01);
  CHECK(sn2 / N == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("normalized trace geometry") {
  const int n = 5;
  const Matrix I = Matrix::Identity(n, n);
  CHECK(normalized_trace(I).real() == doctest::Approx(1.0));
  const MatrixTuple one({I});
  CHECK(one.norm() == doctest::Approx(1.0));

  const MatrixTuple x = sample_ginibre(n, 2, Seed{3, 0});
  const MatrixTuple y = sample_ginibre(n, 2, Seed{3, 1});
  CHECK(real_inner_product(x, y) == doctest::Approx(real_inner_product(y, x)));
  CHECK(real_inner_product(x, x) == doctest::Approx(x.squared_norm()));
  // Direct entrywise sum over n.
  double direct = 0.0;
  for (const auto& m : x.entries()) direct += m.cwiseAbs2().sum() / n;
  CHECK(x.squared_norm() == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("tuple arithmetic rejects shape mismatch") {
  const MatrixTuple a = MatrixTuple::zeros(3, 1);
  const MatrixTuple b = MatrixTuple::zeros(4, 1);
  CHECK_THROWS_AS(a + b, DimensionError);
  CHECK_THROWS_AS(MatrixTuple::zeros(3, 2) - MatrixTuple::zeros(3, 1), DimensionError);
}

TEST_CASE("self-adjoint embedding round trip") {
  const MatrixTuple x = sample_ginibre(4, 3, Seed{8, 0});
  const MatrixTuple sa = sa_embedding(x);
  CHECK(sa.m() == 6);
  for (const auto& e : sa.entries()) CHECK(is_hermitian(e));
  CHECK((sa_reconstruct(sa) - x).norm() < 1e-13);
  // The map is an isometry for the real inner product.
  CHECK(sa.squared_norm() == doctest::Approx(x.squared_norm()));
}

TEST_CASE("singular value clipping") {
  const Matrix x = 3.0 * sample_ginibre(6, 1, Seed{2, 0})[0];
  const Matrix y = clip_singular_values(x, 1.0);
  CHECK(operator_norm(y) <= 1.0 + 1e-12);
  const Matrix small = 0.01 * x;
  CHECK((clip_singular_values(small, 1.0) - small).norm() < 1e-14);
}

TEST_CASE("GUE moments approach the semicircle") {
  const Matrix g = sample_gue(200, Seed{11, 0});
  CHECK(is_hermitian(g));
  CHECK(normalized_trace(g * g).real() == doctest::Approx(1.0).epsilon(0.1));
  CHECK(std::abs(normalized_trace(g * g * g).real()) < 0.1);
  CHECK(operator_norm(g) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("Haar unitaries are unitary") {
  const Matrix u = sample_haar_unitary(7, Seed{4, 0});
  CHECK((u.adjoint() * u - Matrix::Identity(7, 7)).norm() < 1e-12);
}

TEST_CASE("tensor embeddings commute") {
  const Matrix a = sample_gue(3, Seed{1, 1});
  const Matrix b = sample_gue(4, Seed{1, 2});
  const auto [ea, eb] = tensor_embed(a, b);
  CHECK(ea.rows() == 12);
  CHECK((ea * eb - eb * ea).norm() < 1e-12);
  CHECK(normalized_trace(ea * ea).real() == doctest::Approx(normalized_trace(a * a).real()));
}

TEST_CASE("binary tuple I/O round trip") {
  const MatrixTuple x = sample_ginibre(3, 2, Seed{6, 0});
  std::stringstream ss;
  write_tuple(ss, x);
  const MatrixTuple y = read_tuple(ss, 3, 2);
  CHECK(x == y);
  std::stringstream truncated(ss.str().substr(0, 10));
  CHECK_THROWS(read_tuple(truncated, 3, 2));
}
