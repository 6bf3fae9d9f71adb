#include "freegeo/matcore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

namespace freegeo {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_same_shape(const MatrixTuple& a, const MatrixTuple& b) {
  if (a.n() != b.n() || a.m() != b.m()) {
    throw DimensionError("matrix tuple shape mismatch: (n=" + std::to_string(a.n()) +
                         ", m=" + std::to_string(a.m()) + ") vs (n=" + std::to_string(b.n()) +
                         ", m=" + std::to_string(b.m()) + ")");
  }
}

void write_le_double(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_le_double(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("unexpected end of matrix data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

Seed Seed::child(std::uint64_t k) const {
  return Seed{master_seed, mix64(stream_id * kGolden + mix64(k + 0x632be59bd9b4e019ULL))};
}

Rng::Rng(Seed seed)
    : key_(mix64(seed.master_seed ^ mix64(seed.stream_id + 0x8cb92ba72f3d8dd7ULL))) {}

Rng::result_type Rng::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

MatrixTuple::MatrixTuple(std::vector<Matrix> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw DimensionError("matrix tuple needs at least one entry");
  n_ = static_cast<int>(entries_.front().rows());
  if (n_ < 1) throw DimensionError("matrix size must be positive");
  for (const auto& e : entries_) {
    if (e.rows() != n_ || e.cols() != n_) {
      throw DimensionError("all matrices of a tuple must be " + std::to_string(n_) + "x" +
                           std::to_string(n_));
    }
  }
}

MatrixTuple MatrixTuple::zeros(int n, int m) {
  if (n < 1 || m < 1) throw DimensionError("n and m must be positive");
  return MatrixTuple(std::vector<Matrix>(static_cast<std::size_t>(m), Matrix::Zero(n, n)));
}

MatrixTuple MatrixTuple::scalar(int n, std::span<const cplx> values) {
  if (n < 1 || values.empty()) throw DimensionError("n and m must be positive");
  std::vector<Matrix> e;
  e.reserve(values.size());
  for (cplx v : values) e.push_back(v * Matrix::Identity(n, n));
  return MatrixTuple(std::move(e));
}

double MatrixTuple::squared_norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.squaredNorm();
  return n_ > 0 ? s / n_ : 0.0;
}

double MatrixTuple::norm() const { return std::sqrt(squared_norm()); }

MatrixTuple MatrixTuple::adjoint() const {
  std::vector<Matrix> e;
  e.reserve(entries_.size());
  for (const auto& x : entries_) e.push_back(x.adjoint());
  return MatrixTuple(std::move(e));
}

MatrixTuple MatrixTuple::conjugated(const Matrix& u) const {
  if (u.rows() != n_ || u.cols() != n_) throw DimensionError("unitary has the wrong size");
  std::vector<Matrix> e;
  e.reserve(entries_.size());
  for (const auto& x : entries_) e.push_back(u * x * u.adjoint());
  return MatrixTuple(std::move(e));
}

MatrixTuple operator+(const MatrixTuple& a, const MatrixTuple& b) {
  check_same_shape(a, b);
  std::vector<Matrix> e(a.entries_);
  for (std::size_t j = 0; j < e.size(); ++j) e[j] += b.entries_[j];
  return MatrixTuple(std::move(e));
}

MatrixTuple operator-(const MatrixTuple& a, const MatrixTuple& b) {
  check_same_shape(a, b);
  std::vector<Matrix> e(a.entries_);
  for (std::size_t j = 0; j < e.size(); ++j) e[j] -= b.entries_[j];
  return MatrixTuple(std::move(e));
}

MatrixTuple operator*(cplx s, const MatrixTuple& a) {
  std::vector<Matrix> e(a.entries_);
  for (auto& x : e) x *= s;
  return MatrixTuple(std::move(e));
}

bool operator==(const MatrixTuple& a, const MatrixTuple& b) {
  if (a.n() != b.n() || a.m() != b.m()) return false;
  for (int j = 0; j < a.m(); ++j) {
    if (a[j] != b[j]) return false;
  }
  return true;
}

cplx normalized_trace(const Matrix& a) { return a.trace() / static_cast<double>(a.rows()); }

cplx trace_inner_product(const MatrixTuple& x, const MatrixTuple& y) {
  check_same_shape(x, y);
  cplx s = 0.0;
  for (int j = 0; j < x.m(); ++j) {
    // Tr(X^* Y) = sum_ab conj(X_ab) Y_ab
    s += (x[j].array().conjugate() * y[j].array()).sum();
  }
  return s / static_cast<double>(x.n());
}

double real_inner_product(const MatrixTuple& x, const MatrixTuple& y) {
  return trace_inner_product(x, y).real();
}

double operator_norm(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  if (x.rows() <= 16) {
    Eigen::JacobiSVD<Matrix> svd(x);
    return svd.singularValues()(0);
  }
  Eigen::BDCSVD<Matrix> svd(x);
  return svd.singularValues()(0);
}

double operator_norm(const MatrixTuple& x) {
  double r = 0.0;
  for (const auto& e : x.entries()) r = std::max(r, operator_norm(e));
  return r;
}

bool is_hermitian(const Matrix& x, double tol) {
  if (x.rows() != x.cols()) return false;
  return (x - x.adjoint()).norm() <= tol * (1.0 + x.norm());
}

MatrixTuple sa_embedding(const MatrixTuple& x) {
  std::vector<Matrix> e;
  e.reserve(2 * static_cast<std::size_t>(x.m()));
  const cplx two_i(0.0, 2.0);
  for (const auto& xj : x.entries()) {
    Matrix re = (xj + xj.adjoint()) * 0.5;
    Matrix im = (xj - xj.adjoint()) / two_i;
    // Exact hermiticity: symmetrize away rounding on the diagonal.
    re.diagonal() = re.diagonal().real().cast<cplx>();
    im.diagonal() = im.diagonal().real().cast<cplx>();
    e.push_back(std::move(re));
    e.push_back(std::move(im));
  }
  return MatrixTuple(std::move(e));
}

MatrixTuple sa_reconstruct(const MatrixTuple& sa) {
  if (sa.m() % 2 != 0) throw DimensionError("self-adjoint embedding has an odd number of entries");
  std::vector<Matrix> e;
  e.reserve(static_cast<std::size_t>(sa.m() / 2));
  for (int j = 0; j < sa.m(); j += 2) e.push_back(sa[j] + cplx(0.0, 1.0) * sa[j + 1]);
  return MatrixTuple(std::move(e));
}

Matrix clip_singular_values(const Matrix& x, double radius) {
  if (radius <= 0.0) throw std::invalid_argument("clip radius must be positive");
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= radius) return x;
  Eigen::VectorXd clipped = s.cwiseMin(radius);
  return svd.matrixU() * clipped.cast<cplx>().asDiagonal() * svd.matrixV().adjoint();
}

MatrixTuple sample_ginibre(int n, int m, Seed seed) {
  if (n < 1 || m < 1) throw DimensionError("n and m must be positive");
  Rng rng(seed);
  const double sd = std::sqrt(0.5 / n);
  std::vector<Matrix> e;
  e.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    Matrix x(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const double re = rng.normal();
        const double im = rng.normal();
        x(a, b) = cplx(sd * re, sd * im);
      }
    }
    e.push_back(std::move(x));
  }
  return MatrixTuple(std::move(e));
}

Matrix sample_gue(int n, Seed seed) {
  const Matrix g = sample_ginibre(n, 1, seed)[0];
  Matrix h = (g + g.adjoint()) / std::sqrt(2.0);
  h.diagonal() = h.diagonal().real().cast<cplx>();
  return h;
}

Matrix sample_haar_unitary(int n, Seed seed) {
  const Matrix g = sample_ginibre(n, 1, seed)[0];
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    const cplx d = r(j, j);
    const double a = std::abs(d);
    if (a > 0.0) q.col(j) *= d / a;
  }
  return q;
}

std::pair<Matrix, Matrix> tensor_embed(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols()) throw DimensionError("tensor factors must be square");
  const long k = a.rows();
  const long l = b.rows();
  if (k < 1 || l < 1) throw DimensionError("tensor factors must be nonempty");
  if (k > kMaxMatrixSize / l) {
    throw DimensionError("tensor size overflow: " + std::to_string(k) + "*" + std::to_string(l) +
                         " exceeds " + std::to_string(kMaxMatrixSize));
  }
  const long n = k * l;
  Matrix left = Matrix::Zero(n, n);
  Matrix right = Matrix::Zero(n, n);
  // Index (i, p) -> i*l + p.
  for (long i = 0; i < k; ++i) {
    for (long j = 0; j < k; ++j) {
      for (long p = 0; p < l; ++p) left(i * l + p, j * l + p) = a(i, j);
    }
  }
  for (long i = 0; i < k; ++i) {
    for (long p = 0; p < l; ++p) {
      for (long q = 0; q < l; ++q) right(i * l + p, i * l + q) = b(p, q);
    }
  }
  return {std::move(left), std::move(right)};
}

void write_tuple(std::ostream& out, const MatrixTuple& x) {
  for (const auto& e : x.entries()) {
    for (int a = 0; a < x.n(); ++a) {
      for (int b = 0; b < x.n(); ++b) {
        write_le_double(out, e(a, b).real());
        write_le_double(out, e(a, b).imag());
      }
    }
  }
}

MatrixTuple read_tuple(std::istream& in, int n, int m) {
  if (n < 1 || m < 1 || n > kMaxMatrixSize) throw DimensionError("invalid tuple dimensions");
  std::vector<Matrix> e;
  e.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    Matrix x(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const double re = read_le_double(in);
        const double im = read_le_double(in);
        x(a, b) = cplx(re, im);
      }
    }
    e.push_back(std::move(x));
  }
  return MatrixTuple(std::move(e));
}

}  // namespace freegeo
