#pragma once

// Complex matrix tuples with the normalized-trace geometry, counter-based
// random streams and the reference random-matrix samplers.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace freegeo {

using cplx = std::complex<double>;
using Matrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Identifies one reproducible random stream.
struct Seed {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  // Derived stream; distinct k give independent-looking streams.
  Seed child(std::uint64_t k) const;
  bool operator==(const Seed&) const = default;
};

// Counter-based generator: output i is a keyed SplitMix64 hash of i, so a
// stream is a pure function of its Seed.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(Seed seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  double uniform();  // open interval (0, 1)
  double normal();   // standard normal, Box-Muller

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// m complex n x n matrices. Immutable once built.
class MatrixTuple {
 public:
  MatrixTuple() = default;
  explicit MatrixTuple(std::vector<Matrix> entries);

  static MatrixTuple zeros(int n, int m);
  static MatrixTuple scalar(int n, std::span<const cplx> values);

  int n() const { return n_; }
  int m() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  const Matrix& operator[](int j) const { return entries_[static_cast<std::size_t>(j)]; }
  const std::vector<Matrix>& entries() const { return entries_; }

  // Normalized-trace (Hilbert-Schmidt / n) norm.
  double norm() const;
  double squared_norm() const;

  MatrixTuple adjoint() const;
  // U X_j U^* for every j.
  MatrixTuple conjugated(const Matrix& u) const;

  friend MatrixTuple operator+(const MatrixTuple& a, const MatrixTuple& b);
  friend MatrixTuple operator-(const MatrixTuple& a, const MatrixTuple& b);
  friend MatrixTuple operator*(cplx s, const MatrixTuple& a);
  friend MatrixTuple operator*(double s, const MatrixTuple& a) { return cplx(s, 0.0) * a; }
  friend bool operator==(const MatrixTuple& a, const MatrixTuple& b);

 private:
  int n_ = 0;
  std::vector<Matrix> entries_;
};

// tr_n(A) = Tr(A) / n
cplx normalized_trace(const Matrix& a);

// sum_j tr_n(X_j^* Y_j)
cplx trace_inner_product(const MatrixTuple& x, const MatrixTuple& y);
// re <X, Y>; the real inner product used by all convex-analysis code.
double real_inner_product(const MatrixTuple& x, const MatrixTuple& y);

double operator_norm(const Matrix& x);
// max_j of the largest singular value of X_j
double operator_norm(const MatrixTuple& x);

bool is_hermitian(const Matrix& x, double tol = 1e-10);

// ((X_j + X_j^*)/2, (X_j - X_j^*)/2i)_j, interleaved per coordinate.
MatrixTuple sa_embedding(const MatrixTuple& x);
// Inverse of sa_embedding: X_j = A_j + i B_j.
MatrixTuple sa_reconstruct(const MatrixTuple& sa);

// Frobenius projection onto {Y : ||Y||_op <= radius}: singular values clipped.
Matrix clip_singular_values(const Matrix& x, double radius);

// i.i.d. complex Gaussian entries with E|z|^2 = 1/n, so E tr_n(X^* X) = 1.
MatrixTuple sample_ginibre(int n, int m, Seed seed);
// Hermitian, E tr_n(X^2) = 1.
Matrix sample_gue(int n, Seed seed);
// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
Matrix sample_haar_unitary(int n, Seed seed);

// (A (x) I_l, I_k (x) B), both of size k*l.
std::pair<Matrix, Matrix> tensor_embed(const Matrix& a, const Matrix& b);

inline constexpr int kMaxMatrixSize = 4096;

// Little-endian complex128, matrices row-major, tuple entries consecutive.
void write_tuple(std::ostream& out, const MatrixTuple& x);
MatrixTuple read_tuple(std::istream& in, int n, int m);

}  // namespace freegeo
