#pragma once

// Couplings between matrix ensembles: exact and entropic empirical W2,
// spectral (quantile) transport in one dimension, displacement
// interpolation and one-dimensional Kantorovich potentials.

#include <cstdint>
#include <vector>

#include "freegeo/convex.hpp"
#include "freegeo/gibbs.hpp"

namespace freegeo {

inline constexpr std::size_t kMaxAssignmentSize = 4096;

// FNV-1a over the sample bytes.
std::uint64_t ensemble_hash(const Ensemble& e);

struct TransportPlan {
  Ensemble source;
  Ensemble target;
  std::vector<std::size_t> pairing;  // source i -> target pairing[i]
  double cost = 0.0;                 // mean squared tr_n distance under the pairing
};

enum class W2Method { Exact, Sinkhorn };

struct SinkhornOptions {
  double regularization = 0.0;  // <= 0: 0.01 times the median cost
  int max_iter = 20000;
  double tol = 1e-5;  // marginal L1 error
};

struct W2Result {
  double w2 = 0.0;
  double cost = 0.0;  // squared value (transport cost of the returned coupling)
  W2Method method = W2Method::Exact;
  double regularization = 0.0;
  int iterations = 0;
  TransportPlan plan;  // filled by the exact method only
};

// Pairwise squared tr_n distances, rows = a, columns = b.
Eigen::MatrixXd cost_matrix(const Ensemble& a, const Ensemble& b);

// Minimum-cost perfect matching on a square cost matrix (shortest
// augmenting paths with potentials). Returns column assigned to each row.
std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost);

W2Result empirical_w2(const Ensemble& a, const Ensemble& b, W2Method method = W2Method::Exact,
                      const SinkhornOptions& sopts = {});

TransportPlan make_plan(const Ensemble& a, const Ensemble& b, std::vector<std::size_t> pairing);

// Mean re<x_i, y_pairing(i)>.
double plan_inner_product(const TransportPlan& plan);
// (E|x|^2 + E|y|^2 - W2^2) / 2 for the optimal plan.
double optimal_inner_product(const Ensemble& a, const Ensemble& b);

Ensemble displacement(const TransportPlan& plan, double t);

// W2 between empirical spectral distributions of two Hermitian matrices.
double spectral_w2_1d(const Matrix& x, const Matrix& y);

// Discrete measure on the line. Weights default to uniform.
class Quantile1D {
 public:
  Quantile1D() = default;
  explicit Quantile1D(std::vector<double> points, std::vector<double> weights = {});
  static Quantile1D spectrum(const Matrix& hermitian);

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return support_.size(); }
  double mean() const;
  double second_moment() const;

 private:
  std::vector<double> support_;
  std::vector<double> weights_;
};

struct CouplingAtom {
  std::size_t i = 0;  // index into mu
  std::size_t j = 0;  // index into nu
  double mass = 0.0;
};

// Monotone (north-west corner) coupling of sorted supports.
std::vector<CouplingAtom> monotone_coupling(const Quantile1D& mu, const Quantile1D& nu);
double w2_1d(const Quantile1D& mu, const Quantile1D& nu);
double inner_product_1d(const Quantile1D& mu, const Quantile1D& nu);

struct KantorovichPair {
  ScalarFn phi;  // convex, piecewise linear through the mu support
  ScalarFn psi;  // max_i x_i y - phi(x_i)
  std::vector<double> phi_values;  // phi on the mu support
  std::vector<double> psi_values;  // psi on the nu support
  double inner_product = 0.0;      // optimal E[xy]
};

KantorovichPair kantorovich_potentials_1d(const Quantile1D& mu, const Quantile1D& nu);

}  // namespace freegeo
