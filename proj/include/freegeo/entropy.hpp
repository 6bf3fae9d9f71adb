#pragma once

// Normalized entropy of Gibbs ensembles by thermodynamic integration, and
// the analytic and estimator references used alongside it.

#include <vector>

#include <Eigen/Dense>

#include "freegeo/gibbs.hpp"

namespace freegeo {

class EntropyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LadderKind {
  Uniform,  // Gauss-Legendre nodes in lambda
  Squared   // lambda = u^2, nodes in u; clusters near lambda = 0
};

struct EntropyOptions {
  int nodes = 16;
  int samples = 300;  // per ladder node
  Seed seed{};
  LadderKind ladder = LadderKind::Uniform;
  SamplerOptions sampler{};  // seed is overridden per node
  int threads = 0;           // <= 0: hardware concurrency
};

struct LadderPoint {
  double lambda = 0.0;
  double weight = 0.0;     // quadrature weight in lambda, Jacobian included
  double mean_stat = 0.0;  // E_lambda[phi - (c/2)|X|^2]
  double std_error = 0.0;
};

struct EntropyReport {
  int n = 0;
  int m = 0;
  double c = 0.0;
  double h_n = 0.0;
  double log_Z = 0.0;           // in tr_n-orthonormal coordinates
  double mean_potential = 0.0;  // E phi at lambda = 1
  double error_bar = 0.0;
  std::vector<LadderPoint> ladder;
};

// Nodes and weights of the n-point Gauss-Legendre rule on [a, b].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n, double a = 0.0, double b = 1.0);

// log of the integral of exp(-n^2 (c/2)|X|^2) over M_n^m.
double gaussian_log_partition(double c, int n, int m);

EntropyReport gibbs_entropy(const Potential& pot, int n, int m, const EntropyOptions& opts = {});

// Closed form for potential (c/2)|X|^2: m log(2 pi e) - m log c.
double gaussian_gibbs_entropy(double c, int m);

// (1/2) log(2 pi e) + (1/2) log var.
double semicircular_entropy(double variance);

// Double integral of log|s - t| against the semicircle law of the given
// variance: -1/4 + (1/2) log var.
double log_energy_integral(double variance);

// h + log|det A|.
double entropy_linear_change(double h, const Eigen::MatrixXd& a);

// (1/2) log det(2 pi e Sigma).
double gaussian_entropy(const Eigen::MatrixXd& covariance);

// Kozachenko-Leonenko estimate; rows are points. Biased upward by O(N^{-1/d})
// for smooth densities, so only low-dimensional clouds are accepted.
double knn_entropy(const Eigen::MatrixXd& points, int k = 1);

}  // namespace freegeo
