#pragma once

// Random matrix ensembles with density proportional to exp(-n^2 phi(X)) on
// M_n^m, sampled by Metropolis-adjusted Langevin dynamics in the tr_n metric,
// plus the concentration diagnostics for strongly convex phi.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "freegeo/logic.hpp"
#include "freegeo/matcore.hpp"

namespace freegeo {

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A quantifier-free formula phi with a declared strong-convexity constant c.
class Potential {
 public:
  Potential(Formula f, double c);
  static Potential parse(const std::string& text, double c);
  // (c/2) |X|^2 on m-tuples.
  static Potential quadratic(double c, int m);

  const Formula& formula() const { return formula_; }
  double c() const { return c_; }
  std::string text() const { return formula_.to_string(); }
  std::uint64_t hash() const;
  int arity() const { return formula_.free_arity(); }

  double value(const MatrixTuple& x) const;
  std::pair<double, MatrixTuple> value_and_gradient(const MatrixTuple& x) const;

  // phi + re<a, X> for a scalar tuple a (a_j times the identity).
  Potential with_linear_tilt(const std::vector<cplx>& a) const;
  // phi + w * extra, keeping c (w >= 0 and extra convex).
  Potential plus(const Formula& extra, double w) const;

 private:
  Formula formula_;
  double c_;
};

// Max violation of the c-strong-convexity midpoint inequality on random
// tuples of size n.
double convexity_spot_check(const Potential& pot, int n, int m, Seed seed, int samples = 24);

struct SamplerOptions {
  Seed seed{};
  int adapt_steps = 400;
  int pilot_steps = 600;
  int burn_in = -1;   // < 0: ten integrated autocorrelation times
  int thin = 0;       // <= 0: ceil of the autocorrelation time
  double step = 0.0;  // <= 0: start at 0.5 / (c n^2)
  bool adapt = true;
  double target_accept = 0.574;
  int max_retries = 5;
  bool check_convexity = true;
  std::optional<MatrixTuple> initial;
};

struct SamplerDiagnostics {
  double acceptance = 0.0;
  double step = 0.0;
  double iat = 1.0;
  double ess = 0.0;
  int burn_in = 0;
  int thin = 1;
  int retries = 0;
  long total_steps = 0;
};

struct EnsembleInfo {
  std::string potential;
  std::uint64_t potential_hash = 0;
  double c = 0.0;
  Seed seed{};
  SamplerDiagnostics diagnostics;
};

class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(int n, int m, std::vector<MatrixTuple> samples, EnsembleInfo info = {});

  int n() const { return n_; }
  int m() const { return m_; }
  std::size_t size() const { return samples_.size(); }
  const MatrixTuple& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<MatrixTuple>& samples() const { return samples_; }
  const EnsembleInfo& info() const { return info_; }

  // Every sample conjugated by the same unitary.
  Ensemble conjugated(const Matrix& u) const;
  double mean_squared_norm() const;
  MatrixTuple mean() const;

 private:
  int n_ = 0;
  int m_ = 0;
  std::vector<MatrixTuple> samples_;
  EnsembleInfo info_;
};

Ensemble sample_gibbs(const Potential& pot, int n, int m, int count, const SamplerOptions& opts = {});

// Sokal integrated autocorrelation time with automatic windowing.
double integrated_autocorrelation(const std::vector<double>& series, double window_c = 5.0);

struct GradientAtZeroReport {
  std::vector<cplx> gradient;  // scalar subgradient of phi at 0
  double gradient_norm = 0.0;
  std::vector<double> radii;
  std::vector<double> bounds;  // (1/R) sup over the cube [-R,R]^m of phi - phi(0)
  bool satisfied = false;
};
GradientAtZeroReport gradient_at_zero(const Potential& pot, int m, const std::vector<double>& radii);

struct NormTailReport {
  std::vector<double> deltas;
  std::vector<double> frequencies;  // at the calibrated theta
  std::vector<double> bounds;       // 2 exp(-n delta^2)
  double theta = 0.0;               // smallest theta making every bound hold
  std::size_t samples = 0;
};
NormTailReport norm_tail_check(const Ensemble& e, double c, std::vector<double> deltas = {});

struct ExpectationReport {
  double lhs = 0.0;  // (E |X|^2)^{1/2}
  double rhs = 0.0;  // m^{1/2} (c^{-1/2} + c^{-1} C)
  double sup_constant = 0.0;
  double standard_error = 0.0;
  bool sufficient_samples = false;
  bool holds = false;
};
ExpectationReport expectation_bound_check(const Ensemble& e, const Potential& pot, int n_eval = 2,
                                          const EvalOptions& opts = {});

struct HerbstReport {
  double lipschitz = 1.0;
  double mean = 0.0;
  std::vector<double> deltas;
  std::vector<double> frequencies;
  std::vector<double> bounds;   // 2 exp(-c n^2 delta^2 / 2L^2)
  std::vector<double> allowed;  // bound plus binomial noise
  bool passed = false;
};
HerbstReport herbst_check(const Ensemble& e, const Formula& f, double c, double lipschitz,
                          const EvalOptions& opts = {}, double z = 3.0);

// Binary ensemble files: "FIGE", u16 version, u32 n, u32 m, u64 count,
// the samples, then a u64 length and a JSON metadata block.
void write_ensemble(std::ostream& out, const Ensemble& e);
Ensemble read_ensemble(std::istream& in);
void save_ensemble(const std::string& path, const Ensemble& e);
Ensemble load_ensemble(const std::string& path);

}  // namespace freegeo
