#include "freegeo/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "freegeo/convex.hpp"

namespace freegeo {

// ------------------------------------------------------------- potential

Potential::Potential(Formula f, double c) : formula_(std::move(f)), c_(c) {
  if (!formula_.valid()) throw std::invalid_argument("empty potential formula");
  if (!formula_.quantifier_free()) throw std::invalid_argument("Gibbs potentials must be quantifier-free");
  if (!(c_ > 0.0) || !std::isfinite(c_)) throw std::invalid_argument("potential needs a convexity constant c > 0");
}

Potential Potential::parse(const std::string& text, double c) { return Potential(freegeo::parse(text), c); }

Potential Potential::quadratic(double c, int m) {
  if (m < 1) throw DimensionError("m must be positive");
  NcPolynomial p;
  for (int j = 0; j < m; ++j) {
    p = p + NcPolynomial::letter(Letter{Letter::Free, j, true}) * NcPolynomial::letter(Letter{Letter::Free, j, false});
  }
  Formula f = Formula::connective(Connective::Mul, {Formula::constant(0.5 * c), Formula::atom(p)});
  return Potential(f, c);
}

std::uint64_t Potential::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::string s = text() + "|" + std::to_string(c_);
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double Potential::value(const MatrixTuple& x) const { return evaluate(formula_, x); }

std::pair<double, MatrixTuple> Potential::value_and_gradient(const MatrixTuple& x) const {
  return freegeo::value_and_gradient(formula_, x);
}

Potential Potential::with_linear_tilt(const std::vector<cplx>& a) const {
  NcPolynomial p;
  for (std::size_t j = 0; j < a.size(); ++j) {
    p = p + std::conj(a[j]) * NcPolynomial::letter(Letter{Letter::Free, static_cast<int>(j), false});
  }
  return Potential(Formula::connective(Connective::Add, {formula_, Formula::atom(p)}), c_);
}

Potential Potential::plus(const Formula& extra, double w) const {
  if (w < 0.0) throw std::invalid_argument("added term weight must be nonnegative");
  Formula term = Formula::connective(Connective::Mul, {Formula::constant(w), extra});
  return Potential(Formula::connective(Connective::Add, {formula_, term}), c_);
}

double convexity_spot_check(const Potential& pot, int n, int m, Seed seed, int samples) {
  const Point like(MatrixTuple::zeros(n, m));
  const auto triples = random_midpoint_samples(like, static_cast<std::size_t>(samples), 1.0 / n, seed);
  const double c = pot.c();
  double worst = -kInf;
  for (const auto& s : triples) {
    const double a = s.alpha;
    const Point xa = (1.0 - a) * s.x + a * s.y;
    const double fx = pot.value(s.x.tuple());
    const double fy = pot.value(s.y.tuple());
    const double rhs = (1.0 - a) * fx + a * fy - 0.5 * c * a * (1.0 - a) * (s.x - s.y).squared_norm();
    const double v = (pot.value(xa.tuple()) - rhs) / (1.0 + std::abs(fx) + std::abs(fy));
    worst = std::max(worst, v);
  }
  return worst;
}

// -------------------------------------------------------------- ensemble

Ensemble::Ensemble(int n, int m, std::vector<MatrixTuple> samples, EnsembleInfo info)
    : n_(n), m_(m), samples_(std::move(samples)), info_(std::move(info)) {
  if (n < 1 || m < 1) throw DimensionError("ensemble dimensions must be positive");
  for (const auto& s : samples_) {
    if (s.n() != n || s.m() != m) throw DimensionError("ensemble sample has the wrong shape");
  }
}

Ensemble Ensemble::conjugated(const Matrix& u) const {
  std::vector<MatrixTuple> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.conjugated(u));
  return Ensemble(n_, m_, std::move(out), info_);
}

double Ensemble::mean_squared_norm() const {
  if (samples_.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : samples_) s += x.squared_norm();
  return s / static_cast<double>(samples_.size());
}

MatrixTuple Ensemble::mean() const {
  MatrixTuple acc = MatrixTuple::zeros(n_, m_);
  if (samples_.empty()) return acc;
  for (const auto& x : samples_) acc = acc + x;
  return (1.0 / static_cast<double>(samples_.size())) * acc;
}

// --------------------------------------------------------------- sampler

double integrated_autocorrelation(const std::vector<double>& series, double window_c) {
  const std::size_t n = series.size();
  if (n < 4) return 1.0;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (!(var > 0.0)) return 1.0;
  double tau = 1.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) acc += (series[i] - mean) * (series[i + k] - mean);
    const double rho = acc / (static_cast<double>(n) * var);
    tau += 2.0 * rho;
    if (static_cast<double>(k) >= window_c * tau) break;
  }
  return std::max(tau, 1.0);
}

namespace {

struct ChainState {
  MatrixTuple x;
  double energy = 0.0;  // n^2 phi(x)
  MatrixTuple grad;     // n^2 grad phi(x)
};

class MalaChain {
 public:
  MalaChain(const Potential& pot, int n, int m, Rng& rng) : pot_(pot), n_(n), m_(m), rng_(rng) {}

  ChainState make_state(MatrixTuple x) const {
    auto [v, g] = pot_.value_and_gradient(x);
    const double n2 = static_cast<double>(n_) * n_;
    return ChainState{std::move(x), n2 * v, n2 * g};
  }

  // One MALA step; returns the acceptance probability and whether it moved.
  std::pair<double, bool> step(ChainState& s, double eps) {
    std::vector<Matrix> xi;
    xi.reserve(static_cast<std::size_t>(m_));
    const double scale = std::sqrt(static_cast<double>(n_));
    for (int j = 0; j < m_; ++j) {
      Matrix e(n_, n_);
      for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double re = rng_.normal();
        const double im = rng_.normal();
        e.data()[i] = cplx(scale * re, scale * im);
      }
      xi.push_back(std::move(e));
    }
    const MatrixTuple noise(std::move(xi));
    const double u = rng_.uniform();
    MatrixTuple prop = s.x - eps * s.grad + std::sqrt(2.0 * eps) * noise;
    ChainState next = make_state(std::move(prop));
    const double fwd = 2.0 * eps * noise.squared_norm();
    const double bwd = (s.x - next.x + eps * next.grad).squared_norm();
    const double log_alpha = -next.energy + s.energy - (bwd - fwd) / (4.0 * eps);
    const double alpha = std::isfinite(log_alpha) ? std::min(1.0, std::exp(log_alpha)) : 0.0;
    if (std::isfinite(next.energy) && std::log(u) < log_alpha) {
      s = std::move(next);
      return {alpha, true};
    }
    return {alpha, false};
  }

 private:
  const Potential& pot_;
  int n_;
  int m_;
  Rng& rng_;
};

}  // namespace

Ensemble sample_gibbs(const Potential& pot, int n, int m, int count, const SamplerOptions& opts) {
  if (n < 1 || m < 1 || count < 1) throw DimensionError("n, m and count must be positive");
  if (pot.arity() > m) throw DimensionError("potential uses more variables than m");
  if (opts.check_convexity) {
    const double v = convexity_spot_check(pot, n, m, opts.seed.child(0xc0417e5ULL));
    if (v > 1e-8) {
      std::ostringstream msg;
      msg << "potential fails the " << pot.c() << "-strong convexity spot check (relative violation " << v << ")";
      throw std::invalid_argument(msg.str());
    }
  }
  const double n2c = static_cast<double>(n) * n * pot.c();
  double eps = opts.step > 0.0 ? opts.step : 0.5 / n2c;
  Rng rng(opts.seed);
  MalaChain chain(pot, n, m, rng);
  MatrixTuple x0 = opts.initial ? *opts.initial : MatrixTuple::zeros(n, m);
  if (x0.n() != n || x0.m() != m) throw DimensionError("initial tuple has the wrong shape");
  ChainState state = chain.make_state(std::move(x0));

  SamplerDiagnostics diag;
  long steps = 0;
  if (opts.adapt && opts.step <= 0.0) {
    double log_eps = std::log(eps);
    for (int k = 0; k < opts.adapt_steps; ++k) {
      const auto [alpha, moved] = chain.step(state, std::exp(log_eps));
      (void)moved;
      ++steps;
      const double gain = std::pow(static_cast<double>(k) + 1.0, -0.6);
      log_eps += std::clamp(gain * (alpha - opts.target_accept), -1.0, 1.0);
    }
    eps = std::exp(log_eps);
  }

  double tau = 1.0;
  for (;;) {
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(opts.pilot_steps));
    int accepted = 0;
    for (int k = 0; k < opts.pilot_steps; ++k) {
      accepted += chain.step(state, eps).second ? 1 : 0;
      trace.push_back(state.energy);
      ++steps;
    }
    const double rate = opts.pilot_steps > 0 ? static_cast<double>(accepted) / opts.pilot_steps : 1.0;
    if (rate >= 0.05) {
      tau = integrated_autocorrelation(trace);
      break;
    }
    if (++diag.retries > opts.max_retries) {
      std::ostringstream msg;
      msg << "MALA acceptance collapsed (rate " << rate << " at step " << eps << " after " << diag.retries - 1
          << " halvings)";
      throw SamplerError(msg.str());
    }
    eps *= 0.5;
  }

  const int burn = opts.burn_in >= 0 ? opts.burn_in : static_cast<int>(std::ceil(10.0 * tau));
  const int thin = opts.thin > 0 ? opts.thin : std::max(1, static_cast<int>(std::ceil(tau)));
  for (int k = 0; k < burn; ++k) {
    chain.step(state, eps);
    ++steps;
  }
  std::vector<MatrixTuple> samples;
  samples.reserve(static_cast<std::size_t>(count));
  long accepted = 0;
  for (int i = 0; i < count; ++i) {
    for (int k = 0; k < thin; ++k) {
      accepted += chain.step(state, eps).second ? 1 : 0;
      ++steps;
    }
    samples.push_back(state.x);
  }
  diag.acceptance = static_cast<double>(accepted) / (static_cast<double>(count) * thin);
  diag.step = eps;
  diag.iat = tau;
  diag.ess = count * std::min(1.0, thin / tau);
  diag.burn_in = burn;
  diag.thin = thin;
  diag.total_steps = steps;

  EnsembleInfo info;
  info.potential = pot.text();
  info.potential_hash = pot.hash();
  info.c = pot.c();
  info.seed = opts.seed;
  info.diagnostics = diag;
  return Ensemble(n, m, std::move(samples), std::move(info));
}

// ----------------------------------------------------------- diagnostics

GradientAtZeroReport gradient_at_zero(const Potential& pot, int m, const std::vector<double>& radii) {
  if (m < pot.arity()) throw DimensionError("m is smaller than the potential's arity");
  if (m > 10) throw DimensionError("cube enumeration supports m <= 10");
  GradientAtZeroReport r;
  const auto [v0, g] = pot.value_and_gradient(MatrixTuple::zeros(1, m));
  double sq = 0.0;
  for (int j = 0; j < m; ++j) {
    r.gradient.push_back(g[j](0, 0));
    sq += std::norm(g[j](0, 0));
  }
  r.gradient_norm = std::sqrt(sq);
  r.satisfied = true;
  const std::size_t vertices = std::size_t{1} << (2 * m);
  for (double R : radii) {
    if (!(R > 0.0)) throw std::invalid_argument("radii must be positive");
    double best = -kInf;
    for (std::size_t mask = 0; mask < vertices; ++mask) {
      std::vector<cplx> vals(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) {
        const double re = (mask >> (2 * j)) & 1U ? R : -R;
        const double im = (mask >> (2 * j + 1)) & 1U ? R : -R;
        vals[static_cast<std::size_t>(j)] = cplx(re, im);
      }
      best = std::max(best, pot.value(MatrixTuple::scalar(1, vals)));
    }
    const double bound = (best - v0) / R;
    r.radii.push_back(R);
    r.bounds.push_back(bound);
    if (r.gradient_norm > bound + 1e-12 * (1.0 + std::abs(bound))) r.satisfied = false;
  }
  return r;
}

NormTailReport norm_tail_check(const Ensemble& e, double c, std::vector<double> deltas) {
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  if (deltas.empty()) deltas = {0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0};
  NormTailReport r;
  r.deltas = deltas;
  const MatrixTuple mean = e.mean();
  std::vector<double> z;
  z.reserve(e.size() * static_cast<std::size_t>(e.m()));
  for (const auto& x : e.samples()) {
    for (int j = 0; j < e.m(); ++j) z.push_back(operator_norm(Matrix(x[j] - mean[j])));
  }
  r.samples = z.size();
  std::sort(z.begin(), z.end(), std::greater<>());
  const double N = static_cast<double>(z.size());
  double theta = 0.0;
  for (double d : deltas) {
    const double bound = 2.0 * std::exp(-e.n() * d * d);
    r.bounds.push_back(bound);
    const auto allowed = static_cast<std::size_t>(std::floor(N * bound));
    if (allowed < z.size()) theta = std::max(theta, std::sqrt(c) * z[allowed] - d);
  }
  r.theta = theta;
  for (double d : deltas) {
    const double thr = (theta + d) / std::sqrt(c);
    // Strictly above the threshold, matching the calibration.
    const auto cnt = std::count_if(z.begin(), z.end(), [&](double v) { return v > thr; });
    r.frequencies.push_back(N > 0 ? static_cast<double>(cnt) / N : 0.0);
  }
  return r;
}

namespace {

FormulaPtr free_to_bound(const FormulaNode& n) {
  auto out = std::make_shared<FormulaNode>(n);
  if (n.kind == FormulaNode::Atom) {
    std::vector<NcPolynomial::Term> terms;
    for (auto [w, c] : n.poly.terms()) {
      for (auto& l : w) {
        if (l.kind == Letter::Free) l.kind = Letter::Bound;
      }
      terms.emplace_back(std::move(w), c);
    }
    out->poly = NcPolynomial(std::move(terms));
  }
  for (auto& ch : out->children) ch = free_to_bound(*ch);
  return out;
}

}  // namespace

ExpectationReport expectation_bound_check(const Ensemble& e, const Potential& pot, int n_eval,
                                          const EvalOptions& opts) {
  ExpectationReport r;
  const std::size_t N = e.size();
  r.sufficient_samples = N >= 2;
  if (N == 0) return r;
  std::vector<double> sq;
  sq.reserve(N);
  for (const auto& x : e.samples()) sq.push_back(x.squared_norm());
  const double mean = std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(N);
  double var = 0.0;
  for (double v : sq) var += (v - mean) * (v - mean);
  var = N > 1 ? var / static_cast<double>(N - 1) : 0.0;
  r.lhs = std::sqrt(mean);
  r.standard_error = r.lhs > 0.0 ? std::sqrt(var / static_cast<double>(N)) / (2.0 * r.lhs) : 0.0;

  const int m = e.m();
  const MatrixTuple zero = MatrixTuple::zeros(n_eval, m);
  const double phi0 = pot.value(zero);
  Formula body(free_to_bound(pot.formula().node()));
  body = Formula::connective(Connective::Sub, {body, Formula::constant(phi0)});
  for (int j = m - 1; j >= 0; --j) {
    body = Formula::quantifier(QuantKind::Sup, "y" + std::to_string(j + 1), 1.0, body);
  }
  r.sup_constant = std::max(0.0, evaluate(body, MatrixTuple::zeros(n_eval, 1), opts));
  const double c = pot.c();
  r.rhs = std::sqrt(static_cast<double>(m)) * (1.0 / std::sqrt(c) + r.sup_constant / c);
  r.holds = r.sufficient_samples && r.lhs <= r.rhs;
  return r;
}

HerbstReport herbst_check(const Ensemble& e, const Formula& f, double c, double lipschitz, const EvalOptions& opts,
                          double z) {
  if (!(lipschitz > 0.0) || !(c > 0.0)) throw std::invalid_argument("Lipschitz constant and c must be positive");
  HerbstReport r;
  r.lipschitz = lipschitz;
  const std::size_t N = e.size();
  if (N == 0) return r;
  std::vector<double> vals;
  vals.reserve(N);
  for (const auto& x : e.samples()) vals.push_back(evaluate(f, x, opts));
  r.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(N);
  const double n2 = static_cast<double>(e.n()) * e.n();
  const double sigma = lipschitz / std::sqrt(n2 * c);
  r.passed = true;
  for (double k : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0}) {
    const double d = k * sigma;
    const double bound = std::min(1.0, 2.0 * std::exp(-c * n2 * d * d / (2.0 * lipschitz * lipschitz)));
    const auto cnt = std::count_if(vals.begin(), vals.end(), [&](double v) { return std::abs(v - r.mean) >= d; });
    const double freq = static_cast<double>(cnt) / static_cast<double>(N);
    const double noise = z * std::sqrt(std::max(bound * (1.0 - bound), 1.0 / static_cast<double>(N)) /
                                       static_cast<double>(N));
    r.deltas.push_back(d);
    r.frequencies.push_back(freq);
    r.bounds.push_back(bound);
    r.allowed.push_back(bound + noise);
    if (freq > bound + noise) r.passed = false;
  }
  return r;
}

// -------------------------------------------------------------------- io

namespace {

constexpr char kMagic[4] = {'F', 'I', 'G', 'E'};
constexpr std::uint16_t kVersion = 1;

template <class T>
void write_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(static_cast<std::uint64_t>(v) >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!in) throw std::runtime_error("truncated ensemble file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<T>(v);
}

nlohmann::json info_to_json(const EnsembleInfo& info) {
  const auto& d = info.diagnostics;
  return {{"potential", info.potential},
          {"potential_hash", info.potential_hash},
          {"c", info.c},
          {"seed", {{"master_seed", info.seed.master_seed}, {"stream_id", info.seed.stream_id}}},
          {"diagnostics",
           {{"acceptance", d.acceptance},
            {"step", d.step},
            {"iat", d.iat},
            {"ess", d.ess},
            {"burn_in", d.burn_in},
            {"thin", d.thin},
            {"retries", d.retries},
            {"total_steps", d.total_steps}}}};
}

EnsembleInfo info_from_json(const nlohmann::json& j) {
  EnsembleInfo info;
  info.potential = j.value("potential", "");
  info.potential_hash = j.value("potential_hash", std::uint64_t{0});
  info.c = j.value("c", 0.0);
  if (j.contains("seed")) {
    info.seed.master_seed = j["seed"].value("master_seed", std::uint64_t{0});
    info.seed.stream_id = j["seed"].value("stream_id", std::uint64_t{0});
  }
  if (j.contains("diagnostics")) {
    const auto& d = j["diagnostics"];
    auto& o = info.diagnostics;
    o.acceptance = d.value("acceptance", 0.0);
    o.step = d.value("step", 0.0);
    o.iat = d.value("iat", 1.0);
    o.ess = d.value("ess", 0.0);
    o.burn_in = d.value("burn_in", 0);
    o.thin = d.value("thin", 1);
    o.retries = d.value("retries", 0);
    o.total_steps = d.value("total_steps", 0L);
  }
  return info;
}

}  // namespace

void write_ensemble(std::ostream& out, const Ensemble& e) {
  out.write(kMagic, 4);
  write_le<std::uint16_t>(out, kVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.n()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.m()));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(e.size()));
  for (const auto& x : e.samples()) write_tuple(out, x);
  const std::string meta = info_to_json(e.info()).dump();
  write_le<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  if (!out) throw std::runtime_error("failed to write ensemble");
}

Ensemble read_ensemble(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) throw std::runtime_error("not an ensemble file (bad magic)");
  const auto version = read_le<std::uint16_t>(in);
  if (version != kVersion) throw std::runtime_error("unsupported ensemble version " + std::to_string(version));
  const auto n = read_le<std::uint32_t>(in);
  const auto m = read_le<std::uint32_t>(in);
  const auto count = read_le<std::uint64_t>(in);
  if (n == 0 || m == 0 || n > static_cast<std::uint32_t>(kMaxMatrixSize) || m > 4096) {
    throw std::runtime_error("ensemble header has invalid dimensions");
  }
  std::vector<MatrixTuple> samples;
  samples.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    samples.push_back(read_tuple(in, static_cast<int>(n), static_cast<int>(m)));
  }
  EnsembleInfo info;
  if (in.peek() != std::char_traits<char>::eof()) {
    const auto len = read_le<std::uint64_t>(in);
    if (len > (1u << 26)) throw std::runtime_error("ensemble metadata block too large");
    std::string meta(static_cast<std::size_t>(len), '\0');
    in.read(meta.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("truncated ensemble metadata");
    info = info_from_json(nlohmann::json::parse(meta));
  }
  return Ensemble(static_cast<int>(n), static_cast<int>(m), std::move(samples), std::move(info));
}

void save_ensemble(const std::string& path, const Ensemble& e) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_ensemble(out, e);
}

Ensemble load_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_ensemble(in);
}

}  // namespace freegeo
