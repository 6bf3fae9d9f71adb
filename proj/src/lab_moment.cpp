#include <algorithm>
#include <cmath>
#include <limits>

#include "freegeo/lab.hpp"
#include "freegeo/transport.hpp"

namespace freegeo::lab {

namespace {

// Standard normal quantile by bisection on erfc.
double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct GridMeasure {
  std::vector<double> y;
  std::vector<double> p;
  double dy = 0.0;

  Quantile1D quantile() const { return Quantile1D(y, p); }
};

double grid_entropy(const GridMeasure& g) {
  double h = 0.0;
  for (double pi : g.p) {
    if (pi > 0.0) h -= pi * std::log(pi / g.dy);
  }
  return h;
}

double grid_second_moment(const GridMeasure& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.y.size(); ++i) s += g.p[i] * g.y[i] * g.y[i];
  return s;
}

GridMeasure gibbs_on_grid(const GridMeasure& shape, const std::vector<double>& potential) {
  GridMeasure out = shape;
  const double lo = *std::min_element(potential.begin(), potential.end());
  double z = 0.0;
  for (std::size_t i = 0; i < potential.size(); ++i) {
    out.p[i] = std::exp(-(potential[i] - lo));
    z += out.p[i];
  }
  if (!(z > 0.0) || !std::isfinite(z)) throw std::runtime_error("Gibbs density underflows on the grid");
  for (double& v : out.p) v /= z;
  const double edge = std::max(out.p.front(), out.p.back());
  if (edge > 1e-12) throw std::runtime_error("Gibbs density does not decay inside the grid; widen it");
  return out;
}

}  // namespace

Report run_moment_fixed_point(const RunConfig& cfg) {
  const double t = cfg.get_real("t");
  if (!(t > 0.0)) throw ConfigError("t must be positive");
  const long iters = cfg.get_int("iterations");
  const long gp = cfg.get_int("grid_points");
  const double damping = cfg.get_real("damping");
  if (iters < 1 || gp < 16) throw ConfigError("need iterations >= 1 and grid_points >= 16");
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");

  const std::string& kind = cfg.get_string("mu");
  std::vector<double> atoms;
  if (kind == "delta0") {
    atoms = {0.0};
  } else if (kind == "normal") {
    const long k = cfg.get_int("atom_count");
    if (k < 1 || k > 10000) throw ConfigError("atom_count must lie in [1, 10000]");
    for (long i = 0; i < k; ++i) atoms.push_back(normal_quantile((i + 0.5) / static_cast<double>(k)));
  } else if (kind == "atoms") {
    atoms = cfg.get_list("atoms");
    if (atoms.empty() || atoms.size() > 10000) throw ConfigError("atoms must have 1 to 10000 entries");
  } else {
    throw ConfigError("mu must be delta0, normal or atoms");
  }
  const Quantile1D mu(atoms);
  double reach = 0.0;
  for (double a : atoms) reach = std::max(reach, std::abs(a));
  double half = cfg.get_real("grid_half_width");
  if (!(half > 0.0)) half = 10.0 / std::sqrt(t) + reach;

  GridMeasure nu;
  nu.dy = 2.0 * half / static_cast<double>(gp - 1);
  for (long i = 0; i < gp; ++i) nu.y.push_back(-half + nu.dy * static_cast<double>(i));
  {
    std::vector<double> pot(nu.y.size());
    for (std::size_t i = 0; i < pot.size(); ++i) pot[i] = 0.5 * nu.y[i] * nu.y[i];
    nu.p.assign(nu.y.size(), 0.0);
    nu = gibbs_on_grid(nu, pot);
  }

  auto objective = [&](const GridMeasure& g) {
    return grid_entropy(g) - inner_product_1d(mu, g.quantile()) - 0.5 * t * grid_second_moment(g);
  };
  auto gibbs_step = [&](const GridMeasure& g) {
    const KantorovichPair kp = kantorovich_potentials_1d(mu, g.quantile());
    std::vector<double> pot(g.y.size());
    for (std::size_t i = 0; i < pot.size(); ++i) {
      pot[i] = kp.psi.value(Point::scalar(g.y[i])) + 0.5 * t * g.y[i] * g.y[i];
    }
    return gibbs_on_grid(g, pot);
  };

  Report r;
  r.experiment = "moment";
  r.config = cfg.to_json();
  Series it{"iterates", {"iteration", "objective", "w2_step", "residual"}, {}};
  std::vector<double> objectives{objective(nu)};
  std::vector<double> residuals;
  for (long k = 0; k < iters; ++k) {
    const GridMeasure target = gibbs_step(nu);
    const double residual = w2_1d(nu.quantile(), target.quantile());
    GridMeasure next = nu;
    for (std::size_t i = 0; i < next.p.size(); ++i) next.p[i] = (1.0 - damping) * nu.p[i] + damping * target.p[i];
    const double step = w2_1d(nu.quantile(), next.quantile());
    nu = std::move(next);
    objectives.push_back(objective(nu));
    residuals.push_back(residual);
    it.rows.push_back({static_cast<double>(k), objectives[static_cast<std::size_t>(k)], step, residual});
  }
  const double terminal = w2_1d(nu.quantile(), gibbs_step(nu).quantile());
  it.rows.push_back({static_cast<double>(iters), objectives.back(), 0.0, terminal});
  r.series.push_back(it);
  Series density{"density", {"y", "mass"}, {}};
  for (std::size_t i = 0; i < nu.y.size(); ++i) density.rows.push_back({nu.y[i], nu.p[i]});
  r.series.push_back(density);

  double worst_drop = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < objectives.size(); ++k) worst_drop = std::min(worst_drop, objectives[k + 1] - objectives[k]);
  r.metrics.push_back(make_metric("objective_min_increment", worst_drop, Comparison::AtLeast, 0.0,
                                  cfg.get_real("monotone_tolerance"), "alternating maximization is monotone",
                                  "grid and discretization noise allowance"));
  r.metrics.push_back(make_metric("terminal_residual", terminal, Comparison::AtMost, std::max(residuals.front(), 1e-12),
                                  1e-12, "residual decays from the first iterate", "none"));
  r.quantities["first_residual"] = residuals.front();
  r.quantities["terminal_residual"] = terminal;
  r.quantities["terminal_objective"] = objectives.back();
  r.quantities["terminal_variance"] = grid_second_moment(nu) - std::pow(nu.quantile().mean(), 2);

  if (kind == "delta0") {
    // Independent discretization of N(0, 1/t) by quantile atoms.
    const int atoms_g = 20000;
    std::vector<double> g;
    g.reserve(atoms_g);
    for (int i = 0; i < atoms_g; ++i) g.push_back(normal_quantile((i + 0.5) / atoms_g) / std::sqrt(t));
    const double w = w2_1d(nu.quantile(), Quantile1D(g));
    r.metrics.push_back(make_metric("gaussian_fixed_point_w2", w, Comparison::AtMost, 0.0, cfg.get_real("tolerance"),
                                    "maximizer of h - t E q is N(0, 1/t)", "W2 tolerance"));
  }
  r.notes.push_back("nu_{k+1} proportional to exp(-(psi_k + t y^2/2)) with psi_k the Kantorovich potential of "
                    "(mu, nu_k) on the nu side");
  return r;
}

}  // namespace freegeo::lab
