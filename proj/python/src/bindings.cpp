#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "freegeo/entropy.hpp"
#include "freegeo/lab.hpp"
#include "freegeo/transport.hpp"

namespace py = pybind11;
using namespace freegeo;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

// (m, n, n) complex array -> tuple.
MatrixTuple to_tuple(const CArray& a) {
  if (a.ndim() != 3 || a.shape(1) != a.shape(2)) throw DimensionError("expected an array of shape (m, n, n)");
  const auto m = a.shape(0), n = a.shape(1);
  std::vector<Matrix> mats;
  for (py::ssize_t j = 0; j < m; ++j) {
    Matrix x(n, n);
    std::memcpy(x.data(), a.data(j, 0, 0), sizeof(cplx) * static_cast<std::size_t>(n * n));
    mats.push_back(std::move(x));
  }
  return MatrixTuple(std::move(mats));
}

CArray from_tuple(const MatrixTuple& x) {
  CArray out({x.m(), x.n(), x.n()});
  for (int j = 0; j < x.m(); ++j) {
    std::memcpy(out.mutable_data(j, 0, 0), x[j].data(), sizeof(cplx) * static_cast<std::size_t>(x.n() * x.n()));
  }
  return out;
}

// (count, m, n, n) complex array -> ensemble.
Ensemble to_ensemble(const CArray& a) {
  if (a.ndim() != 4) throw DimensionError("expected an array of shape (count, m, n, n)");
  const auto count = a.shape(0), m = a.shape(1), n = a.shape(2);
  std::vector<MatrixTuple> xs;
  for (py::ssize_t i = 0; i < count; ++i) {
    std::vector<Matrix> mats;
    for (py::ssize_t j = 0; j < m; ++j) {
      Matrix x(n, n);
      std::memcpy(x.data(), a.data(i, j, 0, 0), sizeof(cplx) * static_cast<std::size_t>(n * n));
      mats.push_back(std::move(x));
    }
    xs.emplace_back(std::move(mats));
  }
  return Ensemble(static_cast<int>(n), static_cast<int>(m), std::move(xs));
}

CArray from_ensemble(const Ensemble& e) {
  const py::ssize_t count = static_cast<py::ssize_t>(e.size());
  CArray out({count, static_cast<py::ssize_t>(e.m()), static_cast<py::ssize_t>(e.n()), static_cast<py::ssize_t>(e.n())});
  const std::size_t block = static_cast<std::size_t>(e.n()) * static_cast<std::size_t>(e.n());
  for (py::ssize_t i = 0; i < count; ++i) {
    for (int j = 0; j < e.m(); ++j) {
      std::memcpy(out.mutable_data(i, j, 0, 0), e[static_cast<std::size_t>(i)][j].data(), sizeof(cplx) * block);
    }
  }
  return out;
}

py::dict diagnostics(const SamplerDiagnostics& d) {
  py::dict o;
  o["acceptance"] = d.acceptance;
  o["step"] = d.step;
  o["iat"] = d.iat;
  o["ess"] = d.ess;
  o["burn_in"] = d.burn_in;
  o["thin"] = d.thin;
  return o;
}

}  // namespace

PYBIND11_MODULE(_freegeo, mod) {
  mod.doc() = "Matrix-valued free entropy, transport and Gibbs sampling";

  py::register_exception<ParseError>(mod, "ParseError", PyExc_ValueError);
  py::register_exception<lab::ConfigError>(mod, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(mod, "DimensionError", PyExc_ValueError);

  mod.def(
      "evaluate",
      [](const std::string& formula, const CArray& x, std::uint64_t seed) {
        EvalOptions o;
        o.seed = Seed{seed, 0};
        return evaluate(parse(formula), to_tuple(x), o);
      },
      py::arg("formula"), py::arg("x"), py::arg("seed") = 0, "Value of a formula at a tuple of shape (m, n, n).");

  mod.def(
      "normalize_formula", [](const std::string& formula) { return parse(formula).to_string(); },
      py::arg("formula"));

  mod.def(
      "gue", [](int n, std::uint64_t seed) { return from_tuple(MatrixTuple({sample_gue(n, Seed{seed, 0})})); },
      py::arg("n"), py::arg("seed") = 0);

  mod.def(
      "sample_gibbs",
      [](const std::string& potential, double c, int n, int m, int count, std::uint64_t seed) {
        const Potential pot = potential.empty() ? Potential::quadratic(c, m) : Potential::parse(potential, c);
        SamplerOptions o;
        o.seed = Seed{seed, 0};
        Ensemble e;
        {
          py::gil_scoped_release release;
          e = sample_gibbs(pot, n, m, count, o);
        }
        return py::make_tuple(from_ensemble(e), diagnostics(e.info().diagnostics));
      },
      py::arg("potential") = "", py::arg("c") = 1.0, py::arg("n") = 4, py::arg("m") = 1, py::arg("count") = 100,
      py::arg("seed") = 0,
      "Samples (count, m, n, n) from exp(-n^2 phi); an empty potential means (c/2)|X|^2.");

  mod.def(
      "empirical_w2",
      [](const CArray& a, const CArray& b, const std::string& method) {
        if (method != "exact" && method != "sinkhorn") throw std::invalid_argument("method must be exact or sinkhorn");
        const W2Result r = empirical_w2(to_ensemble(a), to_ensemble(b),
                                        method == "exact" ? W2Method::Exact : W2Method::Sinkhorn);
        py::dict o;
        o["w2"] = r.w2;
        o["cost"] = r.cost;
        o["regularization"] = r.regularization;
        if (method == "exact") o["pairing"] = r.plan.pairing;
        return o;
      },
      py::arg("a"), py::arg("b"), py::arg("method") = "exact");

  mod.def(
      "w2_1d",
      [](std::vector<double> x, std::vector<double> y) { return w2_1d(Quantile1D(std::move(x)), Quantile1D(std::move(y))); },
      py::arg("x"), py::arg("y"));

  mod.def(
      "gibbs_entropy",
      [](const std::string& potential, double c, int n, int m, int nodes, int samples, std::uint64_t seed) {
        const Potential pot = potential.empty() ? Potential::quadratic(c, m) : Potential::parse(potential, c);
        EntropyOptions o;
        o.nodes = nodes;
        o.samples = samples;
        o.seed = Seed{seed, 0};
        EntropyReport r;
        {
          py::gil_scoped_release release;
          r = gibbs_entropy(pot, n, m, o);
        }
        py::dict d;
        d["h_n"] = r.h_n;
        d["error_bar"] = r.error_bar;
        d["log_Z"] = r.log_Z;
        d["mean_potential"] = r.mean_potential;
        return d;
      },
      py::arg("potential") = "", py::arg("c") = 1.0, py::arg("n") = 4, py::arg("m") = 1, py::arg("nodes") = 8,
      py::arg("samples") = 200, py::arg("seed") = 0);

  mod.def("gaussian_gibbs_entropy", &gaussian_gibbs_entropy, py::arg("c"), py::arg("m"));
  mod.def("semicircular_entropy", &semicircular_entropy, py::arg("variance"));
  mod.def("log_energy_integral", &log_energy_integral, py::arg("variance"));
  mod.def("knn_entropy", &knn_entropy, py::arg("points"), py::arg("k") = 1);

  mod.def("experiment_names", &lab::experiment_names);
  mod.def(
      "run_experiment",
      [](const std::string& experiment, const std::map<std::string, std::string>& overrides) {
        lab::RunConfig cfg(experiment);
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        lab::Report r;
        {
          py::gil_scoped_release release;
          r = lab::run_experiment(cfg);
        }
        return r.to_json().dump();
      },
      py::arg("experiment"), py::arg("overrides") = std::map<std::string, std::string>{},
      "Runs a lab experiment; returns the JSON report as text.");

  mod.attr("__version__") = lab::code_version();
}
