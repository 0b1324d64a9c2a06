// Python bindings: simulation settings, the Brownian eigen-system, penalized
// fits, the PLRT and the adaptive test.

#include "gflm/adaptive.hpp"
#include "gflm/errors.hpp"
#include "gflm/simharness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace gflm;

namespace {

Grid grid_for(const Mat& curves) {
  if (curves.cols() < 2) throw InvalidInput("curves need at least two grid points");
  return Grid(static_cast<std::size_t>(curves.cols()));
}

py::dict sample_dict(const Sample& s) {
  py::dict d;
  d["t"] = s.data.grid().points();
  d["curves"] = s.data.curves();
  d["y"] = s.data.responses();
  d["beta0"] = s.beta0;
  d["x0"] = s.x0.values();
  d["mu0"] = s.mu0;
  d["y0"] = s.y0;
  if (s.data.weights()) d["weights"] = *s.data.weights();
  return d;
}

py::dict report_dict(const TestReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["null_params"] = r.null_params;
  d["reject_at"] = r.reject_at;
  return d;
}

Design brownian_design(const Mat& curves, const Vec& y, int N) {
  Grid grid = grid_for(curves);
  CurveDataset data(grid, curves, y);
  return make_design(data, brownian_system(2, N, grid, true));
}

}  // namespace

PYBIND11_MODULE(_gflm, m) {
  m.doc() = "Penalized functional linear models: fitting, likelihood ratio and adaptive tests";

  py::register_exception<Error>(m, "GflmError", PyExc_RuntimeError);

  m.def("brownian_eigenvalues", &brownian_eigenvalues, py::arg("m"), py::arg("count"),
        py::arg("rel_width") = 1e-10);

  m.def(
      "simulate",
      [](const std::string& setting, Eigen::Index n, double B, double xi, double tau, double r2, bool alt,
         std::size_t T, std::uint64_t seed, std::uint64_t trial) {
        SettingSpec spec;
        spec.setting = parse_setting(setting);
        spec.n = n;
        spec.B = B;
        spec.xi = xi;
        spec.tau = tau;
        spec.r2 = r2;
        spec.alt = alt;
        spec.T = T;
        spec.seed = seed;
        return sample_dict(SettingGenerator(spec).draw(trial));
      },
      py::arg("setting"), py::arg("n"), py::arg("B") = 0.0, py::arg("xi") = 1.0, py::arg("tau") = 0.05,
      py::arg("r2") = 0.0, py::arg("alt") = false, py::arg("T") = 1000, py::arg("seed") = 0,
      py::arg("trial") = 0);

  m.def(
      "fit_gcv",
      [](const Mat& curves, const Vec& y, int N) {
        Design d = brownian_design(curves, y, N);
        GcvTrace trace;
        PenalizedFit f = fit_gcv(d, default_lambda_grid(), Loss::L2, false, &trace);
        py::dict out;
        out["lambda"] = f.lambda;
        out["beta"] = f.beta();
        out["b"] = f.b;
        return out;
      },
      py::arg("curves"), py::arg("y"), py::arg("N") = 50);

  m.def(
      "plrt",
      [](const Mat& curves, const Vec& y, double lambda, int N, int mc_reps, std::uint64_t seed) {
        Design d = brownian_design(curves, y, N);
        if (lambda <= 0) lambda = fit_gcv(d, default_lambda_grid(), Loss::L2).lambda;
        PlrtOptions opts;
        if (mc_reps > 0) opts.calibration = Calibration{CalibrationMode::MonteCarlo, mc_reps, seed, 1};
        py::dict out = report_dict(plrt(d, Loss::L2, lambda, {}, opts));
        out["lambda"] = lambda;
        return out;
      },
      py::arg("curves"), py::arg("y"), py::arg("lam") = 0.0, py::arg("N") = 50, py::arg("mc_reps") = 0,
      py::arg("seed") = 0);

  m.def(
      "adaptive_test",
      [](const Mat& curves, const Vec& y, int k_n, double c0, bool gumbel, int reps, std::uint64_t seed,
         double alpha) {
        CurveDataset data(grid_for(curves), curves, y);
        AdaptiveConfig cfg;
        cfg.k_n = k_n;
        cfg.c0 = c0;
        cfg.calibration = gumbel ? AtCalibration::Gumbel : AtCalibration::MonteCarlo;
        cfg.reps = reps;
        cfg.seed = seed;
        AdaptiveReport r = adaptive_test(data, cfg, alpha);
        py::dict out;
        out["tau"] = r.tau;
        out["AT"] = r.AT;
        out["B_n"] = r.B_n;
        out["p_value"] = r.p_value;
        out["k_n"] = r.k_n;
        out["reject_at"] = r.reject_at;
        return out;
      },
      py::arg("curves"), py::arg("y"), py::arg("k_n") = 0, py::arg("c0") = 1.0, py::arg("gumbel") = false,
      py::arg("reps") = 2000, py::arg("seed") = 0, py::arg("alpha") = 0.05);

  m.def("lambda_schedule", &lambda_schedule, py::arg("n"), py::arg("k"), py::arg("c0") = 1.0);
  m.def("solve_Bn", &solve_Bn, py::arg("k_n"));

  m.def(
      "run_table",
      [](const std::string& setting, Eigen::Index n, double B, const std::vector<std::string>& methods, int trials,
         std::uint64_t seed, unsigned threads) {
        SettingSpec spec;
        spec.setting = parse_setting(setting);
        spec.n = n;
        spec.B = B;
        spec.seed = seed;
        std::vector<Method> ms;
        for (const auto& s : methods) ms.push_back(parse_method(s));
        HarnessOptions opts;
        opts.trials = trials;
        opts.threads = threads;
        return table_csv(run_table(spec, ms, opts));
      },
      py::arg("setting"), py::arg("n"), py::arg("B"), py::arg("methods"), py::arg("trials"), py::arg("seed") = 0,
      py::arg("threads") = 1);
}
