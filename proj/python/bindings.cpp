#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cvxreg/errors.hpp"
#include "cvxreg/estimators.hpp"
#include "cvxreg/experiments.hpp"
#include "cvxreg/io.hpp"
#include "cvxreg/tuning.hpp"

namespace py = pybind11;
using namespace cvxreg;

namespace {

Dataset make_dataset(const Matrix& x, const Vector& y, std::vector<std::string> tags) {
  Dataset data;
  data.x = x;
  data.y = y;
  data.tags = std::move(tags);
  data.validate();
  return data;
}

EstimatorConfig apply_flags(EstimatorConfig config, bool monotone, py::object min_norm,
                            bool standardize) {
  config.monotone = monotone;
  config.standardize = standardize;
  if (!min_norm.is_none()) config.min_norm_refinement = min_norm.cast<bool>();
  return config;
}

}  // namespace

PYBIND11_MODULE(_cvxreg, m) {
  m.doc() = "Shape-constrained convex regression (CR/PCR/LCR/ALCR/WRCR)";

  py::register_exception<Error>(m, "CvxregError");

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("x"), py::arg("y"),
           py::arg("tags") = std::vector<std::string>{})
      .def_property_readonly("x", [](const Dataset& d) { return d.x; })
      .def_property_readonly("y", [](const Dataset& d) { return d.y; })
      .def_property_readonly("tags", [](const Dataset& d) { return d.tags; })
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("d", &Dataset::dim);

  py::class_<EstimatorConfig>(m, "EstimatorConfig")
      .def_property_readonly("variant",
                             [](const EstimatorConfig& c) { return std::string(to_string(c.variant)); })
      .def_readonly("monotone", &EstimatorConfig::monotone)
      .def_readonly("min_norm_refinement", &EstimatorConfig::min_norm_refinement);

  m.def(
      "cr",
      [](bool monotone, py::object min_norm, bool standardize) {
        return apply_flags(EstimatorConfig::cr(), monotone, min_norm, standardize);
      },
      py::arg("monotone") = false, py::arg("min_norm") = py::none(),
      py::arg("standardize") = false);
  m.def(
      "pcr",
      [](double lam, bool monotone, py::object min_norm, bool standardize) {
        return apply_flags(EstimatorConfig::pcr(lam), monotone, min_norm, standardize);
      },
      py::arg("lambda_"), py::arg("monotone") = false, py::arg("min_norm") = py::none(),
      py::arg("standardize") = false);
  m.def(
      "lcr",
      [](double L, bool monotone, py::object min_norm, bool standardize) {
        return apply_flags(EstimatorConfig::lcr(L), monotone, min_norm, standardize);
      },
      py::arg("L"), py::arg("monotone") = false, py::arg("min_norm") = py::none(),
      py::arg("standardize") = false);
  m.def(
      "alcr",
      [](const Vector& b0, double L0, bool monotone, py::object min_norm, bool standardize) {
        return apply_flags(EstimatorConfig::alcr(b0, L0), monotone, min_norm, standardize);
      },
      py::arg("b0"), py::arg("L0"), py::arg("monotone") = false, py::arg("min_norm") = py::none(),
      py::arg("standardize") = false);
  m.def(
      "wrcr",
      [](const Vector& l0, const Vector& u0, bool monotone, py::object min_norm,
         bool standardize) {
        return apply_flags(EstimatorConfig::wrcr(l0, u0), monotone, min_norm, standardize);
      },
      py::arg("l0"), py::arg("u0"), py::arg("monotone") = false, py::arg("min_norm") = py::none(),
      py::arg("standardize") = false);

  py::class_<FitStats>(m, "FitStats")
      .def_readonly("sse", &FitStats::sse)
      .def_readonly("kkt_residual", &FitStats::kkt_residual)
      .def_property_readonly("solver_status", [](const FitStats& s) {
        return std::string(to_string(s.solver_status));
      });

  py::class_<PwlModel>(m, "PwlModel")
      .def_property_readonly("n_pieces", &PwlModel::size)
      .def_property_readonly("d", &PwlModel::dim)
      .def_property_readonly("values",
                             [](const PwlModel& model) {
                               Vector v(model.size());
                               for (int i = 0; i < model.size(); ++i) v[i] = model.pieces[i].value;
                               return v;
                             })
      .def_property_readonly("betas", &subgradient_matrix)
      .def_property_readonly("anchors",
                             [](const PwlModel& model) {
                               Matrix a(model.size(), model.dim());
                               for (int i = 0; i < model.size(); ++i)
                                 a.row(i) = model.pieces[i].anchor;
                               return a;
                             })
      .def_property_readonly("intercepts", &intercepts)
      .def_readonly("fit_stats", &PwlModel::fit_stats)
      .def_readonly("config", &PwlModel::config)
      .def("__call__",
           [](const PwlModel& model, const Vector& q) { return evaluate(model, q); })
      .def("evaluate", [](const PwlModel& model, const Matrix& q) { return evaluate_all(model, q); })
      .def("subgradient_at",
           [](const PwlModel& model, const Vector& q) { return subgradient_at(model, q); })
      .def("to_json", &model_to_json)
      .def("validate", [](const PwlModel& model) { model.validate(); });

  m.def(
      "fit",
      [](const Dataset& data, const EstimatorConfig& config) { return fit(data, config); },
      py::arg("data"), py::arg("config"),
      py::call_guard<py::gil_scoped_release>());
  m.def("min_norm_subgradients",
        [](const Dataset& data, const Vector& fitted) {
          return min_norm_subgradients(data, fitted);
        });
  m.def("lcr_fit", [](const Dataset& data, double L) { return lcr_fit(data, L); });

  m.def("save_model", &save_model);
  m.def("load_model", &load_model);
  m.def("model_from_json", &model_from_json);

  m.def("kfold_split", &kfold_split, py::arg("n"), py::arg("k"), py::arg("seed") = 0);
  m.def("reference_vector_ols", &reference_vector_ols, py::arg("data"), py::arg("ridge") = 0.0);
  m.def("percentile_bounds", &percentile_bounds, py::arg("betas"), py::arg("q"));

  m.def(
      "cross_validate",
      [](const Dataset& data, const EstimatorConfig& base, const std::string& parameter,
         const std::vector<double>& grid_values, int k, std::uint64_t seed, int jobs) {
        TuneSpec spec;
        spec.base = base;
        if (parameter == "lambda") {
          spec.parameter = TunedParameter::Lambda;
        } else if (parameter == "L") {
          spec.parameter = TunedParameter::Lipschitz;
        } else if (parameter == "L0") {
          spec.parameter = TunedParameter::Radius;
        } else if (parameter == "q") {
          spec.parameter = TunedParameter::Quantile;
        } else {
          throw ConfigError("parameter must be lambda, L, L0, or q");
        }
        Grid grid{parameter, grid_values};
        const auto result = cross_validate(data, spec, grid, k, seed, jobs);
        py::dict out;
        out["best"] = result.best;
        py::list curve;
        for (const auto& [value, score] : result.curve)
          curve.append(py::make_tuple(value, score));
        out["curve"] = curve;
        out["folds"] = result.folds;
        out["seed"] = result.seed;
        return out;
      },
      py::arg("data"), py::arg("base"), py::arg("parameter"), py::arg("grid"), py::arg("k") = 5,
      py::arg("seed") = 0, py::arg("jobs") = 1);

  m.def("read_dataset_csv", &read_dataset_csv);
  m.def("write_dataset_csv", &write_dataset_csv);
  m.def("make_frontier_fixture", &make_frontier_fixture, py::arg("seed") = 20240817);
}
