#include "wda/baselines.hpp"
#include "wda/datasets.hpp"
#include "wda/errors.hpp"
#include "wda/evaluation.hpp"
#include "wda/objective.hpp"
#include "wda/ot_core.hpp"
#include "wda/stiefel.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;

namespace {

using Matrix = Eigen::MatrixXd;

wda::LabeledDataset make_dataset(const Matrix& samples, const std::vector<int>& labels) {
  wda::LabeledDataset data{samples, labels, {}};
  if (static_cast<Eigen::Index>(labels.size()) != samples.rows()) {
    throw wda::InvalidInputError("labels must have one entry per sample row");
  }
  data.validate();
  return data;
}

py::tuple as_tuple(const wda::LabeledDataset& data) {
  return py::make_tuple(data.samples, data.labels);
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

wda::PairLambdas lambdas_for(const Matrix& P, const std::vector<Matrix>& classes, double lambda,
                             bool adaptive) {
  if (!adaptive) return wda::PairLambdas::constant(static_cast<int>(classes.size()), lambda);
  Matrix pooled(P.cols(), 0);
  for (const auto& X : classes) {
    Matrix grown(P.cols(), pooled.cols() + X.cols());
    grown << pooled, X;
    pooled = std::move(grown);
  }
  return wda::adaptive_lambdas(wda::pca_init(pooled, static_cast<int>(P.rows())).matrix(), classes,
                               lambda);
}

}  // namespace

PYBIND11_MODULE(_wda, m) {
  m.doc() = "Wasserstein discriminant analysis. Samples are rows; a projection P is p x d.";

  // Later registrations are tried first, so the base class goes first.
  auto& base = py::register_exception<wda::Error>(m, "WdaError");
  py::register_exception<wda::InvalidInputError>(m, "InvalidInputError", base.ptr());
  py::register_exception<wda::DegenerateInputError>(m, "DegenerateInputError", base.ptr());
  py::register_exception<wda::NumericalRangeError>(m, "NumericalRangeError", base.ptr());

  py::class_<wda::WdaConfig>(m, "WdaConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &wda::WdaConfig::lambda)
      .def_readwrite("sinkhorn_iters", &wda::WdaConfig::sinkhorn_iters)
      .def_readwrite("dim", &wda::WdaConfig::dim)
      .def_readwrite("max_outer_iter", &wda::WdaConfig::max_outer_iter)
      .def_readwrite("outer_tol", &wda::WdaConfig::outer_tol)
      .def_readwrite("initial_step", &wda::WdaConfig::initial_step)
      .def_readwrite("step_shrink", &wda::WdaConfig::step_shrink)
      .def_readwrite("sufficient_increase", &wda::WdaConfig::sufficient_increase)
      .def_readwrite("max_backtracks", &wda::WdaConfig::max_backtracks)
      .def_readwrite("sinkhorn_tol", &wda::WdaConfig::sinkhorn_tol)
      .def_readwrite("class_weighting", &wda::WdaConfig::class_weighting)
      .def_readwrite("seed", &wda::WdaConfig::seed)
      .def("validate", [](const wda::WdaConfig& c) { c.validate(); })
      .def("to_dict", [](const wda::WdaConfig& c) { return json_to_py(c.to_json()); });

  m.def("cost_matrix",
        [](const Matrix& X, std::optional<Matrix> Z) {
          // rows are samples here; the core expects columns
          const Matrix Xt = X.transpose();
          return Z ? wda::cost_matrix(Xt, Matrix(Z->transpose())).entries : wda::cost_matrix(Xt).entries;
        },
        py::arg("X"), py::arg("Z") = py::none(),
        "Pairwise squared Euclidean distances between the rows of X and Z.");

  m.def("sinkhorn_plan",
        [](const Matrix& M, double lambda, int iterations, double tol) {
          const auto r = wda::sinkhorn_plan(wda::CostMatrix{M}, lambda, iterations, tol);
          py::dict out;
          out["plan"] = r.plan.weights;
          out["residual"] = r.trace.residual;
          out["converged_at"] = r.trace.converged_at;
          out["u"] = Matrix(r.trace.u.col(r.trace.iterations));
          out["v"] = Matrix(r.trace.v.col(r.trace.iterations));
          return out;
        },
        py::arg("M"), py::arg("lam"), py::arg("iterations") = 10, py::arg("tol") = 1e-9,
        "Entropic plan with uniform marginals after a fixed number of Sinkhorn iterations.");

  m.def("regularized_distance",
        [](const Matrix& T, const Matrix& M) {
          return wda::regularized_distance(wda::TransportPlan{T}, wda::CostMatrix{M});
        },
        py::arg("T"), py::arg("M"));

  m.def("project_stiefel", [](const Matrix& A) { return wda::project_stiefel(A).matrix(); },
        py::arg("A"));

  m.def("pca_init",
        [](const Matrix& X, int p) { return wda::pca_init(Matrix(X.transpose()), p).matrix(); },
        py::arg("X"), py::arg("p"));

  m.def("fda_fit",
        [](const Matrix& X, const std::vector<int>& y, int p) {
          const auto model = wda::fda_fit(make_dataset(X, y), p);
          return py::make_tuple(model.projection.matrix(), model.eigenvalues);
        },
        py::arg("X"), py::arg("y"), py::arg("p"),
        "Returns (P, eigenvalues) of the scatter-ratio baseline.");

  m.def("wda_fit",
        [](const Matrix& X, const std::vector<int>& y, const wda::WdaConfig& cfg) {
          const auto fit = wda::wda_fit(make_dataset(X, y), cfg);
          return py::make_tuple(fit.projection.matrix(), json_to_py(fit.report.to_json()));
        },
        py::arg("X"), py::arg("y"), py::arg("config") = wda::WdaConfig{},
        "Returns (P, report).");

  m.def("objective",
        [](const Matrix& P, const Matrix& X, const std::vector<int>& y, double lambda,
           int sinkhorn_iters, bool adaptive) {
          const auto classes = make_dataset(X, y).class_blocks();
          wda::WdaConfig cfg;
          cfg.lambda = lambda;
          cfg.sinkhorn_iters = sinkhorn_iters;
          return wda::evaluate(P, classes, lambdas_for(P, classes, lambda, adaptive), cfg).value;
        },
        py::arg("P"), py::arg("X"), py::arg("y"), py::arg("lam") = 0.01,
        py::arg("sinkhorn_iters") = 10, py::arg("adaptive") = true);

  m.def("gradient",
        [](const Matrix& P, const Matrix& X, const std::vector<int>& y, double lambda,
           int sinkhorn_iters, bool adaptive) {
          const auto classes = make_dataset(X, y).class_blocks();
          wda::WdaConfig cfg;
          cfg.lambda = lambda;
          cfg.sinkhorn_iters = sinkhorn_iters;
          const auto g = wda::gradient(P, classes, lambdas_for(P, classes, lambda, adaptive), cfg);
          return py::make_tuple(g.state.value, g.gradient);
        },
        py::arg("P"), py::arg("X"), py::arg("y"), py::arg("lam") = 0.01,
        py::arg("sinkhorn_iters") = 10, py::arg("adaptive") = true,
        "Returns (J, dJ/dP) through the unrolled Sinkhorn iterations.");

  m.def("knn_predict",
        [](const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x, int k) {
          return wda::knn_predict(train_x, train_y, test_x, k);
        },
        py::arg("train_x"), py::arg("train_y"),
        py::arg("test_x"), py::arg("k") = 5);

  m.def("error_rate",
        [](const std::vector<int>& predicted, const std::vector<int>& truth) {
          return wda::error_rate(predicted, truth);
        },
        py::arg("predicted"), py::arg("truth"));

  m.def("gen_toy",
        [](std::vector<int> sizes, std::uint64_t seed, double radius, double mode_sigma,
           double noise_sigma, int noise_dims) {
          wda::ToyParams params{radius, mode_sigma, noise_sigma, noise_dims};
          return as_tuple(wda::gen_toy(sizes, seed, params));
        },
        py::arg("class_sizes") = std::vector<int>{50, 50, 50}, py::arg("seed") = 0,
        py::arg("radius") = 3.0, py::arg("mode_sigma") = 0.5, py::arg("noise_sigma") = 1.0,
        py::arg("noise_dims") = 8, "Returns (X, y).");

  m.def("append_noise",
        [](const Matrix& X, const std::vector<int>& y, int dims, std::uint64_t seed) {
          return as_tuple(wda::append_noise(make_dataset(X, y), dims, seed));
        },
        py::arg("X"), py::arg("y"), py::arg("dims"), py::arg("seed") = 0);

  m.def("split",
        [](const Matrix& X, const std::vector<int>& y, double fraction, std::uint64_t seed) {
          const auto [train, test] = wda::split(make_dataset(X, y), fraction, seed);
          return py::make_tuple(as_tuple(train), as_tuple(test));
        },
        py::arg("X"), py::arg("y"), py::arg("train_fraction") = 0.5, py::arg("seed") = 0,
        "Stratified split; returns ((X_train, y_train), (X_test, y_test)).");
}
