// Copyright 2026 The XSDC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "xsdc/balancing.hpp"
#include "xsdc/data_io.hpp"
#include "xsdc/diagnostics.hpp"
#include "xsdc/errors.hpp"
#include "xsdc/feature_map.hpp"
#include "xsdc/labeling.hpp"
#include "xsdc/linalg.hpp"
#include "xsdc/trainer.hpp"
#include "xsdc/ulr.hpp"

namespace py = pybind11;
using xsdc::Matrix;

namespace {

std::vector<xsdc::KnownEntry> to_known(const std::vector<std::tuple<std::size_t, std::size_t, double>>& t) {
  std::vector<xsdc::KnownEntry> out;
  out.reserve(t.size());
  for (const auto& [i, j, v] : t) out.push_back({i, j, v});
  return out;
}

py::dict eval_to_dict(const xsdc::EvalRecord& e) {
  py::dict d;
  d["iteration"] = e.iteration;
  d["train_accuracy"] = e.train_accuracy;
  d["val_accuracy"] = e.val_accuracy;
  d["test_accuracy"] = e.test_accuracy;
  d["objective"] = e.objective;
  d["marginal_violation"] = e.marginal_violation;
  d["mu"] = e.mu;
  return d;
}

}  // namespace

PYBIND11_MODULE(_xsdc, m) {
  m.doc() = "Semi-supervised clustering with a trainable Nystrom feature map";

  auto base = py::register_exception<xsdc::Error>(m, "Error");
  py::register_exception<xsdc::InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<xsdc::ContractViolation>(m, "ContractViolation", base.ptr());
  py::register_exception<xsdc::ScaleUndefined>(m, "ScaleUndefined", base.ptr());
  py::register_exception<xsdc::Refused>(m, "Refused", base.ptr());
  py::register_exception<xsdc::ParseError>(m, "ParseError", base.ptr());
  py::register_exception<xsdc::Diverged>(m, "Diverged", base.ptr());

  // Core linear algebra.
  m.def("center_rows", &xsdc::center_rows, py::arg("X"));
  m.def("compute_A", &xsdc::compute_A, py::arg("Phi"), py::arg("lam"));
  m.def("newton_inv_sqrt", &xsdc::newton_inv_sqrt, py::arg("K"), py::arg("epsilon"),
        py::arg("iters") = 20);
  m.def("one_hot", &xsdc::one_hot, py::arg("labels"), py::arg("k"));

  py::class_<xsdc::RidgeSolution>(m, "RidgeSolution")
      .def_readonly("weights", &xsdc::RidgeSolution::weights)
      .def_readonly("bias", &xsdc::RidgeSolution::bias)
      .def_readonly("objective", &xsdc::RidgeSolution::objective)
      .def("scores", &xsdc::RidgeSolution::scores)
      .def("predict", &xsdc::RidgeSolution::predict);
  m.def("ridge_solve", &xsdc::ridge_solve, py::arg("Phi"), py::arg("Y"), py::arg("lam"));

  // Feature map.
  py::class_<xsdc::NystromLayer>(m, "NystromLayer")
      .def(py::init<>())
      .def_readwrite("landmarks", &xsdc::NystromLayer::landmarks)
      .def_readwrite("sigma", &xsdc::NystromLayer::sigma)
      .def_readwrite("epsilon", &xsdc::NystromLayer::epsilon)
      .def_readwrite("newton_iters", &xsdc::NystromLayer::newton_iters);
  m.def("rbf_kernel", &xsdc::rbf_kernel, py::arg("Xa"), py::arg("Xb"), py::arg("sigma"));
  m.def("median_bandwidth", &xsdc::median_bandwidth, py::arg("X"), py::arg("max_points") = 1000);
  m.def("init_landmarks", &xsdc::init_landmarks, py::arg("X"), py::arg("p"), py::arg("seed"));
  m.def(
      "features",
      [](const xsdc::NystromLayer& layer, const Matrix& X, bool normalize) {
        return xsdc::forward(layer, X, normalize).phi;
      },
      py::arg("layer"), py::arg("X"), py::arg("normalize") = true);

  // Objectives.
  m.def("forward_objective", &xsdc::forward_objective, py::arg("Phi"), py::arg("M"),
        py::arg("lam"));
  m.def("grad_phi", &xsdc::grad_phi, py::arg("Phi"), py::arg("M"), py::arg("lam"));
  m.def(
      "lipschitz_bounds",
      [](double B, double n, double n_max, double lambda) {
        const auto e = xsdc::lipschitz_bounds(B, n, n_max, lambda);
        py::dict d;
        d["L_f"] = e.L_f;
        d["L_r"] = e.L_r;
        d["ell_f"] = e.ell_f;
        d["ell_r"] = e.ell_r;
        d["lambda_value_crossover"] = e.lambda_value_crossover;
        d["lambda_gradient_crossover"] = e.lambda_gradient_crossover;
        return d;
      },
      py::arg("B"), py::arg("n"), py::arg("n_max"), py::arg("lam"));

  // Balancing.
  py::class_<xsdc::EquivalenceMatrix>(m, "EquivalenceMatrix")
      .def_readonly("M", &xsdc::EquivalenceMatrix::M)
      .def_readonly("u", &xsdc::EquivalenceMatrix::u)
      .def_readonly("v", &xsdc::EquivalenceMatrix::v)
      .def_readonly("converged", &xsdc::EquivalenceMatrix::converged)
      .def_readonly("marginal_violation", &xsdc::EquivalenceMatrix::marginal_violation)
      .def_readonly("known_violation", &xsdc::EquivalenceMatrix::known_violation)
      .def_readonly("rounds", &xsdc::EquivalenceMatrix::rounds)
      .def_readonly("dual_trajectory", &xsdc::EquivalenceMatrix::dual_trajectory);
  m.def(
      "balance",
      [](const Matrix& A, const std::vector<std::tuple<std::size_t, std::size_t, double>>& known,
         double n_min, double n_max, double mu, int iters, std::optional<int> k) {
        xsdc::BalancingProblem p;
        p.A = A;
        p.known = xsdc::close_known_set(to_known(known), static_cast<std::size_t>(A.rows()));
        p.n_min = n_min;
        p.n_max = n_max;
        p.mu = mu;
        p.iters = iters;
        p.k = k;
        return xsdc::balance(p);
      },
      py::arg("A"), py::arg("known"), py::arg("n_min"), py::arg("n_max"), py::arg("mu"),
      py::arg("iters") = 10, py::arg("k") = py::none(),
      "Balance A; the diagonal and transposed pairs are added to `known`.");
  m.def(
      "default_mu", [](const Matrix& A) { return xsdc::default_mu(A).mu; }, py::arg("A"));

  // Labeling.
  m.def(
      "spectral_cluster",
      [](const Matrix& M, int k, std::uint64_t seed) {
        return xsdc::spectral_cluster(M, k, seed).labels;
      },
      py::arg("M"), py::arg("k"), py::arg("seed") = 0);
  m.def(
      "hungarian_match",
      [](const std::vector<int>& pred, const std::vector<int>& truth, int k) {
        const auto r = xsdc::hungarian_match(pred, truth, k);
        return py::make_tuple(r.permutation, r.accuracy);
      },
      py::arg("pred"), py::arg("truth"), py::arg("k"));

  // Data and training.
  py::enum_<xsdc::Split>(m, "Split")
      .value("train", xsdc::Split::kTrain)
      .value("val", xsdc::Split::kVal)
      .value("test", xsdc::Split::kTest);
  py::class_<xsdc::Dataset>(m, "Dataset")
      .def_readonly("X", &xsdc::Dataset::X)
      .def_readonly("labels", &xsdc::Dataset::labels)
      .def_readonly("truth", &xsdc::Dataset::truth)
      .def_readonly("k", &xsdc::Dataset::k)
      .def_readonly("split", &xsdc::Dataset::split)
      .def("__len__", &xsdc::Dataset::size);
  m.def("make_blobs", &xsdc::make_blobs, py::arg("n"), py::arg("d"), py::arg("k"),
        py::arg("separation"), py::arg("label_fraction"), py::arg("seed"));
  m.def("standardize", &xsdc::standardize, py::arg("dataset"));
  m.def("keep_train_labels", &xsdc::keep_train_labels, py::arg("dataset"), py::arg("count"),
        py::arg("seed"));
  m.def("parse_csv", [](const std::string& text, std::optional<std::size_t> label_column,
                        bool header) {
    xsdc::CsvOptions o;
    o.label_column = label_column;
    o.header = header;
    return xsdc::parse_csv(text, o);
  }, py::arg("text"), py::arg("label_column") = py::none(), py::arg("header") = false);

  m.def("default_config", [] { return xsdc::config_to_json(xsdc::TrainConfig{}); });
  m.def(
      "train",
      [](const xsdc::Dataset& ds, const std::string& config_json) {
        const xsdc::TrainConfig cfg = xsdc::config_from_json(config_json);
        xsdc::RunResult r;
        {
          py::gil_scoped_release release;
          r = xsdc::train(ds, cfg);
        }
        py::dict out;
        py::list evals;
        for (const auto& e : r.metrics.evals) evals.append(eval_to_dict(e));
        out["evals"] = evals;
        if (r.metrics.init_eval) out["init_eval"] = eval_to_dict(*r.metrics.init_eval);
        out["best_val_accuracy"] = r.metrics.best_val_accuracy;
        out["best_iteration"] = r.metrics.best_iteration;
        out["test_at_best_val"] = r.metrics.test_at_best_val;
        out["labels"] = r.final_labels.labels;
        out["landmarks"] = r.state.layer.landmarks;
        out["checkpoint"] = xsdc::checkpoint_json(r.state, cfg);
        return out;
      },
      py::arg("dataset"), py::arg("config_json"),
      "Train and return metrics, final labels and the checkpoint JSON.");

  m.def(
      "gradcheck",
      [](std::uint64_t seed, bool inject_fault) {
        py::list out;
        for (const auto& r : xsdc::run_gradcheck(seed, {}, inject_fault)) {
          py::dict d;
          d["suite"] = r.suite;
          d["max_rel_error"] = r.max_rel_error;
          d["tolerance"] = r.tolerance;
          d["passed"] = r.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 0, py::arg("inject_fault") = false);
}
