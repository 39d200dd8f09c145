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

#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "xsdc/diagnostics.hpp"
#include "xsdc/errors.hpp"
#include "xsdc/feature_map.hpp"
#include "xsdc/ulr.hpp"

using namespace xsdc;
using xsdc::testing::centering;
using xsdc::testing::randn;
using xsdc::testing::random_labels;

namespace {

Matrix relaxed_m(Eigen::Index n, int k, std::uint64_t seed) {
  const Matrix Y = one_hot(random_labels(n, k, seed), k);
  const Matrix N = randn(n, n, seed + 1).cwiseAbs() * 0.1;
  return 0.8 * Y * Y.transpose() + N + N.transpose();
}

// Explicit l_f(lambda) from the smoothness bound.
double ell_f_formula(double B, double n, double n_max, double lambda) {
  return 8 * B * B * n_max / (n * n * n * lambda * lambda) + 2 * n_max / (n * n * lambda);
}

}  // namespace

TEST_CASE("forward_objective") {
  const Eigen::Index n = 9;
  const Matrix Phi = randn(n, 3, 1);
  CHECK(forward_objective(Phi, Matrix::Zero(n, n), 0.5) == 0.0);

  const Matrix M = relaxed_m(n, 3, 2);
  CHECK(forward_objective(Matrix::Zero(n, 3), M, 0.5) ==
        doctest::Approx((M * centering(n)).trace() / n).epsilon(1e-12));

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix P = randn(n, 4, 10 + seed);
    const Matrix Y = one_hot(random_labels(n, 3, 20 + seed), 3);
    const double lambda = 0.05 * (1 + seed);
    const double ridge = ridge_solve(P, Y, lambda).objective;
    CHECK(std::abs(forward_objective(P, Y * Y.transpose(), lambda) - ridge) <= 1e-8 * ridge);
  }
  CHECK_THROWS_AS(forward_objective(Phi, Matrix::Zero(n + 1, n + 1), 0.5), InvalidInput);
}

TEST_CASE("grad_phi") {
  const Eigen::Index n = 15;
  const Matrix Phi = randn(n, 4, 3);
  CHECK(grad_phi(Phi, Matrix::Zero(n, n), 0.3).cwiseAbs().maxCoeff() == 0.0);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Matrix P = randn(n, 4, 30 + seed);
    const Matrix M = relaxed_m(n, 3, 40 + seed);
    const double lambda = 0.1 + 0.2 * seed;
    const Matrix numeric = finite_difference(
        [&](const Matrix& Q) { return forward_objective(Q, M, lambda); }, P, 1e-5);
    CHECK(max_relative_error(grad_phi(P, M, lambda), numeric) <= 1e-6);
  }
}

TEST_CASE("regularizer") {
  const Matrix V = randn(3, 4, 5);
  const Matrix Phi = randn(8, 4, 6);
  const RegularizerTerms zero = regularizer(V, Phi, 0.0, 0.0);
  CHECK(zero.value == 0.0);
  CHECK(zero.grad_phi.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.grad_landmarks.cwiseAbs().maxCoeff() == 0.0);

  Matrix constant(8, 4);
  constant.rowwise() = Phi.row(0);
  CHECK(std::abs(regularizer(V, constant, 0.0, 2.0).value) < 1e-12);

  const double alpha = 0.7, rho = 0.4;
  const RegularizerTerms r = regularizer(V, Phi, alpha, rho);
  CHECK(r.value == doctest::Approx(alpha * V.squaredNorm() -
                                   rho * (centering(8) * Phi).squaredNorm()));
  const Matrix num_phi = finite_difference(
      [&](const Matrix& P) { return regularizer(V, P, alpha, rho).value; }, Phi, 1e-5);
  const Matrix num_v = finite_difference(
      [&](const Matrix& W) { return regularizer(W, Phi, alpha, rho).value; }, V, 1e-5);
  CHECK(max_relative_error(r.grad_phi, num_phi) <= 1e-6);
  CHECK(max_relative_error(r.grad_landmarks, num_v) <= 1e-6);
}

TEST_CASE("ulr_step") {
  const Matrix X = randn(12, 3, 7);
  const Matrix M = relaxed_m(12, 3, 8);
  TrainState state;
  state.layer = init_landmarks(X, 5, 1);
  UlrConfig cfg;
  cfg.lambda = 0.1;
  cfg.alpha = 0.1;
  cfg.rho = 0.05;

  SUBCASE("zero learning rate") {
    cfg.learning_rate = 0.0;
    const TrainState next = ulr_step(state, X, M, cfg);
    CHECK(next.layer.landmarks == state.layer.landmarks);
    CHECK(next.iteration == state.iteration + 1);
  }
  SUBCASE("small step decreases the objective") {
    cfg.learning_rate = 1e-4;
    for (bool normalize : {false, true}) {
      const double before = total_objective(state.layer, X, M, cfg, normalize);
      const TrainState next = ulr_step(state, X, M, cfg, normalize);
      CHECK(total_objective(next.layer, X, M, cfg, normalize) < before);
      CHECK(next.last_objective == doctest::Approx(before));
    }
  }
  SUBCASE("assembled gradient against finite differences") {
    for (bool normalize : {false, true}) {
      const UlrGradient g = ulr_gradient(state.layer, X, M, cfg, normalize);
      const Matrix numeric = finite_difference(
          [&](const Matrix& V) {
            NystromLayer probe = state.layer;
            probe.landmarks = V;
            return total_objective(probe, X, M, cfg, normalize);
          },
          state.layer.landmarks, 1e-5);
      CHECK(max_relative_error(g.grad, numeric) <= 1e-4);
    }
  }
  SUBCASE("non-finite gradient diverges") {
    cfg.learning_rate = 1.0;
    Matrix bad = M;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS(ulr_step(state, X, bad, cfg));
  }
}

TEST_CASE("reverse_objective") {
  const std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1};
  const Matrix Y = one_hot(y, 3);
  const Matrix in_span = Y * randn(3, 2, 9);
  CHECK(std::abs(reverse_objective(in_span, Y).value) < 1e-12);

  const Matrix Phi = randn(8, 2, 10);
  const ReverseObjective r = reverse_objective(Phi, Y);
  const Matrix numeric = finite_difference(
      [&](const Matrix& P) { return reverse_objective(P, Y).value; }, Phi, 1e-5);
  CHECK(max_relative_error(r.grad, numeric) <= 1e-6);

  Matrix empty = Matrix::Zero(8, 3);
  empty.col(0).setOnes();
  CHECK_THROWS_AS(reverse_objective(Phi, empty), InvalidInput);
}

TEST_CASE("lipschitz_bounds") {
  const LipschitzEstimates e = lipschitz_bounds(1.0, 10.0, 5.0, 1.0);
  CHECK(e.L_f == doctest::Approx(0.1));
  CHECK(e.L_r == doctest::Approx(0.2));
  CHECK(e.ell_r == doctest::Approx(0.2));
  CHECK(e.ell_f == doctest::Approx(ell_f_formula(1.0, 10.0, 5.0, 1.0)));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double B = u(rng), n = 10.0 + 10 * u(rng), n_max = std::ceil(n * u(rng) / 5.0);
    const LipschitzEstimates at_value = lipschitz_bounds(B, n, n_max, n_max / n);
    CHECK(at_value.lambda_value_crossover == doctest::Approx(n_max / n));
    CHECK(std::abs(at_value.L_f - at_value.L_r) <= 1e-12 * at_value.L_r);
    CHECK(at_value.L_r == doctest::Approx(2 * B / n));

    // Independent root of ell_f(lambda) = 2/n by bisection.
    double lo = 1e-8, hi = 1e8;
    for (int it = 0; it < 400; ++it) {
      const double mid = std::sqrt(lo * hi);
      (ell_f_formula(B, n, n_max, mid) > 2 / n ? lo : hi) = mid;
    }
    const LipschitzEstimates at_grad = lipschitz_bounds(B, n, n_max, lo);
    CHECK(at_grad.lambda_gradient_crossover == doctest::Approx(lo).epsilon(1e-10));
    const LipschitzEstimates exact =
        lipschitz_bounds(B, n, n_max, at_grad.lambda_gradient_crossover);
    CHECK(std::abs(exact.ell_f - 2 / n) <= 1e-10);
    CHECK(std::abs(exact.ell_r - 2 / n) <= 1e-10);
  }
  CHECK_THROWS_AS(lipschitz_bounds(0.0, 10, 5, 1), InvalidInput);
  CHECK_THROWS_AS(lipschitz_bounds(1.0, 10, 5, -1), InvalidInput);
}

TEST_CASE("gradient bounds hold on random draws") {
  const SmoothnessReport r = run_smoothness(1.5, 12, 4, 0.2, 300, 5);
  CHECK(r.passed());
  CHECK(r.max_grad_f <= r.bounds.L_f * (1 + 1e-12));
  CHECK(r.max_ratio_r <= r.bounds.ell_r * (1 + 1e-12));
}
