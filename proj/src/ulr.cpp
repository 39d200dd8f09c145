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

#include "xsdc/ulr.hpp"

#include <cmath>

#include "xsdc/errors.hpp"

namespace xsdc {

void UlrConfig::validate() const {
  if (!(lambda > 0.0)) throw InvalidInput("UlrConfig: lambda must be positive");
  if (!(alpha >= 0.0)) throw InvalidInput("UlrConfig: alpha must be nonnegative");
  if (!(rho >= 0.0)) throw InvalidInput("UlrConfig: rho must be nonnegative");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInput("UlrConfig: learning_rate must be finite and nonnegative");
  }
}

namespace {

void check_phi_m(const Matrix& Phi, const Matrix& M) {
  if (M.rows() != Phi.rows() || M.cols() != Phi.rows()) {
    throw InvalidInput("ulr: M must be n x n for n = rows of Phi");
  }
  require_finite(M, "ulr: M");
}

}  // namespace

double forward_objective(const Matrix& Phi, const Matrix& M, double lambda) {
  check_phi_m(Phi, M);
  const Matrix A = compute_A(Phi, lambda);
  // tr(M A) = sum_ij M_ij A_ji, A symmetric
  return lambda * M.cwiseProduct(A).sum();
}

Matrix grad_phi(const Matrix& Phi, const Matrix& M, double lambda) {
  check_phi_m(Phi, M);
  const Matrix A = compute_A(Phi, lambda);
  const Matrix AP = A * Phi;
  return -lambda * (A * ((M + M.transpose()) * AP));
}

RegularizerTerms regularizer(const Matrix& V, const Matrix& Phi, double alpha, double rho) {
  if (!(alpha >= 0.0) || !(rho >= 0.0)) {
    throw InvalidInput("regularizer: alpha and rho must be nonnegative");
  }
  RegularizerTerms out;
  const Matrix centered = center_rows(Phi);
  out.value = alpha * V.squaredNorm() - rho * centered.squaredNorm();
  out.grad_phi = -2.0 * rho * centered;
  out.grad_landmarks = 2.0 * alpha * V;
  return out;
}

ReverseObjective reverse_objective(const Matrix& Phi, const Matrix& Y) {
  if (Y.rows() != Phi.rows()) throw InvalidInput("reverse_objective: row mismatch");
  const Vector sizes = Y.colwise().sum().transpose();
  for (Eigen::Index c = 0; c < sizes.size(); ++c) {
    if (!(sizes(c) > 0.0)) {
      throw InvalidInput("reverse_objective: cluster " + std::to_string(c) + " is empty");
    }
  }
  const double n = static_cast<double>(Phi.rows());
  // (I - P_Y) Phi with P_Y = Y (Y^T Y)^{-1} Y^T
  const Matrix gram = Y.transpose() * Y;
  const Matrix residual = Phi - Y * gram.ldlt().solve(Y.transpose() * Phi);
  ReverseObjective out;
  out.value = residual.cwiseProduct(Phi).sum() / n;
  out.grad = (2.0 / n) * residual;
  return out;
}

LipschitzEstimates lipschitz_bounds(double B, double n, double n_max, double lambda) {
  if (!(B > 0.0) || !(n > 0.0) || !(n_max > 0.0) || !(lambda > 0.0)) {
    throw InvalidInput("lipschitz_bounds: all inputs must be positive");
  }
  LipschitzEstimates e;
  e.B = B;
  e.n = n;
  e.n_max = n_max;
  e.lambda = lambda;
  e.L_f = 2.0 * n_max * B / (lambda * n * n);
  e.L_r = 2.0 * B / n;
  e.ell_f = 8.0 * B * B * n_max / (n * n * n * lambda * lambda) + 2.0 * n_max / (n * n * lambda);
  e.ell_r = 2.0 / n;
  e.lambda_value_crossover = n_max / n;
  e.lambda_gradient_crossover =
      n_max / (2.0 * n) + std::sqrt(n_max * n_max + 16.0 * B * B * n_max) / (2.0 * n);
  return e;
}

double total_objective(const NystromLayer& layer, const Matrix& X, const Matrix& M,
                       const UlrConfig& config, bool normalize) {
  config.validate();
  const FeatureBatch batch = forward(layer, X, normalize);
  const double fit = forward_objective(batch.phi, M, config.lambda);
  return fit + regularizer(layer.landmarks, batch.phi, config.alpha, config.rho).value;
}

UlrGradient ulr_gradient(const NystromLayer& layer, const Matrix& X, const Matrix& M,
                         const UlrConfig& config, bool normalize) {
  config.validate();
  const FeatureBatch batch = forward(layer, X, normalize);
  check_phi_m(batch.phi, M);

  const Matrix A = compute_A(batch.phi, config.lambda);
  const RegularizerTerms reg = regularizer(layer.landmarks, batch.phi, config.alpha, config.rho);

  UlrGradient out;
  out.objective = config.lambda * M.cwiseProduct(A).sum() + reg.value;
  const Matrix cotangent =
      -config.lambda * (A * ((M + M.transpose()) * (A * batch.phi))) + reg.grad_phi;
  out.grad = backward(batch, layer, X, cotangent) + reg.grad_landmarks;
  return out;
}

TrainState ulr_step(TrainState state, const Matrix& X, const Matrix& M, const UlrConfig& config,
                    bool normalize) {
  const UlrGradient g = ulr_gradient(state.layer, X, M, config, normalize);
  if (!g.grad.allFinite() || !std::isfinite(g.objective)) {
    throw Diverged("ulr_step: non-finite gradient", state.iteration);
  }
  state.last_objective = g.objective;
  state.layer.landmarks -= config.learning_rate * g.grad;
  if (!state.layer.landmarks.allFinite()) {
    throw Diverged("ulr_step: landmarks overflowed", state.iteration);
  }
  ++state.iteration;
  return state;
}

}  // namespace xsdc
