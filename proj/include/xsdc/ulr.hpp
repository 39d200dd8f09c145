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

#ifndef XSDC_ULR_HPP_
#define XSDC_ULR_HPP_

#include "xsdc/feature_map.hpp"
#include "xsdc/linalg.hpp"
#include "xsdc/train_state.hpp"

namespace xsdc {

// Ultimate layer reversal: the classifier (W, b) is eliminated in closed form
// so the training objective depends on the landmarks only,
//   F(V) = lambda tr[M A(Phi(V))] + alpha ||V||_F^2 - rho ||Pi Phi(V)||_F^2.
struct UlrConfig {
  double lambda = 1e-3;
  double alpha = 0.0;
  double rho = 0.0;
  double learning_rate = 1e-2;

  void validate() const;
};

// lambda tr[M A(Phi)].
double forward_objective(const Matrix& Phi, const Matrix& M, double lambda);

// Gradient of forward_objective w.r.t. Phi: -lambda A (M + M^T) A Phi.
Matrix grad_phi(const Matrix& Phi, const Matrix& M, double lambda);

struct RegularizerTerms {
  double value = 0.0;
  Matrix grad_phi;        // -2 rho Pi Phi
  Matrix grad_landmarks;  // 2 alpha V
};

RegularizerTerms regularizer(const Matrix& V, const Matrix& Phi, double alpha, double rho);

struct ReverseObjective {
  double value = 0.0;
  Matrix grad;
};

// k-means style reverse prediction (1/n) tr[(I - P_Y) Phi Phi^T] and its
// gradient (2/n)(I - P_Y) Phi. Y is a one-hot assignment with no empty column.
ReverseObjective reverse_objective(const Matrix& Phi, const Matrix& Y);

struct LipschitzEstimates {
  double B = 0.0;
  double n = 0.0;
  double n_max = 0.0;
  double lambda = 0.0;
  double L_f = 0.0;
  double L_r = 0.0;
  double ell_f = 0.0;
  double ell_r = 0.0;
  // L_f <= L_r for lambda >= lambda_value_crossover,
  // ell_f <= ell_r for lambda >= lambda_gradient_crossover.
  double lambda_value_crossover = 0.0;
  double lambda_gradient_crossover = 0.0;
};

LipschitzEstimates lipschitz_bounds(double B, double n, double n_max, double lambda);

// Total objective F(V) evaluated on batch X.
double total_objective(const NystromLayer& layer, const Matrix& X, const Matrix& M,
                       const UlrConfig& config, bool normalize);

struct UlrGradient {
  double objective = 0.0;
  Matrix grad;  // d x p
};

// F(V) and dF/dV: grad_phi plus the regularizer's Phi-cotangent pulled back
// through the feature map, plus 2 alpha V.
UlrGradient ulr_gradient(const NystromLayer& layer, const Matrix& X, const Matrix& M,
                         const UlrConfig& config, bool normalize);

// One fixed-rate gradient step V <- V - lr dF/dV. Increments the iteration
// counter. Throws Diverged (carrying the iteration) on a non-finite gradient.
TrainState ulr_step(TrainState state, const Matrix& X, const Matrix& M,
                    const UlrConfig& config, bool normalize = true);

}  // namespace xsdc

#endif  // XSDC_ULR_HPP_
