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

#ifndef XSDC_LINALG_HPP_
#define XSDC_LINALG_HPP_

#include <Eigen/Dense>
#include <string_view>
#include <vector>

namespace xsdc {

// All numerics are 64-bit. Storage order is Eigen's default (column-major);
// every file format serializes row-major.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Throws InvalidInput naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

// Largest singular value.
double spectral_norm(const Matrix& m);

// Returns X with its column means removed, i.e. Pi_n X without forming the
// n x n centering projector.
Matrix center_rows(const Matrix& X);

// Closed-form solution of
//   min_{W,b} (1/n) ||Y - Phi W - 1 b^T||_F^2 + lambda ||W||_F^2.
struct RidgeSolution {
  Matrix weights;     // D x k
  Vector bias;        // k
  double objective = 0.0;

  // Phi W + 1 b^T, one row of class scores per observation.
  Matrix scores(const Matrix& Phi) const;
  // Row-wise argmax of scores(); ties go to the lowest class index.
  std::vector<int> predict(const Matrix& Phi) const;
};

RidgeSolution ridge_solve(const Matrix& Phi, const Matrix& Y, double lambda);

// A(Phi) = Pi (Pi Phi Phi^T Pi + n lambda I)^{-1} Pi, symmetrized.
// lambda tr[Y Y^T A(Phi)] is the ridge objective minimized over W and b.
Matrix compute_A(const Matrix& Phi, double lambda);

// Iterates of the coupled Newton-Schulz recursion, kept so the inverse square
// root can be differentiated by unrolling.
struct InvSqrtTape {
  double trace = 0.0;          // tr(K + eps I), the initial scaling
  Matrix scaled;               // (K + eps I) / trace
  std::vector<Matrix> y;       // y[0] = scaled, y[t] -> scaled^{1/2}
  std::vector<Matrix> z;       // z[0] = I,      z[t] -> scaled^{-1/2}
  std::vector<Matrix> t;       // t[k] = (3I - z[k] y[k]) / 2
  Matrix result;               // z.back() / sqrt(trace) ~ (K + eps I)^{-1/2}
};

// (K + eps I)^{-1/2} for symmetric positive semidefinite K via `iters`
// coupled Newton-Schulz steps on (K + eps I) / tr(K + eps I). Residual
// ||S (K + eps I) S - I||_F / sqrt(p) falls below 1e-6 once `iters` is large
// enough for the conditioning of K + eps I (20 suffices for eps = 1e-3 on RBF
// Gram matrices of a few dozen landmarks).
Matrix newton_inv_sqrt(const Matrix& K, double epsilon, int iters);
InvSqrtTape newton_inv_sqrt_taped(const Matrix& K, double epsilon, int iters);

// Reverse-mode pass through the unrolled iteration: given dL/dS, returns dL/dK.
Matrix newton_inv_sqrt_backward(const InvSqrtTape& tape, const Matrix& grad_result);

// ||S (K + eps I) S - I||_F / sqrt(p).
double inv_sqrt_residual(const Matrix& S, const Matrix& K, double epsilon);

// One-hot encoding of labels in [0, k).
Matrix one_hot(const std::vector<int>& labels, int k);

}  // namespace xsdc

#endif  // XSDC_LINALG_HPP_
