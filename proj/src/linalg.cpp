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

#include "xsdc/linalg.hpp"

#include <cmath>
#include <string>

#include "xsdc/errors.hpp"

namespace xsdc {

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw InvalidInput(std::string(what) + " contains NaN or Inf");
  }
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

Matrix center_rows(const Matrix& X) {
  if (X.rows() == 0) throw InvalidInput("center_rows: empty matrix");
  const Eigen::RowVectorXd mean = X.colwise().mean();
  return X.rowwise() - mean;
}

Matrix RidgeSolution::scores(const Matrix& Phi) const {
  if (Phi.cols() != weights.rows()) {
    throw InvalidInput("RidgeSolution::scores: feature dimension mismatch");
  }
  Matrix s = Phi * weights;
  s.rowwise() += bias.transpose();
  return s;
}

std::vector<int> RidgeSolution::predict(const Matrix& Phi) const {
  const Matrix s = scores(Phi);
  std::vector<int> out(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < s.cols(); ++c) {
      if (s(i, c) > s(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

RidgeSolution ridge_solve(const Matrix& Phi, const Matrix& Y, double lambda) {
  if (Phi.rows() != Y.rows() || Phi.rows() == 0) {
    throw InvalidInput("ridge_solve: Phi and Y must have the same nonzero row count");
  }
  if (!(lambda > 0.0)) throw InvalidInput("ridge_solve: lambda must be positive");
  require_finite(Phi, "ridge_solve: Phi");
  require_finite(Y, "ridge_solve: Y");

  const double n = static_cast<double>(Phi.rows());
  const Eigen::RowVectorXd phi_mean = Phi.colwise().mean();
  const Eigen::RowVectorXd y_mean = Y.colwise().mean();
  const Matrix Pc = Phi.rowwise() - phi_mean;
  const Matrix Yc = Y.rowwise() - y_mean;

  Matrix gram = Pc.transpose() * Pc;
  gram.diagonal().array() += n * lambda;
  RidgeSolution sol;
  sol.weights = gram.llt().solve(Pc.transpose() * Yc);
  sol.bias = (y_mean - phi_mean * sol.weights).transpose();
  const Matrix resid = Yc - Pc * sol.weights;
  sol.objective = resid.squaredNorm() / n + lambda * sol.weights.squaredNorm();
  return sol;
}

Matrix compute_A(const Matrix& Phi, double lambda) {
  const Eigen::Index n = Phi.rows();
  if (n < 2) throw InvalidInput("compute_A: need at least 2 observations");
  if (!(lambda > 0.0)) throw InvalidInput("compute_A: lambda must be positive");
  require_finite(Phi, "compute_A: Phi");

  const Matrix Pc = center_rows(Phi);
  Matrix system = Pc * Pc.transpose();
  system.diagonal().array() += static_cast<double>(n) * lambda;

  Matrix proj = Matrix::Identity(n, n);
  proj.array() -= 1.0 / static_cast<double>(n);
  Matrix G_proj = system.llt().solve(proj);
  // Pi * (G Pi): subtract column means.
  Matrix A = center_rows(G_proj);
  return 0.5 * (A + A.transpose());
}

namespace {

void check_psd_input(const Matrix& K, double epsilon) {
  if (K.rows() != K.cols() || K.rows() == 0) {
    throw InvalidInput("newton_inv_sqrt: K must be square and nonempty");
  }
  if (!(epsilon >= 0.0)) throw InvalidInput("newton_inv_sqrt: epsilon must be >= 0");
  require_finite(K, "newton_inv_sqrt: K");
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InvalidInput("newton_inv_sqrt: K is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(K, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues()(0) < -1e-10 * scale) {
    throw InvalidInput("newton_inv_sqrt: K is not positive semidefinite");
  }
}

}  // namespace

InvSqrtTape newton_inv_sqrt_taped(const Matrix& K, double epsilon, int iters) {
  check_psd_input(K, epsilon);
  if (iters < 0) throw InvalidInput("newton_inv_sqrt: iters must be >= 0");
  const Eigen::Index p = K.rows();

  InvSqrtTape tape;
  Matrix shifted = K;
  shifted.diagonal().array() += epsilon;
  tape.trace = shifted.trace();
  if (!(tape.trace > 0.0)) {
    throw InvalidInput("newton_inv_sqrt: K + eps I has zero trace");
  }
  tape.scaled = shifted / tape.trace;

  const Matrix I = Matrix::Identity(p, p);
  tape.y.reserve(static_cast<std::size_t>(iters) + 1);
  tape.z.reserve(static_cast<std::size_t>(iters) + 1);
  tape.t.reserve(static_cast<std::size_t>(iters));
  tape.y.push_back(tape.scaled);
  tape.z.push_back(I);
  for (int k = 0; k < iters; ++k) {
    const Matrix& Y = tape.y.back();
    const Matrix& Z = tape.z.back();
    Matrix T = 0.5 * (3.0 * I - Z * Y);
    Matrix Yn = Y * T;
    Matrix Zn = T * Z;
    tape.t.push_back(std::move(T));
    tape.y.push_back(std::move(Yn));
    tape.z.push_back(std::move(Zn));
  }
  tape.result = tape.z.back() / std::sqrt(tape.trace);
  return tape;
}

Matrix newton_inv_sqrt(const Matrix& K, double epsilon, int iters) {
  return newton_inv_sqrt_taped(K, epsilon, iters).result;
}

Matrix newton_inv_sqrt_backward(const InvSqrtTape& tape, const Matrix& grad_result) {
  const std::size_t iters = tape.t.size();
  const double root = std::sqrt(tape.trace);

  // result = z_T / sqrt(c)
  Matrix gz = grad_result / root;
  double gc = -0.5 * grad_result.cwiseProduct(tape.z.back()).sum() / (root * tape.trace);
  Matrix gy = Matrix::Zero(gz.rows(), gz.cols());

  for (std::size_t k = iters; k-- > 0;) {
    const Matrix& Y = tape.y[k];
    const Matrix& Z = tape.z[k];
    const Matrix& T = tape.t[k];
    // y[k+1] = Y T, z[k+1] = T Z, T = 1.5 I - 0.5 Z Y
    const Matrix gT = Y.transpose() * gy + gz * Z.transpose();
    Matrix gy_prev = gy * T.transpose() - 0.5 * Z.transpose() * gT;
    Matrix gz_prev = T.transpose() * gz - 0.5 * gT * Y.transpose();
    gy = std::move(gy_prev);
    gz = std::move(gz_prev);
  }

  // y[0] = (K + eps I) / c with c = tr(K) + p eps; z[0] = I is constant.
  const Matrix shifted = tape.scaled * tape.trace;
  Matrix gK = gy / tape.trace;
  gc -= gy.cwiseProduct(shifted).sum() / (tape.trace * tape.trace);
  gK.diagonal().array() += gc;
  return gK;
}

double inv_sqrt_residual(const Matrix& S, const Matrix& K, double epsilon) {
  Matrix shifted = K;
  shifted.diagonal().array() += epsilon;
  const Matrix r = S * shifted * S - Matrix::Identity(K.rows(), K.cols());
  return r.norm() / std::sqrt(static_cast<double>(K.rows()));
}

Matrix one_hot(const std::vector<int>& labels, int k) {
  if (k < 1) throw InvalidInput("one_hot: k must be >= 1");
  Matrix Y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw InvalidInput("one_hot: label " + std::to_string(labels[i]) + " outside [0, k)");
    }
    Y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return Y;
}

}  // namespace xsdc
