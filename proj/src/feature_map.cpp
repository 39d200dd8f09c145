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

#include "xsdc/feature_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "xsdc/errors.hpp"

namespace xsdc {

void NystromLayer::validate() const {
  if (landmarks.rows() < 1 || landmarks.cols() < 1) {
    throw InvalidInput("NystromLayer: need d >= 1 and p >= 1");
  }
  if (!(sigma > 0.0)) throw InvalidInput("NystromLayer: sigma must be positive");
  if (!(epsilon > 0.0)) throw InvalidInput("NystromLayer: epsilon must be positive");
  if (newton_iters < 1) throw InvalidInput("NystromLayer: newton_iters must be >= 1");
  require_finite(landmarks, "NystromLayer: landmarks");
}

Matrix rbf_kernel(const Matrix& Xa, const Matrix& Xb, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("rbf_kernel: sigma must be positive");
  if (Xa.cols() != Xb.cols()) throw InvalidInput("rbf_kernel: dimension mismatch");
  const Vector na = Xa.rowwise().squaredNorm();
  const Vector nb = Xb.rowwise().squaredNorm();
  Matrix d2 = -2.0 * Xa * Xb.transpose();
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  return (-(d2.array().max(0.0)) * inv).exp().matrix();
}

double median_bandwidth(const Matrix& X, std::size_t max_points) {
  const auto m = std::min<std::size_t>(static_cast<std::size_t>(X.rows()), max_points);
  if (m < 2) throw InvalidInput("median_bandwidth: need at least 2 rows");
  std::vector<double> dist;
  dist.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      dist.push_back((X.row(static_cast<Eigen::Index>(i)) - X.row(static_cast<Eigen::Index>(j))).norm());
    }
  }
  const std::size_t half = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(half), dist.end());
  const double upper = dist[half];
  if (dist.size() % 2 == 1) return upper;
  const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(half));
  return 0.5 * (lower + upper);
}

NystromLayer init_landmarks(const Matrix& X, Eigen::Index p, std::uint64_t seed) {
  if (p < 1) throw InvalidInput("init_landmarks: p must be >= 1");
  if (p > X.rows()) throw InvalidInput("init_landmarks: more landmarks than observations");
  require_finite(X, "init_landmarks: X");

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(X.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first p slots are a uniform sample without replacement.
  for (Eigen::Index i = 0; i < p; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, X.rows() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }

  NystromLayer layer;
  layer.landmarks.resize(X.cols(), p);
  for (Eigen::Index j = 0; j < p; ++j) {
    layer.landmarks.col(j) = X.row(idx[static_cast<std::size_t>(j)]).transpose();
  }
  layer.sigma = median_bandwidth(X);
  if (!(layer.sigma > 0.0)) {
    throw InvalidInput("init_landmarks: all observations coincide, bandwidth is zero");
  }
  return layer;
}

FeatureBatch forward(const NystromLayer& layer, const Matrix& X, bool normalize) {
  layer.validate();
  if (X.cols() != layer.input_dim()) throw InvalidInput("forward: input dimension mismatch");
  if (X.rows() < 1) throw InvalidInput("forward: empty batch");
  if (normalize && X.rows() < 2) {
    throw InvalidInput("forward: normalization needs at least 2 observations");
  }
  require_finite(X, "forward: X");

  FeatureBatch out;
  out.normalized = normalize;
  out.cache.landmarks = layer.landmarks;
  out.cache.inputs = X;

  const Matrix Vt = layer.landmarks.transpose();
  const Matrix k_vv = rbf_kernel(Vt, Vt, layer.sigma);
  out.cache.inv_sqrt = newton_inv_sqrt_taped(k_vv, layer.epsilon, layer.newton_iters);
  out.cache.k_xv = rbf_kernel(X, Vt, layer.sigma);
  Matrix raw = out.cache.k_xv * out.cache.inv_sqrt.result;
  if (!raw.allFinite()) throw Diverged("forward: non-finite features", 0);

  if (!normalize) {
    out.phi = std::move(raw);
    return out;
  }
  out.cache.centered = center_rows(raw);
  const double sq = out.cache.centered.squaredNorm();
  // Zero up to the roundoff centering leaves behind.
  const double floor = std::pow(static_cast<double>(X.rows()) * 1e-15, 2) * raw.squaredNorm();
  if (!(sq > floor) || !std::isfinite(sq)) {
    throw ScaleUndefined("forward: centered features are zero, normalization undefined");
  }
  out.normalization_scale = std::sqrt(static_cast<double>(X.rows()) / sq);
  out.phi = out.normalization_scale * out.cache.centered;
  if (!out.phi.allFinite()) throw Diverged("forward: non-finite normalized features", 0);
  return out;
}

namespace {

// Accumulates into grad_V (d x p) the gradient of sum_{ij} G_ij k(a_i, v_j)
// through the landmark argument, for K = rbf_kernel(points, V^T).
void accumulate_kernel_landmark_grad(const Matrix& points, const Matrix& landmarks,
                                     const Matrix& K, const Matrix& G, double sigma,
                                     Matrix& grad_V) {
  const Matrix W = G.cwiseProduct(K);                 // n x p
  const double inv_s2 = 1.0 / (sigma * sigma);
  // d k(a_i, v_j) / d v_j = k (a_i - v_j) / sigma^2
  grad_V += inv_s2 * (points.transpose() * W);
  grad_V -= inv_s2 * (landmarks * W.colwise().sum().asDiagonal());
}

}  // namespace

Matrix backward(const FeatureBatch& batch, const NystromLayer& layer, const Matrix& X,
                const Matrix& dL_dPhi) {
  if (batch.cache.landmarks.rows() != layer.landmarks.rows() ||
      batch.cache.landmarks.cols() != layer.landmarks.cols() ||
      batch.cache.landmarks != layer.landmarks || batch.cache.inputs.rows() != X.rows() ||
      batch.cache.inputs.cols() != X.cols() || batch.cache.inputs != X) {
    throw ContractViolation("backward: feature cache is stale (layer or inputs changed)");
  }
  if (dL_dPhi.rows() != batch.phi.rows() || dL_dPhi.cols() != batch.phi.cols()) {
    throw InvalidInput("backward: cotangent shape mismatch");
  }

  Matrix g_raw;
  if (batch.normalized) {
    // phi = s C, s = sqrt(n) / ||C||_F, C = Pi raw.
    const Matrix& C = batch.cache.centered;
    const double s = batch.normalization_scale;
    const double dot = dL_dPhi.cwiseProduct(C).sum();
    const Matrix gC = s * dL_dPhi - (s * dot / C.squaredNorm()) * C;
    g_raw = center_rows(gC);
  } else {
    g_raw = dL_dPhi;
  }

  const Matrix& S = batch.cache.inv_sqrt.result;
  const Matrix& k_xv = batch.cache.k_xv;
  const Matrix g_kxv = g_raw * S.transpose();
  const Matrix g_S = k_xv.transpose() * g_raw;
  const Matrix g_kvv = newton_inv_sqrt_backward(batch.cache.inv_sqrt, g_S);

  const Matrix& V = layer.landmarks;
  Matrix grad = Matrix::Zero(V.rows(), V.cols());
  accumulate_kernel_landmark_grad(X, V, k_xv, g_kxv, layer.sigma, grad);

  // K_VV depends on V through both arguments; symmetrizing the cotangent
  // folds the row-argument contribution into the column-argument formula.
  const Matrix Vt = V.transpose();
  const Matrix k_vv = rbf_kernel(Vt, Vt, layer.sigma);
  const Matrix g_sym = g_kvv + g_kvv.transpose();
  accumulate_kernel_landmark_grad(Vt, V, k_vv, g_sym, layer.sigma, grad);
  return grad;
}

}  // namespace xsdc
