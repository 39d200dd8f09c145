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

#ifndef XSDC_FEATURE_MAP_HPP_
#define XSDC_FEATURE_MAP_HPP_

#include <cstddef>
#include <cstdint>

#include "xsdc/linalg.hpp"

namespace xsdc {

// Single-layer Nystrom approximation of a Gaussian RBF kernel:
//   phi(x) = (k(V^T V) + eps I)^{-1/2} k(V^T x)
// Landmarks are the columns of `landmarks` (d x p).
struct NystromLayer {
  Matrix landmarks;
  double sigma = 1.0;
  double epsilon = 1e-3;
  int newton_iters = 20;

  Eigen::Index input_dim() const { return landmarks.rows(); }
  Eigen::Index filters() const { return landmarks.cols(); }
  void validate() const;
};

// exp(-||a_i - b_j||^2 / (2 sigma^2)) for row-points a_i of Xa and b_j of Xb.
Matrix rbf_kernel(const Matrix& Xa, const Matrix& Xb, double sigma);

// Median of the pairwise Euclidean distances among the first
// min(n, max_points) rows. Even counts take the midpoint of the middle pair.
double median_bandwidth(const Matrix& X, std::size_t max_points = 1000);

// p distinct rows of X drawn without replacement as landmarks; bandwidth from
// median_bandwidth over X.
NystromLayer init_landmarks(const Matrix& X, Eigen::Index p, std::uint64_t seed);

// Output of forward(). Holds what backward() needs; the copies of the layer
// landmarks and the input batch let backward() detect a stale cache.
struct FeatureBatch {
  Matrix phi;                     // n_b x p
  double normalization_scale = 1.0;
  bool normalized = false;

  struct Cache {
    Matrix landmarks;
    Matrix inputs;
    Matrix k_xv;                  // n_b x p
    Matrix centered;              // centered raw features (normalize only)
    InvSqrtTape inv_sqrt;
  } cache;
};

// Raw features k(X, V) (K_VV + eps I)^{-1/2}. With `normalize`, columns are
// centered and every entry scaled so the mean squared row norm is 1.
FeatureBatch forward(const NystromLayer& layer, const Matrix& X, bool normalize);

// dL/dV (d x p) given dL/dPhi, by reverse-mode differentiation through the
// kernels, the unrolled Newton-Schulz iterations, centering and the
// normalization scale.
Matrix backward(const FeatureBatch& batch, const NystromLayer& layer, const Matrix& X,
                const Matrix& dL_dPhi);

}  // namespace xsdc

#endif  // XSDC_FEATURE_MAP_HPP_
