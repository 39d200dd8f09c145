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

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "xsdc/diagnostics.hpp"
#include "xsdc/errors.hpp"
#include "xsdc/feature_map.hpp"

using namespace xsdc;
using xsdc::testing::randn;

namespace {

NystromLayer layer_for(const Matrix& X, Eigen::Index p, std::uint64_t seed) {
  NystromLayer layer = init_landmarks(X, p, seed);
  layer.newton_iters = 30;
  return layer;
}

}  // namespace

TEST_CASE("rbf_kernel") {
  const Matrix X = randn(5, 3, 1);
  const Matrix K = rbf_kernel(X, X, 0.7);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(K(i, i) == doctest::Approx(1.0));

  const double sigma = 1.3;
  Matrix a = Matrix::Zero(1, 2);
  Matrix b = Matrix::Zero(1, 2);
  b(0, 1) = sigma * std::sqrt(2.0);
  CHECK(rbf_kernel(a, b, sigma)(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

  const Matrix Xa = randn(5, 3, 2);
  const Matrix Xb = randn(4, 3, 3);
  const Matrix G = rbf_kernel(Xa, Xb, sigma);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < 3; ++c) d2 += (Xa(i, c) - Xb(j, c)) * (Xa(i, c) - Xb(j, c));
      CHECK(G(i, j) == doctest::Approx(std::exp(-d2 / (2 * sigma * sigma))).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(rbf_kernel(Xa, Xb, 0.0), InvalidInput);
}

TEST_CASE("median_bandwidth") {
  Matrix two(2, 1);
  two << 0, 3;
  CHECK(median_bandwidth(two) == doctest::Approx(3.0));
  Matrix three(3, 1);
  three << 0, 1, 3;
  CHECK(median_bandwidth(three) == doctest::Approx(2.0));

  const Matrix X = randn(50, 4, 5);
  std::vector<double> d;
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (Eigen::Index j = i + 1; j < 50; ++j) d.push_back((X.row(i) - X.row(j)).norm());
  }
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  const double med = m % 2 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
  CHECK(median_bandwidth(X) == doctest::Approx(med).epsilon(1e-14));

  // Only the first max_points rows count.
  CHECK(median_bandwidth(X, 2) == doctest::Approx((X.row(0) - X.row(1)).norm()));
  CHECK_THROWS_AS(median_bandwidth(Matrix::Zero(1, 3)), InvalidInput);
}

TEST_CASE("init_landmarks") {
  const Matrix X = randn(100, 3, 6);
  const NystromLayer a = init_landmarks(X, 32, 42);
  const NystromLayer b = init_landmarks(X, 32, 42);
  CHECK(a.landmarks == b.landmarks);
  CHECK(a.sigma == b.sigma);
  CHECK(a.sigma == doctest::Approx(median_bandwidth(X)));
  std::set<Eigen::Index> used;
  for (Eigen::Index j = 0; j < 32; ++j) {
    Eigen::Index found = -1;
    for (Eigen::Index i = 0; i < 100; ++i) {
      if ((X.row(i).transpose() - a.landmarks.col(j)).norm() == 0.0) found = i;
    }
    CHECK(found >= 0);
    used.insert(found);
  }
  CHECK(used.size() == 32);

  const Matrix S = randn(6, 2, 7);
  const NystromLayer full = init_landmarks(S, 6, 1);
  std::vector<int> hit(6, 0);
  for (Eigen::Index j = 0; j < 6; ++j) {
    for (Eigen::Index i = 0; i < 6; ++i) {
      if ((S.row(i).transpose() - full.landmarks.col(j)).norm() == 0.0) ++hit[i];
    }
  }
  for (int h : hit) CHECK(h == 1);
  CHECK_THROWS_AS(init_landmarks(S, 7, 1), InvalidInput);
}

TEST_CASE("forward") {
  const Matrix X = randn(20, 3, 8);
  const NystromLayer layer = layer_for(X, 6, 3);

  SUBCASE("Gram matrix approximates the Nystrom kernel") {
    const FeatureBatch fb = forward(layer, X, false);
    const Matrix kxv = rbf_kernel(X, layer.landmarks.transpose(), layer.sigma);
    const Matrix kvv = rbf_kernel(layer.landmarks.transpose(), layer.landmarks.transpose(),
                                  layer.sigma);
    const Matrix reg = kvv + layer.epsilon * Matrix::Identity(6, 6);
    const Matrix expect = kxv * reg.ldlt().solve(kxv.transpose());
    CHECK((fb.phi * fb.phi.transpose() - expect).norm() <= 1e-6);
  }
  SUBCASE("duplicate rows give identical features") {
    Matrix D = X;
    D.row(5) = D.row(2);
    const FeatureBatch fb = forward(layer, D, true);
    CHECK((fb.phi.row(5) - fb.phi.row(2)).norm() == 0.0);
  }
  SUBCASE("normalized features have unit mean squared row norm") {
    const FeatureBatch fb = forward(layer, X, true);
    CHECK(fb.normalized);
    CHECK(fb.phi.rowwise().squaredNorm().mean() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fb.phi.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("degenerate normalization") {
    CHECK_THROWS_AS(forward(layer, X.topRows(1), true), InvalidInput);
    Matrix same(3, 3);
    same.rowwise() = X.row(0);
    CHECK_THROWS_AS(forward(layer, same, true), ScaleUndefined);
    CHECK_THROWS_AS(forward(layer, randn(4, 2, 1), false), InvalidInput);
  }
}

TEST_CASE("backward") {
  SUBCASE("zero cotangent") {
    const Matrix X = randn(8, 3, 9);
    const NystromLayer layer = layer_for(X, 4, 1);
    const FeatureBatch fb = forward(layer, X, true);
    CHECK(backward(fb, layer, X, Matrix::Zero(8, 4)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("sum of features against finite differences") {
    const Matrix X = randn(5, 3, 10);
    NystromLayer layer = layer_for(X, 2, 2);
    for (bool normalize : {false, true}) {
      const FeatureBatch fb = forward(layer, X, normalize);
      const Matrix analytic = backward(fb, layer, X, Matrix::Ones(5, 2));
      const Matrix numeric = finite_difference(
          [&](const Matrix& V) {
            NystromLayer probe = layer;
            probe.landmarks = V;
            return forward(probe, X, normalize).phi.sum();
          },
          layer.landmarks, 1e-5);
      CHECK(max_relative_error(analytic, numeric) <= 1e-4);
    }
  }
  SUBCASE("random cotangent, several instances") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Matrix X = randn(10, 4, 100 + seed);
      const NystromLayer layer = layer_for(X, 5, seed);
      const Matrix G = randn(10, 5, 200 + seed);
      const FeatureBatch fb = forward(layer, X, true);
      const Matrix numeric = finite_difference(
          [&](const Matrix& V) {
            NystromLayer probe = layer;
            probe.landmarks = V;
            return forward(probe, X, true).phi.cwiseProduct(G).sum();
          },
          layer.landmarks, 1e-5);
      CHECK(max_relative_error(backward(fb, layer, X, G), numeric) <= 1e-4);
    }
  }
  SUBCASE("far landmark has negligible gradient") {
    const Matrix X = randn(6, 2, 11);
    NystromLayer layer = layer_for(X, 3, 4);
    layer.landmarks.col(2) = Vector::Constant(2, 60.0 * layer.sigma);
    const FeatureBatch fb = forward(layer, X, false);
    const Matrix g = backward(fb, layer, X, Matrix::Ones(6, 3));
    CHECK(g.col(2).norm() < 1e-6);
    const Matrix numeric = finite_difference(
        [&](const Matrix& V) {
          NystromLayer probe = layer;
          probe.landmarks = V;
          return forward(probe, X, false).phi.sum();
        },
        layer.landmarks, 1e-5);
    CHECK(numeric.col(2).norm() < 1e-6);
  }
  SUBCASE("stale cache") {
    const Matrix X = randn(6, 2, 12);
    NystromLayer layer = layer_for(X, 3, 5);
    const FeatureBatch fb = forward(layer, X, false);
    Matrix moved = X;
    moved(0, 0) += 1.0;
    CHECK_THROWS_AS(backward(fb, layer, moved, Matrix::Ones(6, 3)), ContractViolation);
    layer.landmarks(0, 0) += 1.0;
    CHECK_THROWS_AS(backward(fb, layer, X, Matrix::Ones(6, 3)), ContractViolation);
  }
}
