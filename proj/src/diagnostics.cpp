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

#include "xsdc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "xsdc/errors.hpp"
#include "xsdc/feature_map.hpp"

namespace xsdc {

Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x,
                         double step) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double orig = probe(i, j);
      probe(i, j) = orig + step;
      const double up = f(probe);
      probe(i, j) = orig - step;
      const double down = f(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2.0 * step);
    }
  }
  return g;
}

double max_relative_error(const Matrix& analytic, const Matrix& numeric, Eigen::Index* worst_row,
                          Eigen::Index* worst_col, double floor) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw InvalidInput("max_relative_error: shape mismatch");
  }
  double worst = 0.0;
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
    for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
      const double a = analytic(i, j);
      const double f = numeric(i, j);
      double rel = 0.0;
      if (std::abs(f) > floor) {
        rel = std::abs(a - f) / std::max(std::abs(a), std::abs(f));
      } else if (std::abs(a) > 2.0 * floor) {
        rel = 1.0;  // analytic clearly nonzero where the difference quotient vanishes
      }
      if (rel > worst) {
        worst = rel;
        r = i;
        c = j;
      }
    }
  }
  if (worst_row) *worst_row = r;
  if (worst_col) *worst_col = c;
  return worst;
}

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  }
  return m;
}

std::vector<int> random_labels(Eigen::Index n, int k, std::mt19937_64& rng) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % k);
  std::shuffle(y.begin(), y.end(), rng);
  return y;
}

GradCheckResult compare(std::string suite, const Matrix& analytic, const Matrix& numeric,
                        double tol) {
  GradCheckResult r;
  r.suite = std::move(suite);
  r.tolerance = tol;
  r.max_rel_error = max_relative_error(analytic, numeric, &r.worst_row, &r.worst_col);
  r.passed = r.max_rel_error <= tol;
  return r;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed, const GradCheckSizes& s,
                                           bool inject_fault) {
  if (s.n < 3 || s.d < 1 || s.p < 1 || s.k < 1) throw InvalidInput("gradcheck: sizes too small");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double sign = inject_fault ? -1.0 : 1.0;
  const double lambda = 0.05 + unif(rng);
  const double alpha = 0.1 + unif(rng);
  const double rho = 0.1 + unif(rng);
  std::vector<GradCheckResult> out;

  // Phi-level: a relaxed equivalence matrix M (symmetric, entries in [0, 1]).
  const Matrix Phi = gaussian(s.n, s.p, rng);
  const Matrix Y = one_hot(random_labels(s.n, s.k, rng), s.k);
  Matrix M = 0.7 * Y * Y.transpose();
  {
    Matrix noise = gaussian(s.n, s.n, rng).cwiseAbs() * 0.15;
    M += 0.5 * (noise + noise.transpose());
  }
  out.push_back(compare(
      "grad_phi", sign * grad_phi(Phi, M, lambda),
      finite_difference([&](const Matrix& P) { return forward_objective(P, M, lambda); }, Phi, 1e-5),
      1e-6));

  const Matrix V = gaussian(s.d, s.p, rng);
  const RegularizerTerms reg = regularizer(V, Phi, alpha, rho);
  out.push_back(compare(
      "regularizer_phi", sign * reg.grad_phi,
      finite_difference([&](const Matrix& P) { return regularizer(V, P, alpha, rho).value; }, Phi,
                        1e-5),
      1e-6));
  out.push_back(compare(
      "regularizer_v", sign * reg.grad_landmarks,
      finite_difference([&](const Matrix& W) { return regularizer(W, Phi, alpha, rho).value; }, V,
                        1e-5),
      1e-6));

  // V-level: a batch X and a layer whose bandwidth matches the data scale.
  const Matrix X = gaussian(s.n, s.d, rng);
  NystromLayer layer;
  layer.landmarks = gaussian(s.d, s.p, rng);
  layer.sigma = median_bandwidth(X);
  const Matrix G = gaussian(s.n, s.p, rng);
  for (bool normalize : {false, true}) {
    const FeatureBatch fb = forward(layer, X, normalize);
    const Matrix analytic = backward(fb, layer, X, G);
    const Matrix numeric = finite_difference(
        [&](const Matrix& W) {
          NystromLayer probe = layer;
          probe.landmarks = W;
          return forward(probe, X, normalize).phi.cwiseProduct(G).sum();
        },
        layer.landmarks, 1e-5);
    out.push_back(compare(normalize ? "feature_backward_normalized" : "feature_backward_raw",
                          sign * analytic, numeric, 1e-4));
  }

  UlrConfig cfg;
  cfg.lambda = lambda;
  cfg.alpha = alpha;
  cfg.rho = rho;
  for (bool normalize : {false, true}) {
    const UlrGradient g = ulr_gradient(layer, X, M, cfg, normalize);
    const Matrix numeric = finite_difference(
        [&](const Matrix& W) {
          NystromLayer probe = layer;
          probe.landmarks = W;
          return total_objective(probe, X, M, cfg, normalize);
        },
        layer.landmarks, 1e-5);
    out.push_back(compare(normalize ? "ulr_gradient_normalized" : "ulr_gradient_raw",
                          sign * g.grad, numeric, 1e-4));
  }
  return out;
}

bool SmoothnessReport::passed() const {
  // The reverse gradient is linear in Phi, so its ratio can attain ell_r up
  // to roundoff.
  const double slack = 1.0 + 1e-12;
  return max_grad_f <= bounds.L_f * slack && max_grad_r <= bounds.L_r * slack &&
         max_ratio_f <= bounds.ell_f * slack && max_ratio_r <= bounds.ell_r * slack;
}

SmoothnessReport run_smoothness(double B, int n, int n_max, double lambda, int samples,
                                std::uint64_t seed) {
  if (!(B > 0.0) || n < 2 || n_max < 1 || n_max > n || !(lambda > 0.0) || samples < 1) {
    throw InvalidInput("smoothness: need B > 0, n >= 2, 1 <= n_max <= n, lambda > 0, samples >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  const Eigen::Index D = 4;
  const int k = std::max(2, (n + n_max - 1) / n_max);

  auto draw_phi = [&] {
    Matrix P = gaussian(n, D, rng);
    return Matrix(P * (B * unif(rng) / spectral_norm(P)));
  };
  auto draw_y = [&] {
    // Random assignment with capacity n_max per cluster, empty clusters dropped.
    std::vector<int> cap(static_cast<std::size_t>(k), n_max);
    std::vector<int> y(static_cast<std::size_t>(n));
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (int i = 0; i < n; ++i) {
      int c = pick(rng);
      while (cap[static_cast<std::size_t>(c)] == 0) c = (c + 1) % k;
      --cap[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(i)] = c;
    }
    Matrix Y = one_hot(y, k);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < k; ++c) {
      if (Y.col(c).sum() > 0.0) keep.push_back(c);
    }
    Matrix out(n, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = Y.col(keep[c]);
    return out;
  };

  SmoothnessReport r;
  r.samples = samples;
  double b_seen = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Matrix Y = draw_y();
    const Matrix M = Y * Y.transpose();
    const Matrix P1 = draw_phi();
    const Matrix P2 = draw_phi();
    b_seen = std::max({b_seen, spectral_norm(P1), spectral_norm(P2)});
    const Matrix gf1 = grad_phi(P1, M, lambda);
    const Matrix gf2 = grad_phi(P2, M, lambda);
    const Matrix gr1 = reverse_objective(P1, Y).grad;
    const Matrix gr2 = reverse_objective(P2, Y).grad;
    const double dist = spectral_norm(P1 - P2);
    r.max_grad_f = std::max({r.max_grad_f, spectral_norm(gf1), spectral_norm(gf2)});
    r.max_grad_r = std::max({r.max_grad_r, spectral_norm(gr1), spectral_norm(gr2)});
    if (dist > 0.0) {
      r.max_ratio_f = std::max(r.max_ratio_f, spectral_norm(gf1 - gf2) / dist);
      r.max_ratio_r = std::max(r.max_ratio_r, spectral_norm(gr1 - gr2) / dist);
    }
  }
  r.bounds = lipschitz_bounds(b_seen, n, n_max, lambda);
  return r;
}

}  // namespace xsdc
