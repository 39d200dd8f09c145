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

#include "xsdc/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "xsdc/errors.hpp"

namespace xsdc {

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::kNearestNeighbor: return "nearest_neighbor";
    case LabelSource::kSpectral: return "spectral";
    case LabelSource::kGroundTruth: return "ground_truth";
    case LabelSource::kClassifier: return "classifier";
  }
  return "unknown";
}

LabelAssignment nn_propagate(const Matrix& features, const std::vector<std::size_t>& labeled_idx,
                             const std::vector<int>& labels_s, int k_neighbors) {
  if (labeled_idx.empty()) throw InvalidInput("nn_propagate: no labeled observations");
  if (labeled_idx.size() != labels_s.size()) {
    throw InvalidInput("nn_propagate: labeled_idx and labels_s differ in length");
  }
  if (k_neighbors < 1) throw InvalidInput("nn_propagate: k_neighbors must be >= 1");
  const auto n = static_cast<std::size_t>(features.rows());

  LabelAssignment out;
  out.source = LabelSource::kNearestNeighbor;
  out.labels.assign(n, -1);
  std::vector<bool> is_labeled(n, false);
  for (std::size_t s = 0; s < labeled_idx.size(); ++s) {
    if (labeled_idx[s] >= n) throw InvalidInput("nn_propagate: labeled index out of range");
    if (labels_s[s] < 0) throw InvalidInput("nn_propagate: negative label");
    is_labeled[labeled_idx[s]] = true;
    out.labels[labeled_idx[s]] = labels_s[s];
  }

  const Matrix L = [&] {
    Matrix m(static_cast<Eigen::Index>(labeled_idx.size()), features.cols());
    for (std::size_t s = 0; s < labeled_idx.size(); ++s) {
      m.row(static_cast<Eigen::Index>(s)) = features.row(static_cast<Eigen::Index>(labeled_idx[s]));
    }
    return m;
  }();
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k_neighbors), labeled_idx.size());
  std::vector<std::pair<double, std::size_t>> dist(labeled_idx.size());

  for (std::size_t i = 0; i < n; ++i) {
    if (is_labeled[i]) continue;
    const auto row = features.row(static_cast<Eigen::Index>(i));
    for (std::size_t s = 0; s < labeled_idx.size(); ++s) {
      dist[s] = {(L.row(static_cast<Eigen::Index>(s)) - row).squaredNorm(), labeled_idx[s]};
    }
    // Stable in (distance, index) so ties resolve to the lower index.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    if (kk == 1) {
      out.labels[i] = out.labels[dist[0].second];
      continue;
    }
    std::vector<int> votes;
    for (std::size_t r = 0; r < kk; ++r) {
      const int l = out.labels[dist[r].second];
      if (static_cast<std::size_t>(l) >= votes.size()) votes.resize(static_cast<std::size_t>(l) + 1, 0);
      ++votes[static_cast<std::size_t>(l)];
    }
    const int top = *std::max_element(votes.begin(), votes.end());
    for (std::size_t r = 0; r < kk; ++r) {
      const int l = out.labels[dist[r].second];
      if (votes[static_cast<std::size_t>(l)] == top) {
        out.labels[i] = l;
        break;
      }
    }
  }
  return out;
}

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts, int max_iters) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n) throw InvalidInput("kmeans: need 1 <= k <= n");
  std::mt19937_64 rng(seed);

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  std::vector<int> labels(static_cast<std::size_t>(n));
  Vector d2(n);

  for (int r = 0; r < restarts; ++r) {
    // k-means++ seeding
    Matrix centers(k, points.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.row(0) = points.row(first(rng));
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double total = d2.sum();
      Eigen::Index pick = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> unif(0.0, total);
        double target = unif(rng);
        for (pick = 0; pick < n - 1; ++pick) {
          target -= d2(pick);
          if (target < 0.0) break;
        }
      } else {
        pick = first(rng);
      }
      centers.row(c) = points.row(pick);
      for (Eigen::Index i = 0; i < n; ++i) {
        d2(i) = std::min(d2(i), (points.row(i) - centers.row(c)).squaredNorm());
      }
    }

    double inertia = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      bool changed = it == 0;
      inertia = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        double bd = (points.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
          const double d = (points.row(i) - centers.row(c)).squaredNorm();
          if (d < bd) {
            bd = d;
            arg = c;
          }
        }
        if (labels[static_cast<std::size_t>(i)] != arg) changed = true;
        labels[static_cast<std::size_t>(i)] = arg;
        inertia += bd;
      }
      if (!changed) break;
      Matrix sums = Matrix::Zero(k, points.cols());
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
          centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        }
      }
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
    }
  }
  return best;
}

LabelAssignment spectral_cluster(const Matrix& M, int k, std::uint64_t seed) {
  const Eigen::Index n = M.rows();
  if (M.cols() != n || n == 0) throw InvalidInput("spectral_cluster: M must be square");
  if (k < 1 || k > n) throw InvalidInput("spectral_cluster: need 1 <= k <= n");
  require_finite(M, "spectral_cluster: M");

  const Matrix sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Matrix embedding = eig.eigenvectors().rightCols(k);

  LabelAssignment out;
  out.source = LabelSource::kSpectral;
  out.labels = kmeans(embedding, k, seed).labels;
  return out;
}

std::vector<int> max_weight_assignment(const Matrix& weights) {
  const Eigen::Index n = weights.rows();
  if (weights.cols() != n) throw InvalidInput("max_weight_assignment: matrix must be square");
  // Shortest augmenting path Hungarian method on cost = -weight, 1-based potentials.
  const double inf = std::numeric_limits<double>::infinity();
  const auto un = static_cast<std::size_t>(n);
  std::vector<double> u(un + 1, 0.0), v(un + 1, 0.0), minv(un + 1);
  std::vector<std::size_t> p(un + 1, 0), way(un + 1, 0);
  std::vector<bool> used(un + 1);
  auto cost = [&](std::size_t i, std::size_t j) {
    return -weights(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
  };
  for (std::size_t i = 1; i <= un; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= un; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= un; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(un, -1);
  for (std::size_t j = 1; j <= un; ++j) {
    if (p[j] != 0) col_of_row[p[j] - 1] = static_cast<int>(j - 1);
  }
  return col_of_row;
}

MatchResult hungarian_match(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
  if (pred.size() != truth.size()) throw InvalidInput("hungarian_match: length mismatch");
  if (k < 1) throw InvalidInput("hungarian_match: k must be >= 1");
  Matrix table = Matrix::Zero(k, k);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= k || truth[i] < 0 || truth[i] >= k) {
      throw InvalidInput("hungarian_match: label outside [0, k)");
    }
    table(pred[i], truth[i]) += 1.0;
  }
  MatchResult out;
  out.permutation = max_weight_assignment(table);
  double agree = 0.0;
  for (int l = 0; l < k; ++l) agree += table(l, out.permutation[static_cast<std::size_t>(l)]);
  out.accuracy = pred.empty() ? 0.0 : agree / static_cast<double>(pred.size());
  return out;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw InvalidInput("accuracy: length mismatch");
  if (pred.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

RidgeSolution fit_final_classifier(const Matrix& features, const std::vector<int>& labels, int k,
                                   double lambda) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw InvalidInput("fit_final_classifier: label count mismatch");
  }
  return ridge_solve(features, one_hot(labels, k), lambda);
}

}  // namespace xsdc
