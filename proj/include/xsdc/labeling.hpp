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

#ifndef XSDC_LABELING_HPP_
#define XSDC_LABELING_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "xsdc/linalg.hpp"

namespace xsdc {

enum class LabelSource { kNearestNeighbor, kSpectral, kGroundTruth, kClassifier };

std::string_view to_string(LabelSource s);

struct LabelAssignment {
  std::vector<int> labels;
  LabelSource source = LabelSource::kNearestNeighbor;
  std::optional<double> matched_accuracy;
};

// Labels every row of `features`: rows in `labeled_idx` keep `labels_s`, the
// rest take the majority label of their `k_neighbors` nearest labeled rows
// (Euclidean). Distance ties go to the lower index; vote ties to the label of
// the nearest voter.
LabelAssignment nn_propagate(const Matrix& features, const std::vector<std::size_t>& labeled_idx,
                             const std::vector<int>& labels_s, int k_neighbors = 1);

// Top-k eigenvectors of (M + M^T)/2 (largest algebraic eigenvalues), rows
// clustered by k-means++ seeded k-means (20 restarts x 100 iterations).
LabelAssignment spectral_cluster(const Matrix& M, int k, std::uint64_t seed);

struct KMeansResult {
  std::vector<int> labels;
  double inertia = 0.0;
};

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts = 20,
                    int max_iters = 100);

// Maximum-weight assignment on a square weight matrix (Hungarian algorithm).
// Returns col_of_row: row r is assigned column col_of_row[r].
std::vector<int> max_weight_assignment(const Matrix& weights);

struct MatchResult {
  std::vector<int> permutation;  // predicted label l maps to permutation[l]
  double accuracy = 0.0;
};

// Best relabeling of `pred` against `truth` by exact assignment on the k x k
// contingency table.
MatchResult hungarian_match(const std::vector<int>& pred, const std::vector<int>& truth, int k);

// Fraction of equal entries.
double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

// Ridge regression on one-hot targets; predictions via RidgeSolution::predict.
RidgeSolution fit_final_classifier(const Matrix& features, const std::vector<int>& labels, int k,
                                   double lambda);

}  // namespace xsdc

#endif  // XSDC_LABELING_HPP_
