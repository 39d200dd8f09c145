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

#ifndef XSDC_DATA_IO_HPP_
#define XSDC_DATA_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xsdc/linalg.hpp"

namespace xsdc {

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split s);
// Accepts "train", "val", "test"; anything else throws InvalidInput.
Split parse_split(std::string_view s);

// Observations with optional labels. `labels` holds what the learner may see;
// `truth` holds ground truth for scoring (-1 when unknown). Loaders set
// truth = labels; generators keep the hidden labels in truth.
struct Dataset {
  Matrix X;
  std::vector<std::optional<int>> labels;
  std::vector<int> truth;
  int k = 0;
  std::vector<Split> split;
  std::string name;
  // Original label value of each class index (libsvm files).
  std::vector<double> label_values;

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }
  void validate() const;

  std::vector<std::size_t> rows(Split s) const;
  // Rows of split `s` with an observed label.
  std::vector<std::size_t> labeled_rows(Split s) const;
  std::vector<std::size_t> unlabeled_rows(Split s) const;
  bool has_labels() const;
};

// Sub-matrix of the given rows, in order.
Matrix gather_rows(const Matrix& X, const std::vector<std::size_t>& idx);

struct CsvOptions {
  std::optional<std::size_t> label_column;  // 0-based
  bool header = false;
  std::optional<int> k;                      // default: max label + 1
};

// Every row is tagged train. Use assign_splits for a train/val/test split.
Dataset load_csv(const std::string& path, const CsvOptions& options = {});
Dataset parse_csv(std::string_view text, const CsvOptions& options = {});

// "label idx:val ..." with 1-based indices. Distinct label values are mapped
// in increasing order onto 0..k-1 (so -1/+1 become 0/1); the mapping is kept
// in label_values.
Dataset load_libsvm(const std::string& path);
Dataset parse_libsvm(std::string_view text);

// Row-major CSV with 17 significant digits. An optional trailing label
// column is written empty for unlabeled rows.
std::string format_csv(const Matrix& X, const std::vector<std::optional<int>>* labels = nullptr);
void write_csv(const std::string& path, const Matrix& X,
               const std::vector<std::optional<int>>* labels = nullptr);

// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

// Per-class shuffled split into train/val/test by rounded fractions. Rows of
// unknown class form their own stratum.
void assign_splits(Dataset& ds, double train_fraction, double val_fraction, std::uint64_t seed);

// Column mean and population standard deviation from the train rows, applied
// to every row. Zero-variance columns are only centered.
Dataset standardize(const Dataset& ds);

// k unit-covariance Gaussian clusters of near-equal size. With k <= d the
// centers sit at (separation / sqrt 2) e_c, otherwise at c * separation e_0,
// so every pair is at least `separation` apart. Split 60/20/20 per class.
// Validation and test rows keep their labels; in the train split a
// label_fraction of each class stays labeled (at least one when the fraction
// is positive).
Dataset make_blobs(std::size_t n, std::size_t d, int k, double separation, double label_fraction,
                   std::uint64_t seed);

// As make_blobs with explicit centers (k x d).
Dataset make_blobs_from_centers(std::size_t n, const Matrix& centers, double label_fraction,
                                std::uint64_t seed);

// Keeps exactly `count` labeled train rows, spread over classes as evenly as
// possible (per-class counts differ by at most one, every class at least one
// when count >= k), hiding the rest.
Dataset keep_train_labels(const Dataset& ds, std::size_t count, std::uint64_t seed);

// Removes unlabeled train rows so that their classes follow class_fractions,
// keeping as many rows as possible. Labeled rows and other splits are kept.
Dataset imbalance(const Dataset& ds, const std::vector<double>& class_fractions,
                  std::uint64_t seed);

}  // namespace xsdc

#endif  // XSDC_DATA_IO_HPP_
