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

#include "xsdc/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "xsdc/errors.hpp"

namespace xsdc {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw InvalidInput("unknown split tag '" + std::string(s) + "'");
}

void Dataset::validate() const {
  const std::size_t n = size();
  if (labels.size() != n || truth.size() != n || split.size() != n) {
    throw InvalidInput("Dataset: labels, truth and split must have one entry per row");
  }
  if (k < 1) throw InvalidInput("Dataset: k must be >= 1");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] && (*labels[i] < 0 || *labels[i] >= k)) {
      throw InvalidInput("Dataset: label outside [0, k) in row " + std::to_string(i));
    }
    if (truth[i] < -1 || truth[i] >= k) {
      throw InvalidInput("Dataset: truth outside [-1, k) in row " + std::to_string(i));
    }
  }
  require_finite(X, "Dataset: X");
}

std::vector<std::size_t> Dataset::rows(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dataset::labeled_rows(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s && labels[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dataset::unlabeled_rows(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s && !labels[i]) out.push_back(i);
  }
  return out;
}

bool Dataset::has_labels() const {
  return std::any_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); });
}

Matrix gather_rows(const Matrix& X, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= static_cast<std::size_t>(X.rows())) throw InvalidInput("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out = split_fields(text, '\n');
  if (!out.empty() && trim(out.back()).empty()) out.pop_back();
  return out;
}

void finish_loaded(Dataset& ds, std::optional<int> k_override, int max_label) {
  const std::size_t n = ds.labels.size();
  ds.truth.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (ds.labels[i]) ds.truth[i] = *ds.labels[i];
  }
  ds.split.assign(n, Split::kTrain);
  if (k_override) {
    if (*k_override <= max_label) {
      throw InvalidInput("label " + std::to_string(max_label) + " does not fit k = " +
                         std::to_string(*k_override));
    }
    ds.k = *k_override;
  } else {
    ds.k = std::max(1, max_label + 1);
  }
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvOptions& options) {
  Dataset ds;
  ds.name = "csv";
  const auto lines = lines_of(text);
  std::size_t first = options.header ? 1 : 0;
  std::size_t width = 0;
  std::vector<std::vector<double>> rows;
  int max_label = -1;
  for (std::size_t li = first; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    const auto fields = split_fields(lines[li], ',');
    if (rows.empty()) {
      width = fields.size();
      if (options.label_column && *options.label_column >= width) {
        throw ParseError("label column " + std::to_string(*options.label_column) +
                             " beyond the " + std::to_string(width) + " columns",
                         line_no);
      }
    } else if (fields.size() != width) {
      throw ParseError("ragged row: expected " + std::to_string(width) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    std::vector<double> row;
    std::optional<int> label;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto cell = trim(fields[c]);
      if (options.label_column && c == *options.label_column) {
        if (cell.empty()) continue;
        double v = 0.0;
        if (!parse_double(cell, v) || v != std::floor(v) || v < 0.0 || v > 1e9) {
          throw ParseError("label cell '" + std::string(cell) + "' is not a nonnegative integer",
                           line_no);
        }
        label = static_cast<int>(v);
        max_label = std::max(max_label, *label);
        continue;
      }
      double v = 0.0;
      if (!parse_double(cell, v)) {
        throw ParseError("non-numeric cell '" + std::string(cell) + "' in column " +
                             std::to_string(c),
                         line_no);
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
    ds.labels.push_back(label);
  }
  if (rows.empty()) throw ParseError("no data rows", 0);
  const std::size_t d = rows.front().size();
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  finish_loaded(ds, options.k, max_label);
  return ds;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  Dataset ds = parse_csv(read_file(path), options);
  ds.name = std::filesystem::path(path).stem().string();
  return ds;
}

Dataset parse_libsvm(std::string_view text) {
  const auto lines = lines_of(text);
  std::vector<double> raw_labels;
  std::vector<std::vector<std::pair<std::size_t, double>>> entries;
  std::size_t dim = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    auto line = trim(lines[li]);
    if (line.empty()) continue;
    std::vector<std::string_view> tokens;
    for (auto tok : split_fields(line, ' ')) {
      tok = trim(tok);
      if (!tok.empty()) tokens.push_back(tok);
    }
    double label = 0.0;
    if (!parse_double(tokens.front(), label)) {
      throw ParseError("malformed label '" + std::string(tokens.front()) + "'", line_no);
    }
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos) {
        throw ParseError("malformed pair '" + std::string(tokens[t]) + "'", line_no);
      }
      const auto idx_s = tokens[t].substr(0, colon);
      const auto val_s = tokens[t].substr(colon + 1);
      std::size_t idx = 0;
      const auto res = std::from_chars(idx_s.data(), idx_s.data() + idx_s.size(), idx);
      double val = 0.0;
      if (res.ec != std::errc() || res.ptr != idx_s.data() + idx_s.size() || idx == 0 ||
          !parse_double(val_s, val)) {
        throw ParseError("malformed pair '" + std::string(tokens[t]) + "'", line_no);
      }
      for (const auto& [prev, unused] : row) {
        if (prev == idx) {
          throw ParseError("duplicate index " + std::to_string(idx), line_no);
        }
      }
      row.emplace_back(idx, val);
      dim = std::max(dim, idx);
    }
    raw_labels.push_back(label);
    entries.push_back(std::move(row));
  }
  if (entries.empty()) throw ParseError("no data rows", 0);

  Dataset ds;
  ds.name = "libsvm";
  ds.label_values = raw_labels;
  std::sort(ds.label_values.begin(), ds.label_values.end());
  ds.label_values.erase(std::unique(ds.label_values.begin(), ds.label_values.end()),
                        ds.label_values.end());
  ds.X = Matrix::Zero(static_cast<Eigen::Index>(entries.size()), static_cast<Eigen::Index>(dim));
  int max_label = -1;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (const auto& [idx, val] : entries[i]) {
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(idx - 1)) = val;
    }
    const auto pos = std::lower_bound(ds.label_values.begin(), ds.label_values.end(), raw_labels[i]);
    const int cls = static_cast<int>(pos - ds.label_values.begin());
    ds.labels.emplace_back(cls);
    max_label = std::max(max_label, cls);
  }
  finish_loaded(ds, std::nullopt, max_label);
  return ds;
}

Dataset load_libsvm(const std::string& path) {
  Dataset ds = parse_libsvm(read_file(path));
  ds.name = std::filesystem::path(path).stem().string();
  return ds;
}

std::string format_csv(const Matrix& X, const std::vector<std::optional<int>>* labels) {
  if (labels && labels->size() != static_cast<std::size_t>(X.rows())) {
    throw InvalidInput("format_csv: label count mismatch");
  }
  std::string out;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(X(i, j));
    }
    if (labels) {
      out += ',';
      const auto& l = (*labels)[static_cast<std::size_t>(i)];
      if (l) out += std::to_string(*l);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const Matrix& X,
               const std::vector<std::optional<int>>* labels) {
  write_file_atomic(path, format_csv(X, labels));
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidInput("cannot open '" + tmp.string() + "' for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw InvalidInput("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void assign_splits(Dataset& ds, double train_fraction, double val_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction > 1.0) {
    throw InvalidInput("assign_splits: fractions must be nonnegative with sum <= 1");
  }
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < ds.size(); ++i) strata[ds.truth[i]].push_back(i);
  auto rng = make_rng(seed, 1);
  ds.split.assign(ds.size(), Split::kTest);
  for (auto& [cls, idx] : strata) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const double m = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * m));
    const auto n_val = std::min(idx.size() - n_train,
                                static_cast<std::size_t>(std::llround(val_fraction * m)));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      ds.split[idx[r]] = r < n_train ? Split::kTrain : (r < n_train + n_val ? Split::kVal : Split::kTest);
    }
  }
}

Dataset standardize(const Dataset& ds) {
  const auto train = ds.rows(Split::kTrain);
  if (train.empty()) throw InvalidInput("standardize: train split is empty");
  const Matrix T = gather_rows(ds.X, train);
  const Eigen::RowVectorXd mean = T.colwise().mean();
  const Eigen::RowVectorXd sd =
      ((T.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(T.rows())).cwiseSqrt();
  Dataset out = ds;
  out.X.rowwise() -= mean;
  for (Eigen::Index j = 0; j < out.X.cols(); ++j) {
    if (sd(j) > 0.0) out.X.col(j) /= sd(j);
  }
  return out;
}

Dataset make_blobs(std::size_t n, std::size_t d, int k, double separation, double label_fraction,
                   std::uint64_t seed) {
  if (k < 1 || n < static_cast<std::size_t>(k)) throw InvalidInput("make_blobs: need n >= k >= 1");
  if (d < 1) throw InvalidInput("make_blobs: d must be >= 1");
  if (!(separation >= 0.0)) throw InvalidInput("make_blobs: separation must be nonnegative");
  Matrix centers = Matrix::Zero(k, static_cast<Eigen::Index>(d));
  if (static_cast<std::size_t>(k) <= d) {
    for (int c = 0; c < k; ++c) centers(c, c) = separation / std::sqrt(2.0);
  } else {
    for (int c = 0; c < k; ++c) centers(c, 0) = c * separation;
  }
  Dataset ds = make_blobs_from_centers(n, centers, label_fraction, seed);
  ds.name = "blobs";
  return ds;
}

Dataset make_blobs_from_centers(std::size_t n, const Matrix& centers, double label_fraction,
                                std::uint64_t seed) {
  const int k = static_cast<int>(centers.rows());
  if (k < 1 || n < static_cast<std::size_t>(k)) throw InvalidInput("make_blobs: need n >= k >= 1");
  if (!(label_fraction >= 0.0 && label_fraction <= 1.0)) {
    throw InvalidInput("make_blobs: label_fraction must lie in [0, 1]");
  }
  require_finite(centers, "make_blobs: centers");

  auto rng = make_rng(seed, 0);
  std::vector<int> cls(n);
  for (std::size_t i = 0; i < n; ++i) cls[i] = static_cast<int>(i % static_cast<std::size_t>(k));
  std::shuffle(cls.begin(), cls.end(), rng);

  Dataset ds;
  ds.name = "blobs";
  ds.k = k;
  ds.X.resize(static_cast<Eigen::Index>(n), centers.cols());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < centers.cols(); ++j) {
      ds.X(static_cast<Eigen::Index>(i), j) = centers(cls[i], j) + gauss(rng);
    }
  }
  ds.truth = cls;
  ds.labels.assign(n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = cls[i];
  assign_splits(ds, 0.6, 0.2, seed);

  // Hide train labels per class, keeping a label_fraction.
  auto hide_rng = make_rng(seed, 2);
  for (int c = 0; c < k; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (ds.split[i] == Split::kTrain && cls[i] == c) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), hide_rng);
    auto keep = static_cast<std::size_t>(std::llround(label_fraction * static_cast<double>(idx.size())));
    if (label_fraction > 0.0) keep = std::max<std::size_t>(keep, 1);
    for (std::size_t r = keep; r < idx.size(); ++r) ds.labels[idx[r]] = std::nullopt;
  }
  return ds;
}

Dataset keep_train_labels(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.k));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.split[i] != Split::kTrain) continue;
    if (ds.truth[i] < 0) throw InvalidInput("keep_train_labels: train row without ground truth");
    by_class[static_cast<std::size_t>(ds.truth[i])].push_back(i);
  }
  std::size_t available = 0;
  for (const auto& v : by_class) available += v.size();
  if (count > available) throw InvalidInput("keep_train_labels: not enough train rows");

  auto rng = make_rng(seed, 3);
  for (auto& v : by_class) std::shuffle(v.begin(), v.end(), rng);
  // Round-robin over classes that still have rows.
  std::vector<std::size_t> taken(by_class.size(), 0);
  std::size_t left = count;
  while (left > 0) {
    for (std::size_t c = 0; c < by_class.size() && left > 0; ++c) {
      if (taken[c] < by_class[c].size()) {
        ++taken[c];
        --left;
      }
    }
  }
  Dataset out = ds;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    for (std::size_t r = 0; r < by_class[c].size(); ++r) {
      const std::size_t i = by_class[c][r];
      out.labels[i] = r < taken[c] ? std::optional<int>(ds.truth[i]) : std::nullopt;
    }
  }
  return out;
}

Dataset imbalance(const Dataset& ds, const std::vector<double>& class_fractions,
                  std::uint64_t seed) {
  if (class_fractions.size() != static_cast<std::size_t>(ds.k)) {
    throw InvalidInput("imbalance: need one fraction per class");
  }
  double total = 0.0;
  for (double f : class_fractions) {
    if (!(f >= 0.0)) throw InvalidInput("imbalance: fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("imbalance: fractions must sum to 1");

  std::vector<std::vector<std::size_t>> pool(static_cast<std::size_t>(ds.k));
  for (std::size_t i : ds.unlabeled_rows(Split::kTrain)) {
    if (ds.truth[i] < 0) throw InvalidInput("imbalance: unlabeled train row without ground truth");
    pool[static_cast<std::size_t>(ds.truth[i])].push_back(i);
  }
  double budget = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < pool.size(); ++c) {
    if (class_fractions[c] == 0.0) continue;
    if (pool[c].empty()) {
      throw InvalidInput("imbalance: class " + std::to_string(c) + " has no unlabeled train rows");
    }
    budget = std::min(budget, static_cast<double>(pool[c].size()) / class_fractions[c]);
  }
  const double kept_total = std::floor(budget + 1e-9);

  auto rng = make_rng(seed, 4);
  std::vector<bool> drop(ds.size(), false);
  for (std::size_t c = 0; c < pool.size(); ++c) {
    const auto target = std::min(
        pool[c].size(), static_cast<std::size_t>(std::llround(class_fractions[c] * kept_total)));
    std::shuffle(pool[c].begin(), pool[c].end(), rng);
    for (std::size_t r = target; r < pool[c].size(); ++r) drop[pool[c][r]] = true;
  }

  Dataset out;
  out.k = ds.k;
  out.name = ds.name;
  out.label_values = ds.label_values;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!drop[i]) keep.push_back(i);
  }
  out.X = gather_rows(ds.X, keep);
  for (std::size_t i : keep) {
    out.labels.push_back(ds.labels[i]);
    out.truth.push_back(ds.truth[i]);
    out.split.push_back(ds.split[i]);
  }
  return out;
}

}  // namespace xsdc
