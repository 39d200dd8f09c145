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

#include "xsdc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <utility>

#include "json.hpp"

namespace xsdc {

using json = nlohmann::ordered_json;

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kSemi: return "semi";
    case Mode::kUnsupervised: return "unsupervised";
    case Mode::kSupervised: return "supervised";
  }
  return "unknown";
}

Mode parse_mode(std::string_view s) {
  if (s == "semi") return Mode::kSemi;
  if (s == "unsupervised") return Mode::kUnsupervised;
  if (s == "supervised") return Mode::kSupervised;
  throw InvalidInput("unknown mode '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw InvalidInput("TrainConfig: batch_size must be >= 2");
  if (eval_every < 1) throw InvalidInput("TrainConfig: eval_every must be >= 1");
  if (labeled_batch_fraction &&
      !(*labeled_batch_fraction > 0.0 && *labeled_batch_fraction <= 1.0)) {
    throw InvalidInput("TrainConfig: labeled_batch_fraction must lie in (0, 1]");
  }
  ulr.validate();
  if (!(init_learning_rate >= 0.0) || !std::isfinite(init_learning_rate)) {
    throw InvalidInput("TrainConfig: init_learning_rate must be finite and nonnegative");
  }
  if (balance.iters < 1) throw InvalidInput("TrainConfig: balance.iters must be >= 1");
  if (balance.mu && !(*balance.mu > 0.0 && std::isfinite(*balance.mu))) {
    throw InvalidInput("TrainConfig: balance.mu must be positive");
  }
  for (const auto& f : {balance.n_min_frac, balance.n_max_frac}) {
    if (f && !(*f >= 0.0 && *f <= 1.0)) {
      throw InvalidInput("TrainConfig: cluster-size fractions must lie in [0, 1]");
    }
  }
  if (balance.n_min_frac && balance.n_max_frac && *balance.n_min_frac > *balance.n_max_frac) {
    throw InvalidInput("TrainConfig: n_min_frac must not exceed n_max_frac");
  }
  if (balance.max_doublings < 0) throw InvalidInput("TrainConfig: max_doublings must be >= 0");
  for (const auto& c : constraints) {
    if (c.value != 0.0 && c.value != 1.0) {
      throw InvalidInput("TrainConfig: constraint values must be 0 or 1");
    }
  }
  if (filters < 1) throw InvalidInput("TrainConfig: filters must be >= 1");
  if (!(epsilon >= 0.0)) throw InvalidInput("TrainConfig: epsilon must be nonnegative");
  if (newton_iters < 1) throw InvalidInput("TrainConfig: newton_iters must be >= 1");
  if (nn_neighbors < 1) throw InvalidInput("TrainConfig: nn_neighbors must be >= 1");
  for (double l : lambda_retune_grid) {
    if (!(l > 0.0)) throw InvalidInput("TrainConfig: lambda_retune_grid values must be positive");
  }
  if (lambda_retune_every < 1) throw InvalidInput("TrainConfig: lambda_retune_every must be >= 1");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!obj.is_object()) throw InvalidInput(std::string(where) + ": expected an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw InvalidInput(std::string(where) + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_optional(const json& obj, const char* key, std::optional<double>& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (v.is_null() || (v.is_string() && v.get<std::string>() == "auto")) {
    out.reset();
  } else {
    out = v.get<double>();
  }
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json config_object(const TrainConfig& c) {
  json constraints = json::array();
  for (const auto& e : c.constraints) constraints.push_back({e.i, e.j, e.value});
  return json{
      {"supervised_init_iters", c.supervised_init_iters},
      {"main_iters", c.main_iters},
      {"eval_every", c.eval_every},
      {"batch_size", c.batch_size},
      {"labeled_batch_fraction", optional_json(c.labeled_batch_fraction)},
      {"ulr",
       {{"lambda", c.ulr.lambda},
        {"alpha", c.ulr.alpha},
        {"rho", c.ulr.rho},
        {"learning_rate", c.ulr.learning_rate}}},
      {"init_learning_rate", c.init_learning_rate},
      {"balance",
       {{"iters", c.balance.iters},
        {"mu", c.balance.mu ? json(*c.balance.mu) : json("auto")},
        {"n_min_frac", optional_json(c.balance.n_min_frac)},
        {"n_max_frac", optional_json(c.balance.n_max_frac)},
        {"max_doublings", c.balance.max_doublings}}},
      {"seed", c.seed},
      {"constraints", constraints},
      {"mode", std::string(to_string(c.mode))},
      {"filters", c.filters},
      {"epsilon", c.epsilon},
      {"newton_iters", c.newton_iters},
      {"normalize", c.normalize},
      {"nn_neighbors", c.nn_neighbors},
      {"lambda_retune_grid", c.lambda_retune_grid},
      {"lambda_retune_every", c.lambda_retune_every},
  };
}

TrainConfig config_from_object(const json& j) {
  check_keys(j,
             {"supervised_init_iters", "main_iters", "eval_every", "batch_size",
              "labeled_batch_fraction", "ulr", "init_learning_rate", "balance", "seed",
              "constraints", "mode", "filters", "epsilon", "newton_iters", "normalize",
              "nn_neighbors", "lambda_retune_grid", "lambda_retune_every"},
             "config");
  TrainConfig c;
  read(j, "supervised_init_iters", c.supervised_init_iters);
  read(j, "main_iters", c.main_iters);
  read(j, "eval_every", c.eval_every);
  read(j, "batch_size", c.batch_size);
  read_optional(j, "labeled_batch_fraction", c.labeled_batch_fraction);
  if (j.contains("ulr")) {
    const json& u = j.at("ulr");
    check_keys(u, {"lambda", "alpha", "rho", "learning_rate"}, "config.ulr");
    read(u, "lambda", c.ulr.lambda);
    read(u, "alpha", c.ulr.alpha);
    read(u, "rho", c.ulr.rho);
    read(u, "learning_rate", c.ulr.learning_rate);
  }
  read(j, "init_learning_rate", c.init_learning_rate);
  if (j.contains("balance")) {
    const json& b = j.at("balance");
    check_keys(b, {"iters", "mu", "n_min_frac", "n_max_frac", "max_doublings"}, "config.balance");
    read(b, "iters", c.balance.iters);
    read_optional(b, "mu", c.balance.mu);
    read_optional(b, "n_min_frac", c.balance.n_min_frac);
    read_optional(b, "n_max_frac", c.balance.n_max_frac);
    read(b, "max_doublings", c.balance.max_doublings);
  }
  read(j, "seed", c.seed);
  if (j.contains("constraints")) {
    for (const auto& e : j.at("constraints")) {
      if (!e.is_array() || e.size() != 3) {
        throw InvalidInput("config.constraints: each entry must be [i, j, value]");
      }
      c.constraints.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<double>()});
    }
  }
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  read(j, "filters", c.filters);
  read(j, "epsilon", c.epsilon);
  read(j, "newton_iters", c.newton_iters);
  read(j, "normalize", c.normalize);
  read(j, "nn_neighbors", c.nn_neighbors);
  read(j, "lambda_retune_grid", c.lambda_retune_grid);
  read(j, "lambda_retune_every", c.lambda_retune_every);
  c.validate();
  return c;
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string(what) + ": " + e.what());
  }
}

json matrix_row_major(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

Matrix matrix_from_row_major(const json& a, Eigen::Index rows, Eigen::Index cols,
                             std::string_view what) {
  if (!a.is_array() || a.size() != static_cast<std::size_t>(rows * cols)) {
    throw InvalidInput("checkpoint: " + std::string(what) + " has the wrong length");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = a[static_cast<std::size_t>(i * cols + j)].get<double>();
    }
  }
  return m;
}

}  // namespace

std::string config_to_json(const TrainConfig& config) { return config_object(config).dump(2); }

TrainConfig config_from_json(std::string_view text) {
  const json j = parse_json(text, "config");
  try {
    return config_from_object(j);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
}

std::string checkpoint_json(const TrainState& state, const TrainConfig& config) {
  const NystromLayer& l = state.layer;
  json j{{"format_version", 1},
         {"d", l.input_dim()},
         {"p", l.filters()},
         {"sigma", l.sigma},
         {"epsilon", l.epsilon},
         {"newton_iters", l.newton_iters},
         {"V", matrix_row_major(l.landmarks)}};
  if (state.classifier) {
    j["k"] = state.classifier->weights.cols();
    j["W"] = matrix_row_major(state.classifier->weights);
    j["b"] = std::vector<double>(state.classifier->bias.data(),
                                 state.classifier->bias.data() + state.classifier->bias.size());
  } else {
    j["k"] = nullptr;
    j["W"] = nullptr;
    j["b"] = nullptr;
  }
  j["config"] = config_object(config);
  return j.dump(2);
}

Checkpoint load_checkpoint(std::string_view text) {
  const json j = parse_json(text, "checkpoint");
  try {
    check_keys(j, {"format_version", "d", "p", "sigma", "epsilon", "newton_iters", "V", "k", "W", "b", "config"},
               "checkpoint");
    if (!j.contains("format_version") || j.at("format_version").get<int>() != 1) {
      throw InvalidInput("checkpoint: unsupported or missing format_version");
    }
    Checkpoint c;
    const auto d = j.at("d").get<Eigen::Index>();
    const auto p = j.at("p").get<Eigen::Index>();
    c.layer.landmarks = matrix_from_row_major(j.at("V"), d, p, "V");
    c.layer.sigma = j.at("sigma").get<double>();
    c.layer.epsilon = j.at("epsilon").get<double>();
    c.layer.newton_iters = j.at("newton_iters").get<int>();
    c.layer.validate();
    if (j.contains("W") && !j.at("W").is_null()) {
      const auto k = j.at("k").get<Eigen::Index>();
      RidgeSolution r;
      r.weights = matrix_from_row_major(j.at("W"), p, k, "W");
      const auto b = j.at("b").get<std::vector<double>>();
      if (b.size() != static_cast<std::size_t>(k)) throw InvalidInput("checkpoint: b has the wrong length");
      r.bias = Eigen::Map<const Vector>(b.data(), k);
      c.classifier = std::move(r);
    }
    if (j.contains("config")) c.config_json = j.at("config").dump(2);
    return c;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sampling

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 of the seed offset by the stream
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

BatchSampler::BatchSampler(std::vector<std::size_t> labeled, std::vector<std::size_t> unlabeled,
                           std::uint64_t seed)
    : rng_(seed) {
  labeled_.order = std::move(labeled);
  unlabeled_.order = std::move(unlabeled);
  std::shuffle(labeled_.order.begin(), labeled_.order.end(), rng_);
  std::shuffle(unlabeled_.order.begin(), unlabeled_.order.end(), rng_);
}

std::vector<std::size_t> BatchSampler::take(Pool& pool, std::size_t count) {
  count = std::min(count, pool.order.size());
  const std::size_t remaining = pool.order.size() - pool.cursor;
  const auto cur = pool.order.begin() + static_cast<std::ptrdiff_t>(pool.cursor);
  if (remaining >= count) {
    std::vector<std::size_t> out(cur, cur + static_cast<std::ptrdiff_t>(count));
    pool.cursor += count;
    return out;
  }
  std::vector<std::size_t> out(cur, pool.order.end());
  const std::set<std::size_t> leftover(out.begin(), out.end());
  std::shuffle(pool.order.begin(), pool.order.end(), rng_);
  std::stable_partition(pool.order.begin(), pool.order.end(),
                        [&](std::size_t r) { return leftover.count(r) == 0; });
  const std::size_t need = count - out.size();
  out.insert(out.end(), pool.order.begin(), pool.order.begin() + static_cast<std::ptrdiff_t>(need));
  pool.cursor = need;
  return out;
}

std::vector<std::size_t> BatchSampler::draw_labeled(std::size_t count) { return take(labeled_, count); }

std::vector<std::size_t> BatchSampler::draw_unlabeled(std::size_t count) {
  return take(unlabeled_, count);
}

std::vector<std::size_t> BatchSampler::draw(std::size_t batch_size, std::size_t n_labeled) {
  std::vector<std::size_t> out = take(labeled_, std::min(n_labeled, batch_size));
  const std::vector<std::size_t> rest = take(unlabeled_, batch_size - out.size());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string RunMetrics::to_csv() const {
  std::string out = "iteration,split,accuracy,objective,marginal_violation,mu\n";
  auto row = [&](std::size_t it, const char* split, double acc, const EvalRecord& e) {
    out += std::to_string(it) + "," + split + "," + num(acc) + "," + num(e.objective) + "," +
           num(e.marginal_violation) + "," + num(e.mu) + "\n";
  };
  for (const auto& e : evals) {
    row(e.iteration, "train", e.train_accuracy, e);
    row(e.iteration, "val", e.val_accuracy, e);
    row(e.iteration, "test", e.test_accuracy, e);
  }
  return out;
}

std::string SweepResult::to_csv() const {
  std::string out = "parameter,value,val_accuracy,diverged\n";
  for (const auto& r : records) {
    out += r.parameter + "," + num(r.value) + "," + num(r.val_accuracy) + "," +
           (r.diverged ? "1" : "0") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

bool uses_labels(const Dataset& ds, const TrainConfig& config) {
  return config.mode != Mode::kUnsupervised && !ds.labeled_rows(Split::kTrain).empty();
}

Matrix dataset_features(const NystromLayer& layer, const Dataset& ds, bool normalize) {
  return forward(layer, ds.X, normalize).phi;
}

namespace {

struct EvalDetail {
  Accuracies acc;
  RidgeSolution classifier;
  std::vector<int> train_labels;  // aligned with ds.rows(kTrain)
  LabelSource unlabeled_source = LabelSource::kNearestNeighbor;
};

std::pair<double, double> bounds_fracs(const TrainConfig& c, int k) {
  const double def = 1.0 / static_cast<double>(k);
  const double lo = c.balance.n_min_frac.value_or(def);
  const double hi = c.balance.n_max_frac.value_or(def);
  if (lo > hi) throw InvalidInput("cluster-size bounds: n_min_frac exceeds n_max_frac");
  return {lo, hi};
}

// Global constraints whose endpoints both lie in `rows`, in local indices.
void add_constraints(const std::vector<KnownEntry>& global, const std::vector<std::size_t>& rows,
                     std::vector<KnownEntry>& known) {
  if (global.empty()) return;
  std::map<std::size_t, std::size_t> pos;
  for (std::size_t r = 0; r < rows.size(); ++r) pos.emplace(rows[r], r);
  for (const auto& c : global) {
    auto a = pos.find(c.i);
    auto b = pos.find(c.j);
    if (a != pos.end() && b != pos.end()) known.push_back({a->second, b->second, c.value});
  }
}

BalanceOutcome balance_rows(const Matrix& Phi, const std::vector<std::size_t>& rows,
                            const std::vector<KnownEntry>& known_local, const Dataset& ds,
                            const TrainConfig& c) {
  const auto n = rows.size();
  const auto [lo, hi] = bounds_fracs(c, ds.k);
  BalancingProblem p;
  p.A = compute_A(Phi, c.ulr.lambda);
  p.known = close_known_set(known_local, n, true);
  p.n_min = lo * static_cast<double>(n);
  p.n_max = hi * static_cast<double>(n);
  p.mu = c.balance.mu ? *c.balance.mu : default_mu(p.A).mu;
  p.iters = c.balance.iters;
  p.k = ds.k;
  return balance_with_doubling(std::move(p), c.balance.max_doublings);
}

double split_accuracy(const std::vector<int>& pred_all, const Dataset& ds, Split s, bool matched) {
  std::vector<int> pred;
  std::vector<int> truth;
  for (std::size_t i : ds.rows(s)) {
    if (ds.truth[i] < 0) continue;
    pred.push_back(pred_all[i]);
    truth.push_back(ds.truth[i]);
  }
  if (pred.empty()) return 0.0;
  return matched ? hungarian_match(pred, truth, ds.k).accuracy : accuracy(pred, truth);
}

EvalDetail evaluate_detail(const TrainState& state, const Dataset& ds, const TrainConfig& c) {
  const Matrix Phi = dataset_features(state.layer, ds, c.normalize);
  const auto train = ds.rows(Split::kTrain);
  if (train.empty()) throw InvalidInput("evaluate: train split is empty");
  const Matrix Phi_train = gather_rows(Phi, train);

  EvalDetail out;
  const bool labeled = uses_labels(ds, c);
  if (labeled) {
    std::vector<std::size_t> pos;
    std::vector<int> lab;
    for (std::size_t r = 0; r < train.size(); ++r) {
      if (ds.labels[train[r]]) {
        pos.push_back(r);
        lab.push_back(*ds.labels[train[r]]);
      }
    }
    out.train_labels = nn_propagate(Phi_train, pos, lab, c.nn_neighbors).labels;
    out.unlabeled_source = LabelSource::kNearestNeighbor;
  } else {
    std::vector<KnownEntry> known;
    add_constraints(c.constraints, train, known);
    const BalanceOutcome bal = balance_rows(Phi_train, train, known, ds, c);
    out.train_labels =
        spectral_cluster(bal.result.M, ds.k, derive_seed(c.seed, kStreamEvaluation)).labels;
    out.unlabeled_source = LabelSource::kSpectral;
  }
  out.classifier = fit_final_classifier(Phi_train, out.train_labels, ds.k, c.ulr.lambda);

  std::vector<int> pred = out.classifier.predict(Phi);
  if (!labeled) {
    // The train split is scored on the clustering itself.
    for (std::size_t r = 0; r < train.size(); ++r) pred[train[r]] = out.train_labels[r];
  }
  const bool matched = !labeled;
  out.acc.train = split_accuracy(pred, ds, Split::kTrain, matched);
  out.acc.val = split_accuracy(pred, ds, Split::kVal, matched);
  out.acc.test = split_accuracy(pred, ds, Split::kTest, matched);
  return out;
}

}  // namespace

Accuracies evaluate_all(const TrainState& state, const Dataset& ds, const TrainConfig& config) {
  return evaluate_detail(state, ds, config).acc;
}

double evaluate(const TrainState& state, const Dataset& ds, Split split, const TrainConfig& config) {
  const Accuracies a = evaluate_all(state, ds, config);
  switch (split) {
    case Split::kTrain: return a.train;
    case Split::kVal: return a.val;
    case Split::kTest: return a.test;
  }
  throw InvalidInput("evaluate: unknown split");
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<std::size_t> training_rows(const Dataset& ds, const TrainConfig& c) {
  if (c.mode == Mode::kSupervised) return ds.labeled_rows(Split::kTrain);
  return ds.rows(Split::kTrain);
}

// Consecutive increases of the step objective.
class ObjectiveMonitor {
 public:
  void observe(double value, std::size_t iteration) {
    if (has_prev_ && value > prev_) {
      if (++rising_ >= 20) {
        throw Diverged("objective increased over 20 consecutive steps", iteration);
      }
    } else {
      rising_ = 0;
    }
    prev_ = value;
    has_prev_ = true;
  }

 private:
  double prev_ = 0.0;
  bool has_prev_ = false;
  int rising_ = 0;
};

struct StepInput {
  const Dataset& ds;
  const TrainConfig& config;
  bool use_labels;
  Phase phase;
  double learning_rate;
};

void run_step(TrainState& state, const std::vector<std::size_t>& batch, std::size_t iteration,
              const StepInput& in, RunMetrics* metrics, const StepHook& hook) {
  const Dataset& ds = in.ds;
  const TrainConfig& c = in.config;
  const Matrix Xb = gather_rows(ds.X, batch);
  const std::size_t nb = batch.size();

  bool all_labeled = in.use_labels;
  for (std::size_t i : batch) all_labeled = all_labeled && ds.labels[i].has_value();

  StepTrace trace;
  trace.iteration = iteration;
  trace.phase = in.phase;
  Matrix M;
  std::vector<KnownEntry> known;
  if (all_labeled) {
    std::vector<int> y(nb);
    for (std::size_t r = 0; r < nb; ++r) y[r] = *ds.labels[batch[r]];
    const Matrix Y = one_hot(y, ds.k);
    M = Y * Y.transpose();
  } else {
    if (in.use_labels) {
      for (std::size_t a = 0; a < nb; ++a) {
        if (!ds.labels[batch[a]]) continue;
        for (std::size_t b = a + 1; b < nb; ++b) {
          if (!ds.labels[batch[b]]) continue;
          known.push_back({a, b, *ds.labels[batch[a]] == *ds.labels[batch[b]] ? 1.0 : 0.0});
        }
      }
    }
    add_constraints(c.constraints, batch, known);
    const Matrix Phi = forward(state.layer, Xb, c.normalize).phi;
    const BalanceOutcome bal = balance_rows(Phi, batch, known, ds, c);
    known = close_known_set(known, nb, true);
    M = bal.result.M;
    trace.balanced = true;
    trace.mu = bal.mu;
    trace.doublings = bal.doublings;
    trace.marginal_violation = bal.result.marginal_violation;
    trace.known_violation = bal.result.known_violation;
  }

  UlrConfig ulr = c.ulr;
  ulr.learning_rate = in.learning_rate;
  state = ulr_step(std::move(state), Xb, M, ulr, c.normalize);
  trace.objective = state.last_objective;

  if (metrics) {
    metrics->steps.push_back(trace);
    metrics->max_known_violation = std::max(metrics->max_known_violation, trace.known_violation);
  }
  if (hook) {
    StepRecord rec;
    rec.iteration = iteration;
    rec.phase = in.phase;
    rec.batch = &batch;
    rec.M = &M;
    rec.known = &known;
    rec.balanced = trace.balanced;
    rec.mu = trace.mu;
    rec.objective = trace.objective;
    rec.layer = &state.layer;
    hook(rec);
  }
}

}  // namespace

TrainState initial_state(const Dataset& ds, const TrainConfig& config) {
  const auto rows = training_rows(ds, config);
  if (rows.size() < static_cast<std::size_t>(config.filters)) {
    throw InvalidInput("initial_state: fewer training rows than filters");
  }
  TrainState s;
  s.rng.seed(derive_seed(config.seed, kStreamLandmarks));
  s.layer = init_landmarks(gather_rows(ds.X, rows), config.filters, s.rng());
  s.layer.epsilon = config.epsilon;
  s.layer.newton_iters = config.newton_iters;
  return s;
}

TrainState supervised_init(TrainState state, const Dataset& ds, const TrainConfig& config,
                           BatchSampler& sampler, RunMetrics* metrics, const StepHook& hook) {
  if (!uses_labels(ds, config) || config.supervised_init_iters == 0) return state;
  if (sampler.labeled_size() < 2) {
    throw InvalidInput("supervised_init: needs at least 2 labeled training rows");
  }
  const StepInput in{ds, config, true, Phase::kInit, config.init_learning_rate};
  ObjectiveMonitor monitor;
  const std::size_t nb = std::min(config.batch_size, sampler.labeled_size());
  for (std::size_t t = 1; t <= config.supervised_init_iters; ++t) {
    const auto batch = sampler.draw_labeled(nb);
    run_step(state, batch, t, in, metrics, hook);
    monitor.observe(state.last_objective, t);
  }
  return state;
}

namespace {

void record_eval(TrainState& state, RunMetrics& m, const EvalDetail& d, std::size_t iteration,
                 const TrainConfig& config) {
  EvalRecord e;
  e.iteration = iteration;
  e.train_accuracy = d.acc.train;
  e.val_accuracy = d.acc.val;
  e.test_accuracy = d.acc.test;
  if (!m.steps.empty()) {
    e.objective = m.steps.back().objective;
    e.marginal_violation = m.steps.back().marginal_violation;
    e.mu = m.steps.back().mu;
  }
  state.classifier = d.classifier;
  const bool first = m.evals.empty();
  m.evals.push_back(e);
  m.max_test_accuracy = first ? e.test_accuracy : std::max(m.max_test_accuracy, e.test_accuracy);
  if (first || e.val_accuracy > m.best_val_accuracy) {
    m.best_val_accuracy = e.val_accuracy;
    m.best_iteration = iteration;
    m.test_at_best_val = e.test_accuracy;
    state.best_val_accuracy = e.val_accuracy;
    state.best_iteration = iteration;
    state.best_checkpoint = checkpoint_json(state, config);
  }
}

}  // namespace

RunResult train(const Dataset& ds, const TrainConfig& config, const StepHook& hook) {
  ds.validate();
  config.validate();
  bounds_fracs(config, ds.k);

  RunResult r;
  RunMetrics& m = r.metrics;
  const bool labeled = uses_labels(ds, config);
  m.mode = labeled ? config.mode : Mode::kUnsupervised;
  m.test_max_is_optimistic = !labeled;

  TrainConfig run = config;
  TrainState& state = r.state;
  std::size_t iteration = 0;
  try {
    state = initial_state(ds, config);
    std::vector<std::size_t> lab;
    std::vector<std::size_t> unl;
    if (labeled) lab = ds.labeled_rows(Split::kTrain);
    if (config.mode != Mode::kSupervised) {
      unl = labeled ? ds.unlabeled_rows(Split::kTrain) : ds.rows(Split::kTrain);
    }
    BatchSampler sampler(lab, unl, derive_seed(config.seed, kStreamSampler));

    if (labeled) state = supervised_init(std::move(state), ds, run, sampler, &m, hook);
    {
      const EvalDetail d = evaluate_detail(state, ds, run);
      record_eval(state, m, d, 0, run);
      if (labeled) m.init_eval = m.evals.back();
    }

    std::size_t n_labeled = 0;
    if (labeled) {
      if (unl.empty()) {
        n_labeled = config.batch_size;
      } else {
        const double n_train = static_cast<double>(lab.size() + unl.size());
        const double frac = config.labeled_batch_fraction.value_or(
            std::min(1.0, 2.0 * static_cast<double>(lab.size()) / n_train));
        n_labeled = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(config.batch_size)));
        if (lab.size() >= 2) n_labeled = std::max<std::size_t>(n_labeled, 2);
        n_labeled = std::min(n_labeled, lab.size());
      }
    }

    const StepInput in{ds, run, labeled, Phase::kMain, run.ulr.learning_rate};
    ObjectiveMonitor monitor;
    for (std::size_t t = 1; t <= config.main_iters; ++t) {
      iteration = t;
      const auto batch = sampler.draw(config.batch_size, n_labeled);
      run_step(state, batch, t, in, &m, hook);
      monitor.observe(state.last_objective, t);
      if (labeled && !run.lambda_retune_grid.empty() && t % run.lambda_retune_every == 0) {
        double best = -1.0;
        double best_lambda = run.ulr.lambda;
        for (double l : run.lambda_retune_grid) {
          TrainConfig probe = run;
          probe.ulr.lambda = l;
          const double v = evaluate(state, ds, Split::kVal, probe);
          if (v > best) {
            best = v;
            best_lambda = l;
          }
        }
        run.ulr.lambda = best_lambda;
      }
      if (t % config.eval_every == 0) {
        record_eval(state, m, evaluate_detail(state, ds, run), t, run);
      }
    }

    const EvalDetail fin = evaluate_detail(state, ds, run);
    state.classifier = fin.classifier;
    const std::vector<int> pred = fin.classifier.predict(dataset_features(state.layer, ds, run.normalize));
    r.final_labels.labels = pred;
    r.final_labels.source.assign(ds.size(), LabelSource::kClassifier);
    const auto train_rows = ds.rows(Split::kTrain);
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      const std::size_t row = train_rows[i];
      r.final_labels.labels[row] = fin.train_labels[i];
      r.final_labels.source[row] =
          labeled && ds.labels[row] ? LabelSource::kGroundTruth : fin.unlabeled_source;
    }
  } catch (const TrainingAborted&) {
    throw;
  } catch (const Diverged& e) {
    m.aborted = true;
    m.abort_reason = e.what();
    throw TrainingAborted(e.what(), e.iteration(), m);
  } catch (const ScaleUndefined& e) {
    m.aborted = true;
    m.abort_reason = e.what();
    throw TrainingAborted(e.what(), iteration, m);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sweep

SweepGrids grids_from_json(std::string_view text) {
  const json j = parse_json(text, "grids");
  try {
    check_keys(j,
               {"format_version", "lambda", "labeled_learning_rate", "size_bounds", "learning_rate",
                "rho", "alpha"},
               "grids");
    SweepGrids g;
    auto opt = [&](const char* key, std::optional<std::vector<double>>& out) {
      if (j.contains(key)) out = j.at(key).get<std::vector<double>>();
    };
    opt("lambda", g.lambda);
    opt("labeled_learning_rate", g.labeled_learning_rate);
    opt("size_bounds", g.size_bounds);
    opt("learning_rate", g.learning_rate);
    opt("rho", g.rho);
    opt("alpha", g.alpha);
    return g;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("grids: ") + e.what());
  }
}

SweepResult sweep(const Dataset& ds, const SweepGrids& grids, const TrainConfig& config) {
  ds.validate();
  config.validate();
  const std::pair<const char*, const std::optional<std::vector<double>>*> all[] = {
      {"lambda", &grids.lambda},         {"labeled_learning_rate", &grids.labeled_learning_rate},
      {"size_bounds", &grids.size_bounds}, {"learning_rate", &grids.learning_rate},
      {"rho", &grids.rho},               {"alpha", &grids.alpha}};
  for (const auto& [name, grid] : all) {
    if (!*grid) continue;
    if ((*grid)->empty()) throw InvalidInput(std::string("sweep: grid '") + name + "' is empty");
    for (double v : **grid) {
      if (!std::isfinite(v) || v < 0.0) {
        throw InvalidInput(std::string("sweep: grid '") + name + "' has an invalid value");
      }
    }
  }
  if (grids.size_bounds) {
    for (double g : *grids.size_bounds) {
      if (g * ds.k > 1.0) throw InvalidInput("sweep: size bound above 1/k");
    }
  }

  const bool labeled = uses_labels(ds, config);
  if (labeled && ds.rows(Split::kVal).empty()) {
    throw InvalidInput("sweep: a validation split is required");
  }
  SweepResult res;
  res.best = config;

  auto score_run = [&](const TrainConfig& c) -> std::optional<double> {
    try {
      const RunResult r = train(ds, c);
      return labeled ? r.metrics.best_val_accuracy : r.metrics.max_test_accuracy;
    } catch (const Diverged&) {
      return std::nullopt;
    } catch (const ScaleUndefined&) {
      return std::nullopt;
    }
  };

  auto stage = [&](const char* name, const std::optional<std::vector<double>>& grid,
                   const std::function<TrainConfig(TrainConfig, double)>& apply,
                   const std::function<std::optional<double>(const TrainConfig&)>& score) {
    if (!grid) return;
    std::optional<double> best_value;
    double best_score = -1.0;
    for (double v : *grid) {
      const TrainConfig c = apply(res.best, v);
      std::optional<double> s;
      try {
        c.validate();
        s = score(c);
      } catch (const InvalidInput&) {
        s.reset();
      }
      const bool ok = s && std::isfinite(*s);
      res.records.push_back({name, v, ok ? *s : std::numeric_limits<double>::quiet_NaN(), !ok});
      if (ok && *s > best_score) {
        best_score = *s;
        best_value = v;
      }
    }
    if (labeled && best_value) res.best = apply(res.best, *best_value);
  };

  stage("lambda", grids.lambda,
        [](TrainConfig c, double v) {
          c.ulr.lambda = v;
          return c;
        },
        [&](const TrainConfig& c) -> std::optional<double> {
          try {
            const TrainState s = initial_state(ds, c);
            return evaluate(s, ds, Split::kVal, c);
          } catch (const ScaleUndefined&) {
            return std::nullopt;
          }
        });
  if (grids.lambda) res.best.lambda_retune_grid = *grids.lambda;

  if (labeled) {
    const double quarter_power = std::ldexp(1.0, -4);
    stage("labeled_learning_rate", grids.labeled_learning_rate,
          [](TrainConfig c, double v) {
            c.init_learning_rate = v;
            return c;
          },
          [&](const TrainConfig& c) {
            TrainConfig probe = c;
            probe.ulr.alpha = quarter_power;
            probe.ulr.rho = quarter_power;
            probe.main_iters = 0;
            return score_run(probe);
          });
  }
  stage("size_bounds", grids.size_bounds,
        [k = ds.k](TrainConfig c, double g) {
          c.balance.n_min_frac = g;
          c.balance.n_max_frac = 1.0 - (k - 1) * g;
          return c;
        },
        score_run);
  stage("learning_rate", grids.learning_rate,
        [](TrainConfig c, double v) {
          c.ulr.learning_rate = v;
          return c;
        },
        score_run);
  stage("rho", grids.rho,
        [](TrainConfig c, double v) {
          c.ulr.rho = v;
          return c;
        },
        score_run);
  stage("alpha", grids.alpha,
        [](TrainConfig c, double v) {
          c.ulr.alpha = v;
          return c;
        },
        score_run);

  res.best.lambda_retune_grid.clear();
  if (!labeled) res.best = config;
  return res;
}

}  // namespace xsdc
