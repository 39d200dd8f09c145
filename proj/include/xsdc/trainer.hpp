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

#ifndef XSDC_TRAINER_HPP_
#define XSDC_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "xsdc/balancing.hpp"
#include "xsdc/data_io.hpp"
#include "xsdc/errors.hpp"
#include "xsdc/labeling.hpp"
#include "xsdc/train_state.hpp"
#include "xsdc/ulr.hpp"

namespace xsdc {

// semi: labeled and unlabeled rows (falls back to unsupervised without labels).
// unsupervised: labels ignored. supervised: unlabeled rows ignored in training.
enum class Mode { kSemi, kUnsupervised, kSupervised };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);

struct BalanceDefaults {
  int iters = 10;
  std::optional<double> mu;          // unset: median |A| per batch
  std::optional<double> n_min_frac;  // unset: 1/k
  std::optional<double> n_max_frac;  // unset: 1/k
  int max_doublings = 20;
};

struct TrainConfig {
  std::size_t supervised_init_iters = 100;
  std::size_t main_iters = 400;
  std::size_t eval_every = 10;
  std::size_t batch_size = 64;
  // Unset: min(1, 2 |S| / n_train), raised so a batch holds two labeled rows.
  std::optional<double> labeled_batch_fraction;
  UlrConfig ulr;                     // learning_rate is the main-phase rate
  double init_learning_rate = 1e-2;
  BalanceDefaults balance;
  std::uint64_t seed = 0;
  // Global must-link (value 1) / must-not-link (value 0) pairs, dataset rows.
  std::vector<KnownEntry> constraints;
  Mode mode = Mode::kSemi;
  Eigen::Index filters = 32;
  double epsilon = 1e-3;
  int newton_iters = 20;
  bool normalize = true;
  int nn_neighbors = 1;
  // Classifier lambda re-chosen on validation accuracy every
  // lambda_retune_every main iterations. Set by sweep() only.
  std::vector<double> lambda_retune_grid;
  std::size_t lambda_retune_every = 100;

  void validate() const;
};

// Strict JSON round-trip; unknown keys throw InvalidInput.
std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(std::string_view json);

// Independent RNG stream `stream` of a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum SeedStream : std::uint64_t {
  kStreamLandmarks = 1,
  kStreamSampler = 2,
  kStreamEvaluation = 3,
};

// Epoch-shuffled draws without replacement from a labeled and an unlabeled
// pool. Rows left over at the end of an epoch are taken first and moved to the
// back of the next epoch, so a batch never repeats a row.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> labeled, std::vector<std::size_t> unlabeled,
               std::uint64_t seed);

  // n_labeled rows from the labeled pool, then batch_size - n_labeled
  // unlabeled rows. Counts are capped by the pool sizes.
  std::vector<std::size_t> draw(std::size_t batch_size, std::size_t n_labeled);
  std::vector<std::size_t> draw_labeled(std::size_t count);
  std::vector<std::size_t> draw_unlabeled(std::size_t count);

  std::size_t labeled_size() const { return labeled_.order.size(); }
  std::size_t unlabeled_size() const { return unlabeled_.order.size(); }

 private:
  struct Pool {
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
  };
  std::vector<std::size_t> take(Pool& pool, std::size_t count);

  Pool labeled_;
  Pool unlabeled_;
  std::mt19937_64 rng_;
};

enum class Phase { kInit, kMain };

// Passed to the step hook after every ULR step.
struct StepRecord {
  std::size_t iteration = 0;  // 1-based within the phase
  Phase phase = Phase::kInit;
  const std::vector<std::size_t>* batch = nullptr;
  const Matrix* M = nullptr;
  const std::vector<KnownEntry>* known = nullptr;  // batch-local indices
  bool balanced = false;
  double mu = 0.0;
  double objective = 0.0;
  const NystromLayer* layer = nullptr;  // after the step
};

using StepHook = std::function<void(const StepRecord&)>;

struct StepTrace {
  std::size_t iteration = 0;
  Phase phase = Phase::kInit;
  double objective = 0.0;
  bool balanced = false;
  double mu = 0.0;
  int doublings = 0;
  double marginal_violation = 0.0;
  double known_violation = 0.0;
};

struct EvalRecord {
  std::size_t iteration = 0;  // main-phase iteration; 0 is right after init
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  double objective = 0.0;
  double marginal_violation = 0.0;
  double mu = 0.0;
};

struct RunMetrics {
  Mode mode = Mode::kSemi;
  std::vector<EvalRecord> evals;
  std::vector<StepTrace> steps;
  // Evaluation right after supervised initialization (supervised baseline).
  std::optional<EvalRecord> init_eval;
  double best_val_accuracy = 0.0;
  std::size_t best_iteration = 0;
  double test_at_best_val = 0.0;
  double max_test_accuracy = 0.0;
  // Unsupervised runs report the maximum test accuracy over the trajectory,
  // which selects on the test split.
  bool test_max_is_optimistic = false;
  double max_known_violation = 0.0;
  bool aborted = false;
  std::string abort_reason;

  // iteration,split,accuracy,objective,marginal_violation,mu
  std::string to_csv() const;
};

struct FinalLabels {
  std::vector<int> labels;
  std::vector<LabelSource> source;
};

struct RunResult {
  TrainState state;
  RunMetrics metrics;
  FinalLabels final_labels;
};

// Repeated balancing divergence or a runaway objective. Carries the metrics
// gathered so far.
class TrainingAborted : public Diverged {
 public:
  TrainingAborted(const std::string& what, std::size_t iteration, RunMetrics partial)
      : Diverged(what, iteration), metrics_(std::move(partial)) {}
  const RunMetrics& metrics() const { return metrics_; }

 private:
  RunMetrics metrics_;
};

struct Accuracies {
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;
};

// Features of every row under the current layer.
Matrix dataset_features(const NystromLayer& layer, const Dataset& ds, bool normalize);

// Semi-supervised: 1-NN label propagation over the train rows, ridge
// classifier on them, accuracy per split against ground truth. Unsupervised:
// balanced M over the train rows, spectral clustering, classifier on the
// cluster labels, Hungarian-matched accuracy per split. Rows with unknown
// truth are skipped; an empty split scores 0.
Accuracies evaluate_all(const TrainState& state, const Dataset& ds, const TrainConfig& config);
double evaluate(const TrainState& state, const Dataset& ds, Split split, const TrainConfig& config);

// True when the run uses labels (semi or supervised mode with labeled train
// rows).
bool uses_labels(const Dataset& ds, const TrainConfig& config);

// Landmarks drawn from the training rows under the run seed.
TrainState initial_state(const Dataset& ds, const TrainConfig& config);

// supervised_init_iters ULR steps on labeled batches with M = Y Y^T.
// Unchanged state without labeled train rows.
TrainState supervised_init(TrainState state, const Dataset& ds, const TrainConfig& config,
                           BatchSampler& sampler, RunMetrics* metrics = nullptr,
                           const StepHook& hook = {});

RunResult train(const Dataset& ds, const TrainConfig& config, const StepHook& hook = {});

// Checkpoint JSON: format_version, d, p, sigma, epsilon, newton_iters,
// V (row-major), W (row-major), b, config.
std::string checkpoint_json(const TrainState& state, const TrainConfig& config);

struct Checkpoint {
  NystromLayer layer;
  std::optional<RidgeSolution> classifier;
  std::string config_json;
};

Checkpoint load_checkpoint(std::string_view json);

struct SweepGrids {
  std::optional<std::vector<double>> lambda;
  std::optional<std::vector<double>> labeled_learning_rate;
  // n_min_frac values g; n_max_frac becomes 1 - (k - 1) g.
  std::optional<std::vector<double>> size_bounds;
  std::optional<std::vector<double>> learning_rate;
  std::optional<std::vector<double>> rho;
  std::optional<std::vector<double>> alpha;
};

SweepGrids grids_from_json(std::string_view json);

struct SweepRecord {
  std::string parameter;
  double value = 0.0;
  double val_accuracy = 0.0;
  bool diverged = false;
};

struct SweepResult {
  TrainConfig best;
  std::vector<SweepRecord> records;

  // parameter,value,val_accuracy,diverged
  std::string to_csv() const;
};

// Sequential tuning in the order lambda (untrained network), labeled learning
// rate (init phase only, alpha = rho = 2^-4), size bounds, learning rate, rho,
// alpha. Each stage keeps the best validation accuracy, first grid value on
// ties; diverged points are skipped. Absent grids skip their stage, empty
// grids throw InvalidInput. Without labels the configuration is returned
// unchanged with the trajectories recorded.
SweepResult sweep(const Dataset& ds, const SweepGrids& grids, const TrainConfig& config);

}  // namespace xsdc

#endif  // XSDC_TRAINER_HPP_
