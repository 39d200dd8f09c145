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
#include "xsdc/data_io.hpp"
#include "xsdc/errors.hpp"
#include "xsdc/trainer.hpp"

using namespace xsdc;

namespace {

Dataset small_blobs(double label_fraction, std::uint64_t seed = 1) {
  return standardize(make_blobs(150, 4, 3, 5.0, label_fraction, seed));
}

TrainConfig small_config() {
  TrainConfig c;
  c.supervised_init_iters = 10;
  c.main_iters = 20;
  c.eval_every = 5;
  c.batch_size = 24;
  c.filters = 8;
  c.ulr.lambda = 1e-2;
  c.ulr.learning_rate = 1.0;
  c.init_learning_rate = 1.0;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("config json round trip") {
  TrainConfig c = small_config();
  c.balance.mu = 0.25;
  c.balance.n_min_frac = 0.2;
  c.balance.n_max_frac = 0.5;
  c.labeled_batch_fraction = 0.5;
  c.constraints = {{1, 4, 0.0}, {2, 3, 1.0}};
  c.mode = Mode::kUnsupervised;
  const std::string text = config_to_json(c);
  const TrainConfig back = config_from_json(text);
  CHECK(config_to_json(back) == text);
  CHECK(back.balance.mu == 0.25);
  CHECK(back.constraints == c.constraints);
  CHECK(back.mode == Mode::kUnsupervised);

  CHECK_THROWS_AS(config_from_json(R"({"bogus": 1})"), InvalidInput);
  CHECK_THROWS_AS(config_from_json("{"), InvalidInput);
  CHECK(config_from_json(R"({"balance": {"mu": "auto"}})").balance.mu == std::nullopt);

  TrainConfig bad = small_config();
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = small_config();
  bad.balance.n_min_frac = 0.6;
  bad.balance.n_max_frac = 0.4;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("derive_seed") {
  CHECK(derive_seed(5, 1) == derive_seed(5, 1));
  CHECK(derive_seed(5, 1) != derive_seed(5, 2));
  CHECK(derive_seed(5, 1) != derive_seed(6, 1));
}

TEST_CASE("BatchSampler") {
  std::vector<std::size_t> lab = {0, 1, 2, 3, 4};
  std::vector<std::size_t> unl;
  for (std::size_t i = 10; i < 33; ++i) unl.push_back(i);
  BatchSampler a(lab, unl, 7);
  BatchSampler b(lab, unl, 7);
  std::multiset<std::size_t> seen;
  for (int t = 0; t < 23; ++t) {
    const auto batch = a.draw(8, 2);
    CHECK(batch == b.draw(8, 2));
    CHECK(batch.size() == 8);
    std::set<std::size_t> uniq(batch.begin(), batch.end());
    CHECK(uniq.size() == batch.size());
    CHECK(std::count_if(batch.begin(), batch.end(), [](std::size_t i) { return i < 10; }) == 2);
    for (std::size_t i : batch) {
      if (i >= 10) seen.insert(i);
    }
  }
  // 23 batches of 6 unlabeled rows are exactly 6 epochs.
  for (std::size_t i = 10; i < 33; ++i) CHECK(seen.count(i) == 6);
  CHECK(a.draw(8, 9).size() == 8);
}

TEST_CASE("supervised_init") {
  const Dataset ds = small_blobs(0.1);
  TrainConfig c = small_config();
  SUBCASE("zero iterations leave the state unchanged") {
    c.supervised_init_iters = 0;
    const TrainState s0 = initial_state(ds, c);
    BatchSampler sampler(ds.labeled_rows(Split::kTrain), {}, 1);
    const TrainState s1 = supervised_init(s0, ds, c, sampler);
    CHECK(s1.layer.landmarks == s0.layer.landmarks);
    CHECK(s1.iteration == 0);
  }
  SUBCASE("beats chance on separable blobs") {
    c.supervised_init_iters = 30;
    BatchSampler sampler(ds.labeled_rows(Split::kTrain), {}, 1);
    const TrainState s = supervised_init(initial_state(ds, c), ds, c, sampler);
    CHECK(s.iteration == 30);
    CHECK(evaluate(s, ds, Split::kVal, c) > 1.0 / 3.0);
  }
}

TEST_CASE("train is deterministic and tracks the best checkpoint") {
  const Dataset ds = small_blobs(0.1);
  const TrainConfig c = small_config();
  const RunResult a = train(ds, c);
  const RunResult b = train(ds, c);
  CHECK(a.state.layer.landmarks == b.state.layer.landmarks);
  CHECK(a.metrics.to_csv() == b.metrics.to_csv());
  CHECK(a.final_labels.labels == b.final_labels.labels);

  CHECK(a.metrics.evals.size() == 1 + c.main_iters / c.eval_every);
  CHECK(a.metrics.init_eval.has_value());
  CHECK(a.metrics.steps.size() == c.supervised_init_iters + c.main_iters);
  double best = -1.0;
  for (const auto& e : a.metrics.evals) {
    best = std::max(best, e.val_accuracy);
    CHECK((e.val_accuracy >= 0.0 && e.val_accuracy <= 1.0));
  }
  CHECK(a.metrics.best_val_accuracy == best);
  CHECK_FALSE(a.state.best_checkpoint.empty());
  CHECK(a.metrics.max_known_violation <= 1e-6);

  for (std::size_t i : ds.labeled_rows(Split::kTrain)) {
    CHECK(a.final_labels.labels[i] == *ds.labels[i]);
    CHECK(a.final_labels.source[i] == LabelSource::kGroundTruth);
  }
  for (std::size_t i : ds.rows(Split::kTest)) {
    CHECK(a.final_labels.source[i] == LabelSource::kClassifier);
  }

  const std::string csv = a.metrics.to_csv();
  CHECK(csv.rfind("iteration,split,accuracy,objective,marginal_violation,mu\n", 0) == 0);

  TrainConfig other = c;
  other.seed = 4;
  CHECK(train(ds, other).state.layer.landmarks != a.state.layer.landmarks);
}

TEST_CASE("fully labeled data reduces to supervised training") {
  const Dataset ds = small_blobs(1.0);
  TrainConfig c = small_config();
  const RunResult r = train(ds, c);
  for (const auto& s : r.metrics.steps) CHECK_FALSE(s.balanced);

  // Reference loop with M = Y Y^T on the same batches.
  TrainState s = initial_state(ds, c);
  BatchSampler sampler(ds.labeled_rows(Split::kTrain), {}, derive_seed(c.seed, kStreamSampler));
  auto step = [&](const std::vector<std::size_t>& batch, double lr) {
    std::vector<int> y;
    for (std::size_t i : batch) y.push_back(*ds.labels[i]);
    const Matrix Y = one_hot(y, ds.k);
    UlrConfig u = c.ulr;
    u.learning_rate = lr;
    s = ulr_step(std::move(s), gather_rows(ds.X, batch), Y * Y.transpose(), u, c.normalize);
  };
  for (std::size_t t = 0; t < c.supervised_init_iters; ++t) {
    step(sampler.draw_labeled(c.batch_size), c.init_learning_rate);
  }
  for (std::size_t t = 0; t < c.main_iters; ++t) {
    step(sampler.draw_labeled(c.batch_size), c.ulr.learning_rate);
  }
  CHECK(s.layer.landmarks == r.state.layer.landmarks);
}

TEST_CASE("without labels training follows the unsupervised path") {
  const Dataset ds = small_blobs(0.0);
  TrainConfig c = small_config();
  c.main_iters = 10;
  const RunResult r = train(ds, c);
  CHECK(r.metrics.mode == Mode::kUnsupervised);
  CHECK_FALSE(r.metrics.init_eval.has_value());
  CHECK(r.metrics.test_max_is_optimistic);
  CHECK(r.metrics.steps.size() == c.main_iters);
  for (std::size_t i : ds.rows(Split::kTrain)) {
    CHECK(r.final_labels.source[i] == LabelSource::kSpectral);
  }
}

TEST_CASE("constraints bind inside every batch") {
  const Dataset ds = small_blobs(0.1);
  TrainConfig c = small_config();
  const auto train_rows = ds.rows(Split::kTrain);
  for (std::size_t a = 0; a + 1 < 30; a += 2) {
    c.constraints.push_back({train_rows[a], train_rows[a + 1], 0.0});
  }
  double worst = 0.0;
  std::size_t bound = 0;
  train(ds, c, [&](const StepRecord& rec) {
    if (!rec.balanced) return;
    for (const auto& e : *rec.known) {
      worst = std::max(worst, std::abs((*rec.M)(static_cast<Eigen::Index>(e.i),
                                                 static_cast<Eigen::Index>(e.j)) - e.value));
      if (e.value == 0.0) ++bound;
    }
  });
  CHECK(bound > 0);
  CHECK(worst <= 1e-6);
}

TEST_CASE("checkpoint round trip") {
  const Dataset ds = small_blobs(0.1);
  const TrainConfig c = small_config();
  const RunResult r = train(ds, c);
  const Checkpoint cp = load_checkpoint(checkpoint_json(r.state, c));
  CHECK(cp.layer.landmarks == r.state.layer.landmarks);
  CHECK(cp.layer.sigma == r.state.layer.sigma);
  REQUIRE(cp.classifier.has_value());
  CHECK(cp.classifier->weights == r.state.classifier->weights);
  CHECK(cp.classifier->bias == r.state.classifier->bias);
  CHECK(config_to_json(config_from_json(cp.config_json)) == config_to_json(c));
  const Checkpoint best = load_checkpoint(r.state.best_checkpoint);
  CHECK(best.layer.landmarks.rows() == 4);
  CHECK_THROWS_AS(load_checkpoint(R"({"format_version": 2})"), InvalidInput);
}

TEST_CASE("evaluate") {
  const Dataset ds = small_blobs(0.1);
  const TrainConfig c = small_config();
  const TrainState s = initial_state(ds, c);
  const double a = evaluate(s, ds, Split::kTest, c);
  CHECK(a == evaluate(s, ds, Split::kTest, c));
  CHECK((a >= 0.0 && a <= 1.0));

  CHECK(accuracy(ds.truth, ds.truth) == 1.0);
  const auto random = xsdc::testing::random_labels(4000, 4, 3);
  const auto truth = xsdc::testing::random_labels(4000, 4, 4);
  CHECK(std::abs(accuracy(random, truth) - 0.25) < 0.03);
}

TEST_CASE("divergence aborts with partial metrics") {
  const Dataset ds = small_blobs(0.1);
  TrainConfig c = small_config();
  c.ulr.learning_rate = 1e12;
  c.init_learning_rate = 1e12;
  try {
    train(ds, c);
    FAIL("no throw");
  } catch (const TrainingAborted& e) {
    CHECK(e.metrics().aborted);
    CHECK_FALSE(e.metrics().abort_reason.empty());
  }
}

TEST_CASE("sweep") {
  const Dataset ds = small_blobs(0.1);
  TrainConfig c = small_config();
  c.supervised_init_iters = 5;
  c.main_iters = 5;

  SUBCASE("single-point grids return that configuration") {
    SweepGrids g;
    g.lambda = std::vector<double>{0.125};
    g.learning_rate = std::vector<double>{0.5};
    g.rho = std::vector<double>{0.0};
    const SweepResult r = sweep(ds, g, c);
    CHECK(r.best.ulr.lambda == 0.125);
    CHECK(r.best.ulr.learning_rate == 0.5);
    CHECK(r.best.lambda_retune_grid.empty());
    CHECK(r.records.size() == 3);
  }
  SUBCASE("diverging learning rate is skipped") {
    SweepGrids g;
    g.learning_rate = std::vector<double>{1e12, 0.5};
    const SweepResult r = sweep(ds, g, c);
    CHECK(r.best.ulr.learning_rate == 0.5);
    CHECK(r.records[0].diverged);
    CHECK_FALSE(r.records[1].diverged);
  }
  SUBCASE("lambda stage matches independent reruns") {
    const std::vector<double> grid = {1e-4, 1e-2, 1.0};
    SweepGrids g;
    g.lambda = grid;
    const SweepResult r = sweep(ds, g, c);
    double best = -1.0, best_lambda = 0.0;
    for (double l : grid) {
      TrainConfig probe = c;
      probe.ulr.lambda = l;
      const double v = evaluate(initial_state(ds, probe), ds, Split::kVal, probe);
      if (v > best) {
        best = v;
        best_lambda = l;
      }
    }
    CHECK(r.best.ulr.lambda == best_lambda);
  }
  SUBCASE("empty grid") {
    SweepGrids g;
    g.alpha = std::vector<double>{};
    CHECK_THROWS_AS(sweep(ds, g, c), InvalidInput);
  }
  SUBCASE("grids from json") {
    const SweepGrids g = grids_from_json(R"({"lambda": [0.5, 1.0], "rho": [0.0]})");
    CHECK(g.lambda->size() == 2);
    CHECK_FALSE(g.alpha.has_value());
    CHECK_THROWS_AS(grids_from_json(R"({"beta": [1]})"), InvalidInput);
  }
}
