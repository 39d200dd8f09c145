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

// Acceptance suite. One PASS/FAIL line per criterion; exit status 1 when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "xsdc/balancing.hpp"
#include "xsdc/data_io.hpp"
#include "xsdc/diagnostics.hpp"
#include "xsdc/labeling.hpp"
#include "xsdc/linalg.hpp"
#include "xsdc/trainer.hpp"
#include "xsdc/ulr.hpp"

using namespace xsdc;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Every label appears at least once.
std::vector<int> covering_labels(int n, int k, std::mt19937_64& rng) {
  std::vector<int> y(static_cast<std::size_t>(n));
  std::uniform_int_distribution<int> pick(0, k - 1);
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i < k ? i : pick(rng);
  std::shuffle(y.begin(), y.end(), rng);
  return y;
}

Outcome duality_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dn(2, 50), dd(1, 12), dk(1, 5);
  std::uniform_real_distribution<double> loglam(std::log(1e-4), std::log(10.0));
  double worst = 0.0;
  double single = 0.0;  // k = 1: centered Y vanishes, both sides are zero
  int singles = 0;
  for (int t = 0; t < 200; ++t) {
    const int k = dk(rng);
    const int n = std::max(dn(rng), k);
    const Matrix Phi = gaussian(n, dd(rng), rng);
    const Matrix Y = one_hot(covering_labels(n, k, rng), k);
    const double lam = std::exp(loglam(rng));
    const double ridge = ridge_solve(Phi, Y, lam).objective;
    const double dual = lam * (Y * Y.transpose() * compute_A(Phi, lam)).trace();
    if (k == 1) {
      single = std::max({single, std::abs(ridge), std::abs(dual)});
      ++singles;
    } else {
      worst = std::max(worst, std::abs(ridge - dual) / ridge);
    }
  }
  return {worst <= 1e-8 && single <= 1e-8,
          fmt("200 instances, max relative gap %.2e (tol 1e-8); %d with k = 1, max |value| %.1e",
              worst, singles, single)};
}

Outcome gradient_suite() {
  double phi_level = 0.0;
  double v_level = 0.0;
  int failed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& r : run_gradcheck(seed)) {
      const bool phi = r.tolerance <= 1e-6;
      (phi ? phi_level : v_level) = std::max(phi ? phi_level : v_level, r.max_rel_error);
      if (r.max_rel_error > (phi ? 1e-6 : 1e-4)) ++failed;
    }
  }
  return {failed == 0, fmt("20 seeds, Phi-level max %.2e (tol 1e-6), V-level max %.2e (tol 1e-4)",
                           phi_level, v_level)};
}

Outcome lipschitz() {
  const double B = 2.0;
  const int n = 20, n_max = 8;
  const double lam = 0.1;
  const SmoothnessReport r = run_smoothness(B, n, n_max, lam, 1000, 17);

  const LipschitzEstimates v = lipschitz_bounds(B, n, n_max, static_cast<double>(n_max) / n);
  const double value_gap = std::abs(v.L_f - v.L_r) / v.L_r;
  const LipschitzEstimates g0 = lipschitz_bounds(B, n, n_max, 1.0);
  const LipschitzEstimates g =
      lipschitz_bounds(B, n, n_max, g0.lambda_gradient_crossover);
  const double grad_gap = std::abs(g.ell_f - g.ell_r) / g.ell_r;
  const bool ok = r.passed() && value_gap <= 1e-10 && grad_gap <= 1e-10 &&
                  std::abs(v.lambda_value_crossover - static_cast<double>(n_max) / n) <= 1e-10;
  return {ok, fmt("1000 draws, |grad F_f| %.3g/%.3g, |grad F_r| %.3g/%.3g, ratios %.3g/%.3g and "
                  "%.3g/%.3g; crossover gaps %.1e, %.1e",
                  r.max_grad_f, r.bounds.L_f, r.max_grad_r, r.bounds.L_r, r.max_ratio_f,
                  r.bounds.ell_f, r.max_ratio_r, r.bounds.ell_r, value_gap, grad_gap)};
}

Outcome balancing_marginals() {
  std::mt19937_64 rng(64);
  const Eigen::Index n = 64;
  const int k = 4;
  double dev = 0.0, known = 0.0, rise = 0.0;
  int rounds = 0;
  for (int t = 0; t < 10; ++t) {
    const Matrix G = gaussian(n, n, rng);
    BalancingProblem p;
    p.A = 0.5 * (G + G.transpose());
    p.known = close_known_set({}, static_cast<std::size_t>(n));
    p.n_min = p.n_max = static_cast<double>(n) / k;
    p.mu = default_mu(p.A).mu;
    p.k = k;
    p.iters = 50;
    const EquivalenceMatrix r = balance(p);
    const double target = static_cast<double>(n) / k;
    dev = std::max({dev, (r.M.rowwise().sum().array() - target).abs().maxCoeff(),
                    (r.M.colwise().sum().array() - target).abs().maxCoeff()});
    known = std::max(known, r.known_violation);
    rounds = std::max(rounds, r.rounds);
    for (std::size_t s = 1; s < r.dual_trajectory.size(); ++s) {
      rise = std::max(rise, r.dual_trajectory[s] - r.dual_trajectory[s - 1]);
    }
  }
  return {dev <= 1e-6 && known <= 1e-6 && rise <= 1e-10 && rounds <= 50,
          fmt("10 instances n=64, %d rounds, marginal deviation %.2e, known %.2e, max dual rise "
              "%.2e",
              rounds, dev, known, rise)};
}

Outcome brute_force_proximity() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.3);
  int recovered = 0, bounded = 0;
  double worst_slack = -1e300;
  double worst_units = 0.0;
  for (int t = 0; t < 20; ++t) {
    // Two separated groups of four rows in a random order.
    std::vector<int> group = {0, 0, 0, 0, 1, 1, 1, 1};
    std::shuffle(group.begin(), group.end(), rng);
    Matrix Phi(8, 2);
    for (Eigen::Index i = 0; i < 8; ++i) {
      Phi(i, 0) = (group[static_cast<std::size_t>(i)] == 0 ? -3.0 : 3.0) + g(rng);
      Phi(i, 1) = g(rng);
    }
    const Matrix A = compute_A(Phi, 0.05);
    const ExactAssignment exact = brute_force_assign(A, 2, {}, 4.0, 4.0);
    BalancingProblem p;
    p.A = A;
    p.known = close_known_set({}, 8);
    p.n_min = p.n_max = 4.0;
    p.mu = default_mu(A).mu;
    p.k = 2;
    p.iters = 50;
    const BalanceOutcome b = balance_with_doubling(p);
    const auto labels = spectral_cluster(b.result.M, 2, 1).labels;
    if (hungarian_match(labels, exact.labels, 2).accuracy == 1.0) ++recovered;
    const double gap = (b.result.M * A).trace() - exact.objective;
    const double slack = gap - b.mu * 8 * std::log(2.0);
    worst_slack = std::max(worst_slack, slack);
    worst_units = std::max(worst_units, gap / (b.mu * std::log(2.0)));
    if (slack <= 0.0) ++bounded;
  }
  return {recovered >= 18 && bounded == 20,
          fmt("spectral recovers optimum %d/20 (need 18), tr(MA) <= opt + mu n log k holds %d/20 "
              "(max excess %.3g; max gap %.2f mu log k against n = 8, n^2/k = 32)",
              recovered, bounded, worst_slack, worst_units)};
}

Outcome sinkhorn_radius() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  int below = 0;
  double lo = 1e300, hi = 0.0;
  for (int t = 0; t < 20; ++t) {
    Matrix Q(6, 6);
    for (Eigen::Index i = 0; i < Q.size(); ++i) Q.data()[i] = u(rng);
    Vector alpha(6), beta(6);
    for (Eigen::Index i = 0; i < 6; ++i) {
      alpha(i) = u(rng);
      beta(i) = u(rng);
    }
    beta *= alpha.sum() / beta.sum();
    const Matrix P = sinkhorn_fixed_point(Q, alpha, beta);
    const double rho = sinkhorn_jacobian(P, alpha, beta).spectral_radius;
    lo = std::min(lo, rho);
    hi = std::max(hi, rho);
    if (rho < 1.0) ++below;
  }
  return {below == 20,
          fmt("spectral radius < 1 in %d/20 (range %.12f to %.12f)", below, lo, hi)};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

Outcome end_to_end() {
  std::vector<double> base, xsdc, unsup;
  for (int s = 0; s < 10; ++s) {
    Dataset ds = make_blobs(400, 10, 4, 4.0, 1.0, 100 + s);
    ds = standardize(keep_train_labels(ds, 20, 100 + s));
    TrainConfig c;
    c.seed = static_cast<std::uint64_t>(s);
    c.ulr.lambda = 1e-2;
    c.init_learning_rate = 100.0;
    c.ulr.learning_rate = 100.0;
    const RunResult r = train(ds, c);
    base.push_back(r.metrics.init_eval->test_accuracy);
    xsdc.push_back(r.metrics.test_at_best_val);
  }
  for (int s = 0; s < 10; ++s) {
    const Dataset ds = standardize(make_blobs(400, 10, 4, 10.0, 0.0, 100 + s));
    TrainConfig c;
    c.seed = static_cast<std::uint64_t>(s);
    c.mode = Mode::kUnsupervised;
    c.ulr.lambda = 1e-2;
    c.ulr.learning_rate = 10.0;
    const RunResult r = train(ds, c);
    unsup.push_back(r.metrics.evals.back().test_accuracy);
  }
  const double mb = mean(base), mx = mean(xsdc), mu = mean(unsup);
  return {mb >= 0.75 && mb <= 0.90 && mx >= mb && mu >= 0.90,
          fmt("separation 4, 20 labels: baseline %.4f (window 0.75-0.90), XSDC %.4f; "
              "unsupervised separation 10: %.4f (need 0.90)",
              mb, mx, mu)};
}

Outcome constraints_benefit() {
  std::vector<double> plain, constrained;
  double worst = 0.0;
  std::size_t checked = 0;
  for (int s = 0; s < 10; ++s) {
    // Clusters 0 and 1 overlap along the first axis; cluster 2 is far away.
    Matrix C = Matrix::Zero(3, 10);
    C(1, 0) = 5.0;
    C(2, 1) = 8.0;
    const Dataset ds = standardize(make_blobs_from_centers(400, C, 1.0, 200 + s));
    TrainConfig c;
    c.seed = static_cast<std::uint64_t>(s);
    c.mode = Mode::kUnsupervised;
    c.ulr.lambda = 1e-2;
    c.ulr.learning_rate = 10.0;
    plain.push_back(train(ds, c).metrics.evals.back().test_accuracy);

    std::vector<std::size_t> zero, one;
    for (std::size_t i : ds.rows(Split::kTrain)) {
      if (ds.truth[i] == 0) zero.push_back(i);
      if (ds.truth[i] == 1) one.push_back(i);
    }
    for (std::size_t a : zero) {
      for (std::size_t b : one) c.constraints.push_back({a, b, 0.0});
    }
    const RunResult r = train(ds, c, [&](const StepRecord& rec) {
      if (!rec.balanced) return;
      for (const auto& e : *rec.known) {
        const double m =
            (*rec.M)(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j));
        worst = std::max(worst, std::abs(m - e.value));
        ++checked;
      }
    });
    constrained.push_back(r.metrics.evals.back().test_accuracy);
  }
  const double a = mean(plain), b = mean(constrained);
  return {b >= a && worst <= 1e-6 && checked > 0,
          fmt("unconstrained %.4f, must-not-link %.4f; %zu constrained entries, max deviation "
              "%.2e",
              a, b, checked, worst)};
}

Outcome regime_reduction() {
  std::size_t steps = 0;
  bool identical = true;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset ds = standardize(make_blobs(150, 4, 3, 5.0, 1.0, seed));
    TrainConfig c;
    c.seed = seed;
    c.supervised_init_iters = 20;
    c.main_iters = 40;
    c.eval_every = 20;
    c.batch_size = 24;
    c.filters = 8;
    c.ulr.lambda = 1e-2;
    c.init_learning_rate = 1.0;
    c.ulr.learning_rate = 1.0;
    std::vector<Matrix> trajectory;
    train(ds, c, [&](const StepRecord& rec) {
      if (rec.balanced) identical = false;
      trajectory.push_back(rec.layer->landmarks);
    });

    TrainState s = initial_state(ds, c);
    BatchSampler sampler(ds.labeled_rows(Split::kTrain), {}, derive_seed(c.seed, kStreamSampler));
    std::size_t t = 0;
    auto step = [&](double lr) {
      const auto batch = sampler.draw_labeled(c.batch_size);
      std::vector<int> y;
      for (std::size_t i : batch) y.push_back(*ds.labels[i]);
      const Matrix Y = one_hot(y, ds.k);
      UlrConfig u = c.ulr;
      u.learning_rate = lr;
      s = ulr_step(std::move(s), gather_rows(ds.X, batch), Y * Y.transpose(), u, c.normalize);
      if (t >= trajectory.size() || !(s.layer.landmarks == trajectory[t])) identical = false;
      ++t;
    };
    for (std::size_t i = 0; i < c.supervised_init_iters; ++i) step(c.init_learning_rate);
    for (std::size_t i = 0; i < c.main_iters; ++i) step(c.ulr.learning_rate);
    if (t != trajectory.size()) identical = false;
    steps += t;
  }
  return {identical, fmt("3 seeds, %zu steps compared bitwise: %s", steps,
                         identical ? "identical" : "mismatch")};
}

Outcome imbalance_handling() {
  std::vector<double> base, xsdc;
  for (int s = 0; s < 10; ++s) {
    Matrix C = Matrix::Zero(2, 10);
    C(1, 0) = 4.0;
    Dataset ds = make_blobs_from_centers(500, C, 1.0, 300 + s);
    ds = keep_train_labels(ds, 20, 300 + s);
    ds = standardize(imbalance(ds, {0.8, 0.2}, 300 + s));
    TrainConfig c;
    c.seed = static_cast<std::uint64_t>(s);
    c.filters = 16;
    c.ulr.lambda = 1e-2;
    c.init_learning_rate = 100.0;
    c.ulr.learning_rate = 100.0;
    c.balance.n_min_frac = 0.2;
    c.balance.n_max_frac = 0.8;
    TrainConfig supervised = c;
    supervised.mode = Mode::kSupervised;
    base.push_back(train(ds, supervised).metrics.test_at_best_val);
    xsdc.push_back(train(ds, c).metrics.test_at_best_val);
  }
  const double a = mean(base), b = mean(xsdc);
  return {b >= a, fmt("80/20 unlabeled imbalance: labeled-only %.4f, XSDC %.4f", a, b)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int a = 1; a < argc; ++a) only.push_back(std::atoi(argv[a]));
  const std::vector<Criterion> criteria = {
      {1, "duality oracle", 10.0, duality_oracle},
      {2, "gradient suite", 60.0, gradient_suite},
      {3, "Lipschitz bounds", 60.0, lipschitz},
      {4, "balancing marginals", 5.0, balancing_marginals},
      {5, "brute-force proximity", 30.0, brute_force_proximity},
      {6, "Sinkhorn Jacobian", 10.0, sinkhorn_radius},
      {7, "end-to-end XSDC", 300.0, end_to_end},
      {8, "constraints benefit", 0.0, constraints_benefit},
      {9, "regime reduction", 0.0, regime_reduction},
      {10, "imbalance handling", 0.0, imbalance_handling},
  };
  int failures = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt("%.1fs", secs);
    if (c.budget_s > 0.0) {
      timing += fmt(" of %.0fs", c.budget_s);
      if (secs >= c.budget_s) {
        o.passed = false;
        o.detail += "; over time budget";
      }
    }
    if (!o.passed) ++failures;
    std::printf("[%s] %2d %s: %s (%s)\n", o.passed ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
