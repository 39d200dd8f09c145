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

// xsdc: command-line front end.
//
//   xsdc train      --config run.json [--seed-override N] [--out-dir DIR]
//   xsdc cluster    --config run.json            (train forced to unsupervised)
//   xsdc sweep      --config run.json --grids grids.json
//   xsdc balance    --a A.csv [--constraints C.csv] --n-min X --n-max Y [--mu M] [--iters T]
//   xsdc gradcheck  [--seed S] [--repeat R] [--inject-fault]
//   xsdc smoothness --B 1 --n 10 --n-max 5 --lambda 0.5 [--samples 1000]
//
// Exit codes: 0 success, 1 verification failure, 2 usage or config error,
// 3 numeric failure. Progress and errors go to stderr as JSON lines.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xsdc/balancing.hpp"
#include "xsdc/data_io.hpp"
#include "xsdc/diagnostics.hpp"
#include "xsdc/errors.hpp"
#include "xsdc/trainer.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace xsdc;

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

void emit(const json& j) { std::cerr << j.dump() << '\n'; }

class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunFile {
  json dataset;
  std::string output_dir = "xsdc_out";
  TrainConfig config;
  json raw;
};

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!obj.is_object()) throw InvalidInput(std::string(where) + ": expected an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw InvalidInput(std::string(where) + ": unknown key '" + item.key() + "'");
    }
  }
}

RunFile load_run_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InvalidInput("config: " + std::string(e.what()));
  }
  check_keys(j, {"format_version", "mode", "dataset", "output_dir", "train"}, "config");
  if (!j.contains("format_version")) throw InvalidInput("config: format_version is required");
  if (j.at("format_version") != 1) throw InvalidInput("config: unsupported format_version");
  if (!j.contains("dataset")) throw InvalidInput("config: dataset is required");
  RunFile r;
  r.raw = j;
  r.dataset = j.at("dataset");
  if (j.contains("output_dir")) r.output_dir = j.at("output_dir").get<std::string>();
  r.config = config_from_json(j.contains("train") ? j.at("train").dump() : "{}");
  if (j.contains("mode")) r.config.mode = parse_mode(j.at("mode").get<std::string>());
  return r;
}

Dataset load_dataset(const json& desc) {
  if (!desc.is_object() || !desc.contains("type")) throw InvalidInput("dataset: type is required");
  const auto type = desc.at("type").get<std::string>();
  Dataset ds;
  bool standardize_rows = desc.value("standardize", true);
  if (type == "blobs") {
    check_keys(desc,
               {"type", "n", "d", "k", "separation", "label_fraction", "label_count", "seed",
                "standardize", "imbalance"},
               "dataset");
    const auto seed = desc.value("seed", std::uint64_t{0});
    ds = make_blobs(desc.value("n", std::size_t{400}), desc.value("d", std::size_t{10}),
                    desc.value("k", 4), desc.value("separation", 4.0),
                    desc.value("label_fraction", 0.0), seed);
    if (desc.contains("label_count")) {
      ds = keep_train_labels(ds, desc.at("label_count").get<std::size_t>(), seed);
    }
    if (desc.contains("imbalance")) {
      ds = imbalance(ds, desc.at("imbalance").get<std::vector<double>>(), seed);
    }
  } else if (type == "csv" || type == "libsvm") {
    check_keys(desc,
               {"type", "path", "label_column", "header", "k", "train_fraction", "val_fraction",
                "split_seed", "standardize"},
               "dataset");
    const auto path = desc.at("path").get<std::string>();
    if (type == "csv") {
      CsvOptions o;
      if (desc.contains("label_column")) o.label_column = desc.at("label_column").get<std::size_t>();
      o.header = desc.value("header", false);
      if (desc.contains("k")) o.k = desc.at("k").get<int>();
      ds = load_csv(path, o);
    } else {
      ds = load_libsvm(path);
    }
    assign_splits(ds, desc.value("train_fraction", 0.6), desc.value("val_fraction", 0.2),
                  desc.value("split_seed", std::uint64_t{0}));
  } else {
    throw InvalidInput("dataset: unknown type '" + type + "'");
  }
  if (standardize_rows) ds = standardize(ds);
  ds.validate();
  return ds;
}

json eval_json(const EvalRecord& e) {
  return json{{"iteration", e.iteration},
              {"train", e.train_accuracy},
              {"val", e.val_accuracy},
              {"test", e.test_accuracy},
              {"objective", e.objective}};
}

std::string labels_csv(const FinalLabels& f) {
  std::string out = "row,label,source\n";
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(f.labels[i]) + "," +
           std::string(to_string(f.source[i])) + "\n";
  }
  return out;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed_override,
              std::optional<std::string> out_dir, bool force_unsupervised) {
  RunFile rf = load_run_file(config_path);
  if (seed_override) rf.config.seed = *seed_override;
  if (force_unsupervised) rf.config.mode = Mode::kUnsupervised;
  const std::filesystem::path out = out_dir ? *out_dir : rf.output_dir;
  const Dataset ds = load_dataset(rf.dataset);
  emit({{"event", "start"},
        {"mode", std::string(to_string(rf.config.mode))},
        {"seed", rf.config.seed},
        {"rows", ds.size()},
        {"labeled_train", ds.labeled_rows(Split::kTrain).size()}});

  const std::size_t every = rf.config.eval_every;
  const StepHook hook = [every](const StepRecord& s) {
    if (s.iteration % every != 0) return;
    emit({{"event", "step"},
          {"phase", s.phase == Phase::kInit ? "init" : "main"},
          {"iteration", s.iteration},
          {"objective", s.objective},
          {"mu", s.mu}});
  };

  RunResult r;
  try {
    r = train(ds, rf.config, hook);
  } catch (const TrainingAborted& e) {
    write_file_atomic((out / "metrics.csv").string(), e.metrics().to_csv());
    throw;
  }
  const RunMetrics& m = r.metrics;
  write_file_atomic((out / "metrics.csv").string(), m.to_csv());
  write_file_atomic((out / "checkpoint.json").string(), checkpoint_json(r.state, rf.config));
  if (!r.state.best_checkpoint.empty()) {
    write_file_atomic((out / "best_checkpoint.json").string(), r.state.best_checkpoint);
  }
  write_file_atomic((out / "labels.csv").string(), labels_csv(r.final_labels));

  json trajectory = json::array();
  for (const auto& e : m.evals) trajectory.push_back(eval_json(e));
  json summary{{"format_version", 1},
               {"mode", std::string(to_string(m.mode))},
               {"seed", rf.config.seed},
               {"best_val_accuracy", m.best_val_accuracy},
               {"test_at_best_val", m.test_at_best_val},
               {"best_iteration", m.best_iteration},
               {"max_test_accuracy", m.max_test_accuracy},
               {"test_max_is_optimistic", m.test_max_is_optimistic},
               {"accuracy_is_hungarian_matched", m.mode == Mode::kUnsupervised},
               {"supervised_init", m.init_eval ? eval_json(*m.init_eval) : json(nullptr)},
               {"max_known_violation", m.max_known_violation},
               {"trajectory", trajectory},
               {"config", json::parse(config_to_json(rf.config))}};
  write_file_atomic((out / "summary.json").string(), summary.dump(2));
  emit({{"event", "done"},
        {"best_val_accuracy", m.best_val_accuracy},
        {"test_at_best_val", m.test_at_best_val},
        {"max_test_accuracy", m.max_test_accuracy},
        {"out_dir", out.string()}});
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& grids_path,
              std::optional<std::uint64_t> seed_override, std::optional<std::string> out_dir) {
  RunFile rf = load_run_file(config_path);
  if (seed_override) rf.config.seed = *seed_override;
  const std::filesystem::path out = out_dir ? *out_dir : rf.output_dir;
  const Dataset ds = load_dataset(rf.dataset);
  const SweepGrids grids = grids_from_json(read_file(grids_path));
  const SweepResult s = sweep(ds, grids, rf.config);
  for (const auto& rec : s.records) {
    emit({{"event", "sweep_point"},
          {"parameter", rec.parameter},
          {"value", rec.value},
          {"val_accuracy", rec.diverged ? json(nullptr) : json(rec.val_accuracy)},
          {"diverged", rec.diverged}});
  }
  json best = rf.raw;
  best["train"] = json::parse(config_to_json(s.best));
  best["mode"] = std::string(to_string(s.best.mode));
  write_file_atomic((out / "sweep.csv").string(), s.to_csv());
  write_file_atomic((out / "best_config.json").string(), best.dump(2));
  emit({{"event", "done"}, {"out_dir", out.string()}});
  return kExitOk;
}

std::vector<KnownEntry> load_constraints(const std::string& path) {
  const Dataset raw = parse_csv(read_file(path));
  std::vector<KnownEntry> out;
  if (raw.X.cols() != 3) throw InvalidInput("constraints: expected rows 'i,j,value'");
  for (Eigen::Index r = 0; r < raw.X.rows(); ++r) {
    const double i = raw.X(r, 0);
    const double j = raw.X(r, 1);
    if (i < 0 || j < 0 || i != std::floor(i) || j != std::floor(j)) {
      throw ParseError("constraints: indices must be nonnegative integers",
                       static_cast<std::size_t>(r + 1));
    }
    out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), raw.X(r, 2)});
  }
  return out;
}

int cmd_balance(const std::string& a_path, const std::optional<std::string>& constraints_path,
                double n_min, double n_max, std::optional<double> mu, int iters,
                std::optional<int> k, const std::string& out_dir) {
  BalancingProblem p;
  p.A = parse_csv(read_file(a_path)).X;
  if (p.A.rows() != p.A.cols()) throw InvalidInput("balance: A must be square");
  if (constraints_path) p.known = load_constraints(*constraints_path);
  const auto n = static_cast<std::size_t>(p.A.rows());
  for (std::size_t i = 0; i < n; ++i) {
    const bool present = std::any_of(p.known.begin(), p.known.end(),
                                     [i](const KnownEntry& e) { return e.i == i && e.j == i; });
    if (!present) p.known.push_back({i, i, 1.0});
  }
  p.n_min = n_min;
  p.n_max = n_max;
  p.iters = iters;
  p.k = k;
  const MuEstimate est = default_mu(p.A);
  p.mu = mu ? *mu : est.mu;
  const double requested = p.mu;
  p.validate();
  const BalanceOutcome o = balance_with_doubling(p);
  const std::filesystem::path out = out_dir;
  write_csv((out / "M.csv").string(), o.result.M);
  json report{{"n", n},
              {"mu_requested", requested},
              {"mu_fallback", !mu && est.fallback},
              {"mu", o.mu},
              {"doublings", o.doublings},
              {"rounds", o.result.rounds},
              {"converged", o.result.converged},
              {"marginal_violation", o.result.marginal_violation},
              {"known_violation", o.result.known_violation},
              {"dual_objective", o.result.dual_trajectory}};
  write_file_atomic((out / "balance_report.json").string(), report.dump(2));
  emit({{"event", "done"},
        {"marginal_violation", o.result.marginal_violation},
        {"mu", o.mu},
        {"out_dir", out.string()}});
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, int repeat, const GradCheckSizes& sizes, bool fault) {
  bool ok = true;
  for (int r = 0; r < repeat; ++r) {
    for (const auto& g : run_gradcheck(seed + static_cast<std::uint64_t>(r), sizes, fault)) {
      std::cout << json{{"seed", seed + static_cast<std::uint64_t>(r)},
                        {"suite", g.suite},
                        {"max_rel_error", g.max_rel_error},
                        {"tolerance", g.tolerance},
                        {"passed", g.passed}}
                       .dump()
                << '\n';
      if (!g.passed) {
        ok = false;
        emit({{"event", "gradcheck_failure"},
              {"suite", g.suite},
              {"seed", seed + static_cast<std::uint64_t>(r)},
              {"row", g.worst_row},
              {"col", g.worst_col},
              {"max_rel_error", g.max_rel_error}});
      }
    }
  }
  return ok ? kExitOk : kExitVerify;
}

int cmd_smoothness(double B, int n, int n_max, double lambda, int samples, std::uint64_t seed) {
  const SmoothnessReport r = run_smoothness(B, n, n_max, lambda, samples, seed);
  const LipschitzEstimates& b = r.bounds;
  const LipschitzEstimates nominal = lipschitz_bounds(B, n, n_max, lambda);
  std::cout << json{{"B", B},
                    {"n", n},
                    {"n_max", n_max},
                    {"lambda", lambda},
                    {"L_f", nominal.L_f},
                    {"L_r", nominal.L_r},
                    {"ell_f", nominal.ell_f},
                    {"ell_r", nominal.ell_r},
                    {"lambda_value_crossover", nominal.lambda_value_crossover},
                    {"lambda_gradient_crossover", nominal.lambda_gradient_crossover},
                    {"B_observed", b.B},
                    {"empirical",
                     {{"grad_f", r.max_grad_f},
                      {"grad_r", r.max_grad_r},
                      {"ratio_f", r.max_ratio_f},
                      {"ratio_r", r.max_ratio_r}}},
                    {"bounds_at_observed_B",
                     {{"L_f", b.L_f}, {"L_r", b.L_r}, {"ell_f", b.ell_f}, {"ell_r", b.ell_r}}},
                    {"samples", samples},
                    {"passed", r.passed()}}
                   .dump(2)
            << '\n';
  return r.passed() ? kExitOk : kExitVerify;
}

void apply_thread_cap() {
  if (const char* t = std::getenv("XSDC_THREADS")) {
    const int n = std::atoi(t);
    if (n < 1) throw UsageError("XSDC_THREADS must be a positive integer");
    Eigen::setNbThreads(n);
  }
}

int report(const std::string& kind, const std::string& message, int code) {
  emit({{"event", "error"}, {"kind", kind}, {"message", message}, {"exit_code", code}});
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"XSDC: joint representation and label learning from any mix of labeled and unlabeled data"};
  app.require_subcommand(1);

  std::string config_path;
  std::string grids_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_dir;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration JSON")->required();
    sub->add_option("--seed-override", seed_override, "Replace the run seed");
    sub->add_option("--out-dir", out_dir, "Replace the output directory");
  };
  CLI::App* train_cmd = app.add_subcommand("train", "Train per the run configuration");
  add_run_flags(train_cmd);
  CLI::App* cluster_cmd = app.add_subcommand("cluster", "Train without labels (unsupervised)");
  add_run_flags(cluster_cmd);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Sequential hyperparameter sweep");
  add_run_flags(sweep_cmd);
  sweep_cmd->add_option("--grids", grids_path, "Grid JSON")->required();

  std::string a_path;
  std::optional<std::string> constraints_path;
  double n_min = 0.0;
  double n_max = 0.0;
  std::optional<double> mu;
  int iters = 10;
  std::optional<int> k;
  std::string balance_out = ".";
  CLI::App* balance_cmd = app.add_subcommand("balance", "Solve one matrix-balancing problem");
  balance_cmd->add_option("--a", a_path, "Square cost matrix A (CSV)")->required();
  balance_cmd->add_option("--constraints", constraints_path, "Known entries as i,j,value rows");
  balance_cmd->add_option("--n-min", n_min, "Lower bound on row and column sums")->required();
  balance_cmd->add_option("--n-max", n_max, "Upper bound on row and column sums")->required();
  balance_cmd->add_option("--mu", mu, "Entropic weight (default: median |A|)");
  balance_cmd->add_option("--iters", iters, "Alternating rounds")->capture_default_str();
  balance_cmd->add_option("--k", k, "Cluster count for the prior 1/k");
  balance_cmd->add_option("--out-dir", balance_out, "Output directory")->capture_default_str();

  std::uint64_t gc_seed = 0;
  int gc_repeat = 1;
  bool inject_fault = false;
  GradCheckSizes sizes;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suites");
  grad_cmd->add_option("--seed", gc_seed, "First seed")->capture_default_str();
  grad_cmd->add_option("--repeat", gc_repeat, "Number of consecutive seeds")->capture_default_str();
  grad_cmd->add_option("--n", sizes.n, "Batch rows")->capture_default_str();
  grad_cmd->add_option("--d", sizes.d, "Input dimension")->capture_default_str();
  grad_cmd->add_option("--p", sizes.p, "Filters")->capture_default_str();
  grad_cmd->add_option("--k", sizes.k, "Clusters")->capture_default_str();
  grad_cmd->add_flag("--inject-fault", inject_fault, "Flip analytic gradient signs (self-test)");

  double sB = 1.0;
  int sn = 10;
  int sn_max = 5;
  double slambda = 1.0;
  int ssamples = 1000;
  std::uint64_t sseed = 0;
  CLI::App* smooth_cmd = app.add_subcommand("smoothness", "Lipschitz bounds versus sampling");
  smooth_cmd->add_option("--B", sB, "Spectral bound on Phi")->capture_default_str();
  smooth_cmd->add_option("--n", sn, "Rows")->capture_default_str();
  smooth_cmd->add_option("--n-max", sn_max, "Largest cluster size")->capture_default_str();
  smooth_cmd->add_option("--lambda", slambda, "Ridge weight")->capture_default_str();
  smooth_cmd->add_option("--samples", ssamples, "Random draws")->capture_default_str();
  smooth_cmd->add_option("--seed", sseed, "Sampling seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return report("usage", e.what(), kExitUsage);
  }

  try {
    apply_thread_cap();
    if (train_cmd->parsed()) return cmd_train(config_path, seed_override, out_dir, false);
    if (cluster_cmd->parsed()) return cmd_train(config_path, seed_override, out_dir, true);
    if (sweep_cmd->parsed()) return cmd_sweep(config_path, grids_path, seed_override, out_dir);
    if (balance_cmd->parsed()) {
      return cmd_balance(a_path, constraints_path, n_min, n_max, mu, iters, k, balance_out);
    }
    if (grad_cmd->parsed()) return cmd_gradcheck(gc_seed, gc_repeat, sizes, inject_fault);
    if (smooth_cmd->parsed()) return cmd_smoothness(sB, sn, sn_max, slambda, ssamples, sseed);
  } catch (const ParseError& e) {
    return report("parse", e.what(), kExitUsage);
  } catch (const InvalidInput& e) {
    return report("invalid_input", e.what(), kExitUsage);
  } catch (const UsageError& e) {
    return report("usage", e.what(), kExitUsage);
  } catch (const Refused& e) {
    return report("refused", e.what(), kExitUsage);
  } catch (const Diverged& e) {
    return report("diverged", e.what(), kExitNumeric);
  } catch (const ScaleUndefined& e) {
    return report("scale_undefined", e.what(), kExitNumeric);
  } catch (const Error& e) {
    return report("numeric", e.what(), kExitNumeric);
  } catch (const nlohmann::json::exception& e) {
    return report("config", e.what(), kExitUsage);
  } catch (const std::filesystem::filesystem_error& e) {
    return report("io", e.what(), kExitUsage);
  }
  return kExitUsage;
}
