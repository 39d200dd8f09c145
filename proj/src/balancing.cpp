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

#include "xsdc/balancing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include "xsdc/errors.hpp"

namespace xsdc {

namespace {

std::string pair_str(std::size_t i, std::size_t j) {
  return "(" + std::to_string(i) + ", " + std::to_string(j) + ")";
}

// Known entries as a dense lookup: NaN marks an unknown entry.
Matrix known_lookup(const std::vector<KnownEntry>& known, Eigen::Index n) {
  Matrix lookup = Matrix::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  for (const auto& e : known) {
    lookup(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) = e.value;
  }
  return lookup;
}

Matrix prior_of(const BalancingProblem& p) {
  const Eigen::Index n = p.A.rows();
  if (p.M0) return *p.M0;
  if (p.k) return Matrix::Constant(n, n, 1.0 / static_cast<double>(*p.k));
  return Matrix::Constant(n, n, p.n_sigma() / static_cast<double>(n));
}

double box_distance(double x, double lo, double hi) {
  if (x < lo) return lo - x;
  if (x > hi) return x - hi;
  return 0.0;
}

}  // namespace

void BalancingProblem::validate() const {
  const Eigen::Index n = A.rows();
  if (n < 1 || A.cols() != n) throw InvalidInput("balance: A must be square and nonempty");
  require_finite(A, "balance: A");
  if (!(n_min >= 0.0)) throw InvalidInput("balance: n_min must be nonnegative");
  if (!(n_max >= n_min)) throw InvalidInput("balance: n_max must be >= n_min");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidInput("balance: mu must be positive");
  if (iters < 1) throw InvalidInput("balance: iters must be >= 1");
  if (k && *k < 1) throw InvalidInput("balance: k must be >= 1");
  if (M0) {
    if (M0->rows() != n || M0->cols() != n) throw InvalidInput("balance: M0 must be n x n");
    if (!M0->allFinite() || !(M0->minCoeff() > 0.0)) {
      throw InvalidInput("balance: M0 must be entrywise positive");
    }
  }
  const auto un = static_cast<std::size_t>(n);
  std::map<std::pair<std::size_t, std::size_t>, double> seen;
  for (const auto& e : known) {
    if (e.i >= un || e.j >= un) {
      throw InvalidInput("balance: known entry " + pair_str(e.i, e.j) + " out of range");
    }
    if (e.value != 0.0 && e.value != 1.0) {
      throw InvalidInput("balance: known entry " + pair_str(e.i, e.j) + " must be 0 or 1");
    }
    auto [it, inserted] = seen.emplace(std::make_pair(e.i, e.j), e.value);
    if (!inserted && it->second != e.value) {
      throw InvalidInput("balance: conflicting values for known entry " + pair_str(e.i, e.j));
    }
  }
  for (const auto& [ij, value] : seen) {
    auto twin = seen.find({ij.second, ij.first});
    if (twin == seen.end() || twin->second != value) {
      throw InvalidInput("balance: known set not closed under transposition at " +
                         pair_str(ij.first, ij.second));
    }
  }
  if (require_diagonal) {
    for (std::size_t i = 0; i < un; ++i) {
      auto it = seen.find({i, i});
      if (it == seen.end() || it->second != 1.0) {
        throw InvalidInput("balance: diagonal entry " + pair_str(i, i) + " must be known as 1");
      }
    }
  }
}

std::vector<KnownEntry> close_known_set(std::vector<KnownEntry> known, std::size_t n,
                                        bool add_diagonal) {
  std::map<std::pair<std::size_t, std::size_t>, double> seen;
  auto add = [&](std::size_t i, std::size_t j, double v) {
    if (i >= n || j >= n) {
      throw InvalidInput("known entry " + pair_str(i, j) + " out of range");
    }
    auto [it, inserted] = seen.emplace(std::make_pair(i, j), v);
    if (!inserted && it->second != v) {
      throw InvalidInput("conflicting values for known entry " + pair_str(i, j));
    }
  };
  for (const auto& e : known) {
    add(e.i, e.j, e.value);
    add(e.j, e.i, e.value);
  }
  if (add_diagonal) {
    for (std::size_t i = 0; i < n; ++i) add(i, i, 1.0);
  }
  std::vector<KnownEntry> out;
  out.reserve(seen.size());
  for (const auto& [ij, v] : seen) out.push_back({ij.first, ij.second, v});
  return out;
}

MuEstimate default_mu(const Matrix& A) {
  if (A.size() == 0) throw InvalidInput("default_mu: empty matrix");
  std::vector<double> mags(static_cast<std::size_t>(A.size()));
  for (Eigen::Index i = 0; i < A.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(A.data()[i]);
  std::sort(mags.begin(), mags.end());
  const std::size_t h = mags.size() / 2;
  const double med = mags.size() % 2 == 1 ? mags[h] : 0.5 * (mags[h - 1] + mags[h]);
  if (med > 0.0) return {med, false};
  // Median zero but A nonzero still needs a positive weight.
  const double largest = mags.back();
  if (largest > 0.0) return {largest, false};
  return {1.0, true};
}

Vector project_box(const Vector& x, double n_sigma, double n_delta) {
  if (!(n_delta >= 0.0)) throw InvalidInput("project_box: radius must be nonnegative");
  return x.cwiseMax(n_sigma - n_delta).cwiseMin(n_sigma + n_delta);
}

double balancing_dual(const BalancingProblem& p, const Vector& u, const Vector& v) {
  const Eigen::Index n = p.A.rows();
  const Matrix log_prior = prior_of(p).array().log().matrix();
  const Matrix q_tilde = p.A / p.mu - log_prior;
  const Matrix lookup = known_lookup(p.known, n);

  double value = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = lookup(i, j);
      if (std::isnan(m)) {
        value += u(i) * std::exp(-q_tilde(i, j)) * v(j);
      } else if (m > 0.0) {
        // u_i N_ij v_j = m and the multiplier is -q - log m + log u_i + log v_j.
        value += m * (1.0 - q_tilde(i, j) - std::log(m) + std::log(u(i)) + std::log(v(j)));
      }
    }
  }
  const Vector a = -u.array().log().matrix();
  const Vector c = -v.array().log().matrix();
  value += p.n_delta() * (a.lpNorm<1>() + c.lpNorm<1>());
  value += p.n_sigma() * (a.sum() + c.sum());
  return value;
}

EquivalenceMatrix balance(const BalancingProblem& problem) {
  problem.validate();
  const Eigen::Index n = problem.A.rows();
  const double lo = problem.n_min;
  const double hi = problem.n_max;

  const Matrix q_tilde = problem.A / problem.mu - prior_of(problem).array().log().matrix();
  const Matrix free_part = (-q_tilde).array().exp().matrix();
  if (!free_part.allFinite()) throw Diverged("balance: exp(-Q) overflowed", 0);

  EquivalenceMatrix out;
  out.u = Vector::Ones(n);
  out.v = Vector::Ones(n);
  Matrix N = free_part;
  int rising = 0;

  for (int t = 1; t <= problem.iters; ++t) {
    N = free_part;
    for (const auto& e : problem.known) {
      const auto i = static_cast<Eigen::Index>(e.i);
      const auto j = static_cast<Eigen::Index>(e.j);
      N(i, j) = e.value == 0.0 ? 0.0 : e.value / (out.u(i) * out.v(j));
    }
    const Vector row = N * out.v;
    out.u = project_box(row, problem.n_sigma(), problem.n_delta()).cwiseQuotient(row);
    const Vector col = N.transpose() * out.u;
    out.v = project_box(col, problem.n_sigma(), problem.n_delta()).cwiseQuotient(col);

    if (!N.allFinite() || !out.u.allFinite() || !out.v.allFinite() ||
        !(out.u.minCoeff() > 0.0) || !(out.v.minCoeff() > 0.0)) {
      throw Diverged("balance: non-finite scaling", static_cast<std::size_t>(t));
    }

    const double dual = balancing_dual(problem, out.u, out.v);
    if (!std::isfinite(dual)) throw Diverged("balance: non-finite dual objective", static_cast<std::size_t>(t));
    if (!out.dual_trajectory.empty()) {
      const double prev = out.dual_trajectory.back();
      rising = dual - prev > 1e-6 * std::max(1.0, std::abs(prev)) ? rising + 1 : 0;
      if (rising >= 3) throw Diverged("balance: dual objective increasing", static_cast<std::size_t>(t));
    }
    out.dual_trajectory.push_back(dual);
    out.rounds = t;

    out.M = out.u.asDiagonal() * N * out.v.asDiagonal();
    // N on the known set evaluated at the final scalings: u_i m_ij / (u_i v_j) v_j.
    for (const auto& e : problem.known) {
      out.M(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) = e.value;
    }
    const Vector rs = out.M.rowwise().sum();
    const Vector cs = out.M.colwise().sum().transpose();
    out.marginal_violation = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      out.marginal_violation = std::max({out.marginal_violation, box_distance(rs(i), lo, hi),
                                         box_distance(cs(i), lo, hi)});
    }
    out.known_violation = 0.0;
    for (const auto& e : problem.known) {
      out.known_violation = std::max(
          out.known_violation,
          std::abs(out.M(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) - e.value));
    }
    if (problem.stop_tol > 0.0 && out.marginal_violation <= problem.stop_tol &&
        out.known_violation <= problem.stop_tol) {
      break;
    }
  }
  out.converged = out.marginal_violation <= 1e-6 * static_cast<double>(n);
  return out;
}

BalanceOutcome balance_with_doubling(BalancingProblem problem, int max_doublings) {
  for (int d = 0;; ++d) {
    try {
      BalanceOutcome out;
      out.result = balance(problem);
      out.mu = problem.mu;
      out.doublings = d;
      return out;
    } catch (const Diverged&) {
      if (d >= max_doublings) throw;
      problem.mu *= 2.0;
    }
  }
}

ExactAssignment brute_force_assign(const Matrix& A, int k,
                                   const std::vector<KnownEntry>& constraints,
                                   std::optional<double> size_min,
                                   std::optional<double> size_max) {
  const Eigen::Index n = A.rows();
  if (n < 1 || A.cols() != n) throw InvalidInput("brute_force_assign: A must be square");
  if (k < 1) throw InvalidInput("brute_force_assign: k must be >= 1");
  if (static_cast<double>(n) * std::log(static_cast<double>(k)) > std::log(1e7) + 1e-12) {
    throw Refused("brute_force_assign: k^n exceeds 1e7");
  }
  for (const auto& c : constraints) {
    if (c.i >= static_cast<std::size_t>(n) || c.j >= static_cast<std::size_t>(n)) {
      throw InvalidInput("brute_force_assign: constraint " + pair_str(c.i, c.j) + " out of range");
    }
  }

  const auto un = static_cast<std::size_t>(n);
  std::vector<int> labels(un, 0);
  std::vector<int> best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<int> counts(static_cast<std::size_t>(k));

  auto feasible = [&]() {
    for (const auto& c : constraints) {
      const bool same = labels[c.i] == labels[c.j];
      if (same != (c.value == 1.0)) return false;
    }
    if (size_min || size_max) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int l : labels) ++counts[static_cast<std::size_t>(l)];
      for (int cnt : counts) {
        if (cnt == 0) continue;
        if (size_min && cnt < *size_min) return false;
        if (size_max && cnt > *size_max) return false;
      }
    }
    return true;
  };

  auto advance = [&]() {
    // Odometer increment, last position fastest: lexicographic order.
    for (std::size_t pos = un; pos-- > 0;) {
      if (++labels[pos] < k) return true;
      labels[pos] = 0;
    }
    return false;
  };

  do {
    if (!feasible()) continue;
    double obj = 0.0;
    for (std::size_t i = 0; i < un; ++i) {
      for (std::size_t j = 0; j < un; ++j) {
        if (labels[i] == labels[j]) obj += A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    if (obj < best_obj) {
      best_obj = obj;
      best = labels;
    }
  } while (advance());
  if (best.empty()) throw InvalidInput("brute_force_assign: no feasible assignment");

  ExactAssignment out;
  out.labels = best;
  out.Y = one_hot(best, k);
  out.objective = best_obj;
  return out;
}

Matrix sinkhorn_fixed_point(const Matrix& Q, const Vector& alpha, const Vector& beta,
                            int max_sweeps, double tol) {
  Matrix P = Q;
  for (int s = 0; s < max_sweeps; ++s) {
    P = (alpha.cwiseQuotient(P.rowwise().sum())).asDiagonal() * P;
    P = P * (beta.cwiseQuotient(P.colwise().sum().transpose())).asDiagonal();
    const double err = (P.rowwise().sum() - alpha).cwiseAbs().maxCoeff();
    if (err <= tol) break;
  }
  return P;
}

SinkhornJacobian sinkhorn_jacobian(const Matrix& Q, const Vector& alpha, const Vector& beta) {
  const Eigen::Index n = Q.rows();
  if (n < 1 || Q.cols() != n) throw InvalidInput("sinkhorn_jacobian: Q must be square");
  if (n > 12) throw InvalidInput("sinkhorn_jacobian: n must be <= 12");
  if (alpha.size() != n || beta.size() != n) {
    throw InvalidInput("sinkhorn_jacobian: marginal size mismatch");
  }
  if (!Q.allFinite() || !(Q.minCoeff() > 0.0)) {
    throw InvalidInput("sinkhorn_jacobian: Q must be entrywise positive");
  }

  const Vector row_sums = Q.rowwise().sum();
  const Vector col_sums = Q.colwise().sum().transpose();
  // row_norm.row(i) = u_i^T, col_norm.col(j) = v_j
  const Matrix row_norm = row_sums.cwiseInverse().asDiagonal() * Q;
  const Matrix col_norm = Q * col_sums.cwiseInverse().asDiagonal();

  // Term (i, j) is F (x) G with F = (e_j - u_i[j] 1) e_j^T and G = e_i (e_i - v_j)^T.
  // F is supported on column j, G on row i, so (F (x) G)[(a, b), (c, d)] is
  // nonzero only for c = j, b = i.
  const Eigen::Index n2 = n * n;
  SinkhornJacobian out;
  out.jacobian = Matrix::Zero(n2, n2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double uij = row_norm(i, j);
      for (Eigen::Index a = 0; a < n; ++a) {
        const double f = (a == j ? 1.0 : 0.0) - uij;
        if (f == 0.0) continue;
        for (Eigen::Index d = 0; d < n; ++d) {
          const double g = (d == i ? 1.0 : 0.0) - col_norm(d, j);
          out.jacobian(a * n + i, j * n + d) += f * g;
        }
      }
    }
  }
  if (n2 == 1) {
    out.spectral_radius = std::abs(out.jacobian(0, 0));
  } else {
    Eigen::EigenSolver<Matrix> eig(out.jacobian, false);
    out.spectral_radius = eig.eigenvalues().cwiseAbs().maxCoeff();
  }
  return out;
}

}  // namespace xsdc
