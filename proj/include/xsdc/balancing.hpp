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

#ifndef XSDC_BALANCING_HPP_
#define XSDC_BALANCING_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include "xsdc/linalg.hpp"

namespace xsdc {

// Known entry (i, j) of the equivalence matrix, m in {0, 1}.
struct KnownEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 1.0;

  friend bool operator==(const KnownEntry&, const KnownEntry&) = default;
};

// Entropic relaxation of the label-assignment problem:
//
//   min_M tr(M^T A) + mu D_h(M; M0)
//   s.t.  M_ij = m_ij on the known set,
//         n_min <= M 1, M^T 1 <= n_max,  M >= 0.
struct BalancingProblem {
  Matrix A;
  std::vector<KnownEntry> known;
  double n_min = 0.0;
  double n_max = 0.0;
  double mu = 1.0;
  int iters = 10;
  // Prior M0. Defaults to the constant 1/k when k is set, else n_sigma / n.
  std::optional<Matrix> M0;
  std::optional<int> k;
  // Every (i, i, 1) must be known. Disabled only for plain transport tests.
  bool require_diagonal = true;
  // When > 0, stop before `iters` once both the marginal and known-entry
  // violations are at most stop_tol.
  double stop_tol = 0.0;

  void validate() const;
  double n_sigma() const { return 0.5 * (n_max + n_min); }
  double n_delta() const { return 0.5 * (n_max - n_min); }
};

struct EquivalenceMatrix {
  Matrix M;
  Vector u;                        // exp(-a), row scalings
  Vector v;                        // exp(-c), column scalings
  bool converged = false;
  double marginal_violation = 0.0;  // max distance of a row/column sum to [n_min, n_max]
  double known_violation = 0.0;     // max |M_ij - m_ij| on the known set
  int rounds = 0;
  // Dual objective after each round; non-increasing up to roundoff.
  std::vector<double> dual_trajectory;
};

// Adds (i, i, 1) for every i and the transposed twin of every entry, dropping
// duplicates. Conflicting values for the same pair throw InvalidInput.
std::vector<KnownEntry> close_known_set(std::vector<KnownEntry> known, std::size_t n,
                                        bool add_diagonal = true);

struct MuEstimate {
  double mu = 1.0;
  bool fallback = false;  // A was all zero; mu = 1
};

// Median of |A_ij| (midpoint for an even count).
MuEstimate default_mu(const Matrix& A);

// Entrywise clamp onto [n_sigma - n_delta, n_sigma + n_delta].
Vector project_box(const Vector& x, double n_sigma, double n_delta);

// Alternating dual minimization from u = v = 1. Throws Diverged when N, u or v
// become non-finite or the dual objective rises by more than 1e-6 (relative)
// for 3 consecutive rounds.
EquivalenceMatrix balance(const BalancingProblem& problem);

struct BalanceOutcome {
  EquivalenceMatrix result;
  double mu = 0.0;
  int doublings = 0;
};

// balance() retried with mu doubled after each divergence, up to
// max_doublings times, after which the last Diverged is rethrown.
BalanceOutcome balance_with_doubling(BalancingProblem problem, int max_doublings = 20);

// Dual objective at scalings (u, v) with the known-entry multipliers
// minimized out.
double balancing_dual(const BalancingProblem& problem, const Vector& u, const Vector& v);

struct ExactAssignment {
  Matrix Y;                 // n x k one-hot
  std::vector<int> labels;
  double objective = 0.0;   // tr(Y Y^T A)
};

// Exhaustive minimizer of tr(Y Y^T A) over hard assignments honoring the
// pairwise constraints (value 1: same cluster, 0: different) and optional
// bounds on the size of every nonempty cluster. Ties keep the first label
// vector in lexicographic order. Refuses instances with k^n > 1e7.
ExactAssignment brute_force_assign(const Matrix& A, int k,
                                   const std::vector<KnownEntry>& constraints,
                                   std::optional<double> size_min = std::nullopt,
                                   std::optional<double> size_max = std::nullopt);

struct SinkhornJacobian {
  Matrix jacobian;            // n^2 x n^2, column-stacked vectorization
  double spectral_radius = 0.0;
};

// Jacobian of one row-then-column scaling sweep at a fixed point Q with row
// sums alpha and column sums beta:
//   sum_ij (e_j e_j^T - 1 u_i^T e_j e_j^T) (x) (e_i e_i^T - e_i e_i^T 1 v_j^T)
// with u_i = Q^T e_i / (Q 1)_i and v_j = Q e_j / (Q^T 1)_j.
SinkhornJacobian sinkhorn_jacobian(const Matrix& Q, const Vector& alpha, const Vector& beta);

// Alternate row and column rescaling of positive Q until both marginals are
// within tol, or max_sweeps is reached.
Matrix sinkhorn_fixed_point(const Matrix& Q, const Vector& alpha, const Vector& beta,
                            int max_sweeps = 10000, double tol = 1e-13);

}  // namespace xsdc

#endif  // XSDC_BALANCING_HPP_
