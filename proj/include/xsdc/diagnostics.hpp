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

#ifndef XSDC_DIAGNOSTICS_HPP_
#define XSDC_DIAGNOSTICS_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xsdc/linalg.hpp"
#include "xsdc/ulr.hpp"

namespace xsdc {

// Central finite differences of f at x, one coordinate at a time.
Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x,
                         double step);

// Largest |a_ij - f_ij| / max(|a_ij|, |f_ij|) over coordinates with
// |f_ij| > floor. A coordinate where |f_ij| <= floor but |a_ij| > 2 floor
// counts as error 1.
double max_relative_error(const Matrix& analytic, const Matrix& numeric,
                          Eigen::Index* worst_row = nullptr, Eigen::Index* worst_col = nullptr,
                          double floor = 1e-8);

struct GradCheckSizes {
  Eigen::Index n = 12;  // batch rows
  Eigen::Index d = 5;   // input dimension
  Eigen::Index p = 6;   // filters
  int k = 3;
};

struct GradCheckResult {
  std::string suite;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  bool passed = false;
};

// Suites: grad_phi, regularizer_phi, regularizer_v, feature_backward (raw and
// normalized), ulr_gradient. Phi-level tolerance 1e-6, V-level 1e-4.
// inject_fault flips the sign of every analytic gradient.
std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed, const GradCheckSizes& sizes = {},
                                           bool inject_fault = false);

struct SmoothnessReport {
  LipschitzEstimates bounds;      // at the largest sampled ||Phi||_2
  double max_grad_f = 0.0;        // max ||grad F_f||_2
  double max_grad_r = 0.0;        // max ||grad F_r||_2
  double max_ratio_f = 0.0;       // max ||grad F_f(P1) - grad F_f(P2)||_2 / ||P1 - P2||_2
  double max_ratio_r = 0.0;
  int samples = 0;

  // Every empirical value within its bound, up to a 1e-12 relative slack.
  bool passed() const;
};

// Random draws Phi (n x D, D = 4) with ||Phi||_2 <= B and one-hot Y whose
// clusters hold at most n_max rows; gradients of the forward (ridge) and
// reverse (k-means) objectives and their difference ratios on pairs sharing Y.
SmoothnessReport run_smoothness(double B, int n, int n_max, double lambda, int samples,
                                std::uint64_t seed);

}  // namespace xsdc

#endif  // XSDC_DIAGNOSTICS_HPP_
