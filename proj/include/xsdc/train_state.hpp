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

#ifndef XSDC_TRAIN_STATE_HPP_
#define XSDC_TRAIN_STATE_HPP_

#include <cstddef>
#include <optional>
#include <random>
#include <string>

#include "xsdc/feature_map.hpp"
#include "xsdc/linalg.hpp"

namespace xsdc {

struct TrainState {
  NystromLayer layer;
  std::optional<RidgeSolution> classifier;
  std::size_t iteration = 0;
  // Total objective at the start of the most recent ULR step.
  double last_objective = 0.0;
  double best_val_accuracy = 0.0;
  std::size_t best_iteration = 0;
  // Checkpoint JSON captured whenever best_val_accuracy improves.
  std::string best_checkpoint;
  std::mt19937_64 rng;
};

}  // namespace xsdc

#endif  // XSDC_TRAIN_STATE_HPP_
