// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>

#include "taskspace/tensor.hpp"

namespace taskspace {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  ParamVector m;
  ParamVector v;
  AdamHyper hyper;

  static AdamState init(const ParamVector& like, AdamHyper hyper);
};

/// One bias-corrected Adam update. Returns the new parameters and state.
std::pair<ParamVector, AdamState> adam_step(const AdamState& state, const ParamVector& params, const ParamVector& grads);

/// In-place variant used by the training loops.
void adam_step_inplace(AdamState& state, ParamVector& params, const ParamVector& grads);

}  // namespace taskspace
