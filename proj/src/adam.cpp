// SPDX-License-Identifier: Apache-2.0
#include "taskspace/adam.hpp"

#include <cmath>

#include "taskspace/errors.hpp"

namespace taskspace {

AdamState AdamState::init(const ParamVector& like, AdamHyper hyper) {
  AdamState s;
  s.m = like.zeros_like();
  s.v = like.zeros_like();
  s.hyper = hyper;
  return s;
}

void adam_step_inplace(AdamState& state, ParamVector& params, const ParamVector& grads) {
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v))
    throw ContractError("adam_step: parameter, gradient and moment layouts differ");
  const auto& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < params.count(); ++k) {
    auto& p = params[k].vec();
    auto& m = state.m[k].vec();
    auto& v = state.v[k].vec();
    const auto& g = grads[k].vec();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

std::pair<ParamVector, AdamState> adam_step(const AdamState& state, const ParamVector& params,
                                            const ParamVector& grads) {
  AdamState next = state;
  ParamVector out = params;
  adam_step_inplace(next, out, grads);
  return {std::move(out), std::move(next)};
}

}  // namespace taskspace
