/* Copyright 2026 The altkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ALT_OPTIM_HPP_
#define ALT_OPTIM_HPP_

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>

#include "alt/params.hpp"

namespace alt {

// Adam moment buffers for one parameter group. The step counter is shared by
// the group (all members update together).
struct AdamState {
  long step = 0;
  std::unordered_map<std::string, std::pair<Array, Array>> moments;  // m, v
};

// One Adam update with bias correction over every entry of `grads`.
// Parameters not present in `grads` are untouched.
inline void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (lr < 0.0) throw ConfigError("adam_step: negative learning rate");
  ++state.step;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (const auto& name : params.names()) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    Array& p = params.at(name);
    const Array& g = git->second;
    check_same_shape(p, g, "adam_step");
    auto mit = state.moments.find(name);
    if (mit == state.moments.end()) {
      mit = state.moments
                .emplace(name, std::make_pair(Array::zeros(p.shape), Array::zeros(p.shape)))
                .first;
    }
    Array& m = mit->second.first;
    Array& v = mit->second.second;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      double gi = g.data[i];
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace alt

#endif  // ALT_OPTIM_HPP_
