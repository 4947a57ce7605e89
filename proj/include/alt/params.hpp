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

#ifndef ALT_PARAMS_HPP_
#define ALT_PARAMS_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "alt/array.hpp"
#include "alt/autograd.hpp"
#include "alt/common.hpp"

namespace alt {

// Named parameter arrays in stable insertion order. Iteration order is part
// of the determinism contract (checkpoints, gradient reductions).
class ParamSet {
 public:
  Array& add(const std::string& name, Array value) {
    if (values_.count(name)) throw ConfigError("ParamSet: duplicate name " + name);
    order_.push_back(name);
    return values_.emplace(name, std::move(value)).first->second;
  }

  bool contains(const std::string& name) const { return values_.count(name) != 0; }

  Array& at(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("ParamSet: unknown name " + name);
    return it->second;
  }

  const Array& at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("ParamSet: unknown name " + name);
    return it->second;
  }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  // Copies every parameter whose name starts with `prefix` from `src`,
  // returning how many were copied. Shapes must match.
  std::size_t load_prefix(const ParamSet& src, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& name : order_) {
      if (name.rfind(prefix, 0) != 0) continue;
      if (!src.contains(name)) continue;
      const Array& s = src.at(name);
      Array& d = values_.at(name);
      if (s.shape != d.shape)
        throw CheckpointMismatch("parameter " + name + ": shape " + Array::shape_str(s.shape) +
                                 " vs " + Array::shape_str(d.shape));
      d = s;
      ++n;
    }
    return n;
  }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Array> values_;
};

// Tape leaves for a ParamSet, so model code can look up Vars by name while
// building a loss graph.
class VarSet {
 public:
  VarSet() = default;

  static VarSet from_params(Tape& tape, const ParamSet& params) {
    VarSet vs;
    for (const auto& name : params.names()) vs.vars_.emplace(name, tape.leaf(params.at(name)));
    return vs;
  }

  Var at(const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ConfigError("VarSet: unknown name " + name);
    return it->second;
  }

  // Gradients keyed by name, in the order of `params`.
  std::unordered_map<std::string, Array> grads(const ParamSet& params) const {
    std::unordered_map<std::string, Array> out;
    for (const auto& name : params.names()) out.emplace(name, at(name).grad());
    return out;
  }

 private:
  std::unordered_map<std::string, Var> vars_;
};

using GradMap = std::unordered_map<std::string, Array>;

// Elementwise in-place accumulation, used for batch gradient reduction.
inline void accumulate_grads(GradMap& into, const GradMap& from) {
  for (const auto& [name, g] : from) {
    auto it = into.find(name);
    if (it == into.end()) {
      into.emplace(name, g);
    } else {
      check_same_shape(it->second, g, "accumulate_grads");
      for (std::size_t i = 0; i < g.data.size(); ++i) it->second.data[i] += g.data[i];
    }
  }
}

inline void scale_grads(GradMap& grads, double c) {
  for (auto& [name, g] : grads)
    for (double& v : g.data) v *= c;
}

}  // namespace alt

#endif  // ALT_PARAMS_HPP_
