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

#ifndef ALT_ARRAY_HPP_
#define ALT_ARRAY_HPP_

#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "alt/common.hpp"
#include "alt/rng.hpp"

namespace alt {

// Dense row-major array of 64-bit floats. Rank 1 and 2 cover everything in
// this codebase except conv activations, which are rank 2 as (channels, time).
struct Array {
  std::vector<int> shape;
  std::vector<double> data;

  Array() = default;
  Array(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != data.size()) {
      throw ShapeMismatch("Array: shape " + shape_str(shape) + " does not match data size " +
                          std::to_string(data.size()));
    }
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw ShapeMismatch("Array: negative extent");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  static Array zeros(std::vector<int> s) {
    std::size_t n = numel_of(s);
    return Array(std::move(s), std::vector<double>(n, 0.0));
  }

  static Array full(std::vector<int> s, double v) {
    std::size_t n = numel_of(s);
    return Array(std::move(s), std::vector<double>(n, v));
  }

  static Array scalar(double v) { return Array({1}, {v}); }

  static Array vec(std::vector<double> d) {
    int n = static_cast<int>(d.size());
    return Array({n}, std::move(d));
  }

  static Array randn(std::vector<int> s, Rng& rng, double stddev = 1.0) {
    Array a = zeros(std::move(s));
    for (double& v : a.data) v = rng.normal(0.0, stddev);
    return a;
  }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool is_scalar() const { return numel() == 1; }

  int rows() const {
    if (rank() != 2) throw ShapeMismatch("rows(): rank-2 array required, got " + shape_str(shape));
    return shape[0];
  }
  int cols() const {
    if (rank() != 2) throw ShapeMismatch("cols(): rank-2 array required, got " + shape_str(shape));
    return shape[1];
  }

  double& at(int i) { return data[static_cast<std::size_t>(i)]; }
  double at(int i) const { return data[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

  // Row view helpers for rank-2 arrays.
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * shape[1]; }
  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * shape[1]; }

  bool same_shape(const Array& o) const { return shape == o.shape; }

  static std::string shape_str(const std::vector<int>& s) {
    std::ostringstream oss;
    oss << "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) oss << ",";
      oss << s[i];
    }
    oss << ")";
    return oss.str();
  }
};

inline void check_same_shape(const Array& a, const Array& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(op) + ": shapes " + Array::shape_str(a.shape) + " vs " +
                        Array::shape_str(b.shape));
  }
}

}  // namespace alt

#endif  // ALT_ARRAY_HPP_
