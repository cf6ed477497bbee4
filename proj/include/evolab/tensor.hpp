// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "evolab/errors.hpp"

namespace evolab {

/// Dense row-major tensor of doubles. Block activations are rank-3 (B, L, D);
/// parameters are scalars, vectors (D) or matrices (D, D).
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int64_t> s, double fill = 0.0)
      : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), fill) {}

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // Rank-3 accessors (b, l, d). Callers guarantee rank.
  double& at(int64_t b, int64_t l, int64_t d) {
    return data[static_cast<size_t>((b * shape[1] + l) * shape[2] + d)];
  }
  double at(int64_t b, int64_t l, int64_t d) const {
    return data[static_cast<size_t>((b * shape[1] + l) * shape[2] + d)];
  }

  bool all_finite() const {
    for (double x : data) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }
};

/// The intermediate-variable dictionary passed between blocks. Ordered map so
/// that every iteration order (serialization, hashing) is deterministic.
using NamedTensorMap = std::map<std::string, Tensor>;

}  // namespace evolab
