// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace gs4d {

/// Adaptive moment estimation over a flat parameter group.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-15;

  explicit Adam(std::size_t size = 0) : m_(size, 0.0), v_(size, 0.0) {}

  std::size_t size() const { return m_.size(); }

  void step(std::span<double> params, std::span<const double> grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grads[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grads[i] * grads[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEpsilon);
    }
  }

  /// Rebuilds moments for a reindexed group: entry k takes the `stride`
  /// moments of old row source[k], or zeros when source[k] < 0.
  void remap(std::span<const int> source, std::size_t stride) {
    std::vector<double> m(source.size() * stride, 0.0), v(source.size() * stride, 0.0);
    for (std::size_t k = 0; k < source.size(); ++k) {
      if (source[k] < 0) continue;
      for (std::size_t j = 0; j < stride; ++j) {
        m[k * stride + j] = m_[source[k] * stride + j];
        v[k * stride + j] = v_[source[k] * stride + j];
      }
    }
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  int t_ = 0;
};

}  // namespace gs4d
