// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace gs4d {

/// Which plane channel a factor adapts.
struct FactorTarget {
  int plane = 0;    // 0 = XY, 1 = XZ, 2 = YZ
  int channel = 0;  // [0, F)

  bool operator==(const FactorTarget&) const = default;
};

/// Rank-lambda update U V^T of one m x n plane channel.
struct LowRankFactor {
  Eigen::MatrixXd u;  // m x lambda
  Eigen::MatrixXd v;  // n x lambda
  FactorTarget target;
  int chunk_index = 1;

  int rank() const { return static_cast<int>(u.cols()); }
  Eigen::MatrixXd product() const { return u * v.transpose(); }
  void validate() const;
};

struct SvdTruncation {
  Eigen::MatrixXd u;               // m x lambda, orthonormal columns
  Eigen::VectorXd singular_values; // lambda, nonincreasing
  Eigen::MatrixXd v;               // n x lambda, orthonormal columns

  Eigen::MatrixXd reconstruct() const;
};

/// Top-lambda singular triplets by one-sided Jacobi rotations.
/// Throws Parameter unless 1 <= lambda <= min(m, n).
SvdTruncation truncated_svd(const Eigen::MatrixXd& a, int lambda);

/// A + U V^T. Throws Shape on dimension mismatch.
Eigen::MatrixXd compose_adaptation(const Eigen::MatrixXd& a, const LowRankFactor& factor);

/// U ~ N(0, 0.01^2), V = 0, so the initial update is exactly zero.
LowRankFactor factor_init(int m, int n, int lambda, std::uint64_t seed,
                          FactorTarget target = {}, int chunk_index = 1);

struct StorageSaving {
  std::int64_t saved = 0;  // m n - lambda (m + n)
  double ratio = 0.0;      // saved / (m n)
};

StorageSaving storage_saving(std::int64_t m, std::int64_t n, std::int64_t lambda);

}  // namespace gs4d
