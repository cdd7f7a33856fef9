// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "gs4d/error.hpp"

namespace gs4d {

void LowRankFactor::validate() const {
  if (u.cols() != v.cols()) fail(ErrorKind::Shape, "U and V ranks differ");
  if (u.cols() < 1) fail(ErrorKind::Parameter, "factor rank must be >= 1");
  if (u.cols() > std::min(u.rows(), v.rows())) {
    fail(ErrorKind::Parameter, "factor rank exceeds min(m, n)");
  }
  if (chunk_index < 1) fail(ErrorKind::Parameter, "factor chunk_index must be >= 1");
}

Eigen::MatrixXd SvdTruncation::reconstruct() const {
  return u * singular_values.asDiagonal() * v.transpose();
}

namespace {

// Hestenes one-sided Jacobi on the columns of `w` (rows >= cols). On return
// the columns of w are mutually orthogonal and w = A V.
void orthogonalize_columns(Eigen::MatrixXd& w, Eigen::MatrixXd& v) {
  const Eigen::Index n = w.cols();
  constexpr double kTol = 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = w.col(p).squaredNorm();
        const double beta = w.col(q).squaredNorm();
        const double gamma = w.col(p).dot(w.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index k = 0; k < w.rows(); ++k) {
          const double wp = w(k, p), wq = w(k, q);
          w(k, p) = c * wp - s * wq;
          w(k, q) = s * wp + c * wq;
        }
        for (Eigen::Index k = 0; k < v.rows(); ++k) {
          const double vp = v(k, p), vq = v(k, q);
          v(k, p) = c * vp - s * vq;
          v(k, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
}

// Replaces column `col` of `q` with a unit vector orthogonal to columns [0, col).
void complete_column(Eigen::MatrixXd& q, Eigen::Index col) {
  for (Eigen::Index e = 0; e < q.rows(); ++e) {
    Eigen::VectorXd cand = Eigen::VectorXd::Unit(q.rows(), e);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < col; ++j) cand -= q.col(j).dot(cand) * q.col(j);
    }
    const double nrm = cand.norm();
    if (nrm > 1e-6) {
      q.col(col) = cand / nrm;
      return;
    }
  }
}

SvdTruncation svd_tall(const Eigen::MatrixXd& a, int lambda) {
  const Eigen::Index n = a.cols();
  Eigen::MatrixXd w = a;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  orthogonalize_columns(w, v);

  Eigen::VectorXd sigma(n);
  for (Eigen::Index j = 0; j < n; ++j) sigma[j] = w.col(j).norm();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return sigma[x] > sigma[y]; });

  SvdTruncation out;
  out.u.resize(a.rows(), lambda);
  out.v.resize(n, lambda);
  out.singular_values.resize(lambda);
  const double tiny = sigma.size() ? sigma[order[0]] * 1e-13 : 0.0;
  for (int k = 0; k < lambda; ++k) {
    const Eigen::Index j = order[k];
    out.singular_values[k] = sigma[j];
    out.v.col(k) = v.col(j);
    if (sigma[j] > tiny && sigma[j] > 0.0) {
      out.u.col(k) = w.col(j) / sigma[j];
    } else {
      out.singular_values[k] = 0.0;
      complete_column(out.u, k);
    }
  }
  return out;
}

}  // namespace

SvdTruncation truncated_svd(const Eigen::MatrixXd& a, int lambda) {
  if (lambda < 1 || lambda > std::min(a.rows(), a.cols())) {
    fail(ErrorKind::Parameter, "truncation rank " + std::to_string(lambda) +
                                   " outside [1, min(m, n)]");
  }
  if (a.rows() >= a.cols()) return svd_tall(a, lambda);
  SvdTruncation t = svd_tall(a.transpose(), lambda);
  std::swap(t.u, t.v);
  return t;
}

Eigen::MatrixXd compose_adaptation(const Eigen::MatrixXd& a, const LowRankFactor& factor) {
  if (factor.u.rows() != a.rows() || factor.v.rows() != a.cols() ||
      factor.u.cols() != factor.v.cols()) {
    fail(ErrorKind::Shape, "factor dimensions do not match the adapted matrix");
  }
  Eigen::MatrixXd out = a;
  out.noalias() += factor.u * factor.v.transpose();
  return out;
}

LowRankFactor factor_init(int m, int n, int lambda, std::uint64_t seed, FactorTarget target,
                          int chunk_index) {
  if (lambda < 1 || lambda > std::min(m, n)) {
    fail(ErrorKind::Parameter, "factor rank outside [1, min(m, n)]");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  LowRankFactor f;
  f.u.resize(m, lambda);
  for (Eigen::Index k = 0; k < f.u.size(); ++k) f.u.data()[k] = normal(rng);
  f.v = Eigen::MatrixXd::Zero(n, lambda);
  f.target = target;
  f.chunk_index = chunk_index;
  return f;
}

StorageSaving storage_saving(std::int64_t m, std::int64_t n, std::int64_t lambda) {
  if (lambda < 1 || m < 1 || n < 1) fail(ErrorKind::Parameter, "storage_saving needs m, n, lambda >= 1");
  StorageSaving s;
  s.saved = m * n - lambda * (m + n);
  s.ratio = static_cast<double>(s.saved) / static_cast<double>(m * n);
  return s;
}

}  // namespace gs4d
