// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/gaussian.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "gs4d/error.hpp"

namespace gs4d {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateRotation: return "degenerate_rotation";
    case ErrorKind::BehindCamera: return "behind_camera";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::InconsistentState: return "inconsistent_state";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::BadMagic: return "bad_magic";
    case ErrorKind::VersionMismatch: return "version_mismatch";
    case ErrorKind::Checksum: return "checksum";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::Gap: return "gap";
    case ErrorKind::MissingFile: return "missing_file";
    case ErrorKind::NonRigidPose: return "non_rigid_pose";
    case ErrorKind::RaggedFrames: return "ragged_frames";
    case ErrorKind::Input: return "input";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

double GaussianPrimitive::opacity() const { return sigmoid(opacity_logit); }

int GaussianPrimitive::sh_degree() const {
  for (int l = 0; l <= kMaxShDegree; ++l) {
    if (sh_coeff_count(l) == static_cast<int>(sh_coeffs.size())) return l;
  }
  fail(ErrorKind::Shape, "sh coefficient count " +
                             std::to_string(sh_coeffs.size()) +
                             " is not (L+1)^2 for L <= 3");
}

void Camera::validate(double tol) const {
  const Mat3 r = rotation();
  if (!((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol) ||
      !(std::abs(r.determinant() - 1.0) <= tol)) {
    fail(ErrorKind::NonRigidPose, "camera rotation block is not a rotation");
  }
  if (!(focal.x() > 0.0 && focal.y() > 0.0)) {
    fail(ErrorKind::Parameter, "camera focal lengths must be positive");
  }
  if (width < 1 || height < 1) {
    fail(ErrorKind::Parameter, "camera image size must be at least 1x1");
  }
}

Vec4 normalize_quaternion(const Vec4& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    fail(ErrorKind::DegenerateRotation, "quaternion has zero norm");
  }
  return q / n;
}

Mat3 quaternion_to_matrix(const Vec4& q_in) {
  const Vec4 q = normalize_quaternion(q_in);
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return r;
}

Mat3 build_covariance(const Vec4& rotation, const Vec3& log_scale) {
  const Mat3 r = quaternion_to_matrix(rotation);
  const Mat3 m = r * log_scale.array().exp().matrix().asDiagonal();
  return m * m.transpose();
}

Mat23 compute_jacobian(const Vec3& p, const Vec2& focal, double near_plane) {
  const double z = p.z();
  if (!(z > near_plane)) {
    fail(ErrorKind::BehindCamera, "point is at or behind the near plane");
  }
  const double inv_z = 1.0 / z;
  const double inv_z2 = inv_z * inv_z;
  Mat23 j;
  j << focal.x() * inv_z, 0.0, -focal.x() * p.x() * inv_z2,
      0.0, focal.y() * inv_z, -focal.y() * p.y() * inv_z2;
  return j;
}

Mat2 project_covariance(const Mat3& cov, const Mat3& w_rot, const Mat23& jac) {
  const Mat23 t = jac * w_rot;
  return t * cov * t.transpose();
}

Vec2 project_point(const Vec3& p, const Vec2& focal, const Vec2& pp) {
  return {focal.x() * p.x() / p.z() + pp.x(), focal.y() * p.y() / p.z() + pp.y()};
}

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792,
                          0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554,
                          -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

}  // namespace

void sh_basis(int degree, const Vec3& dir, double* out, Vec3* grad) {
  if (degree < 0 || degree > kMaxShDegree) {
    fail(ErrorKind::Shape, "sh degree out of range [0, 3]");
  }
  const double x = dir.x(), y = dir.y(), z = dir.z();
  out[0] = kC0;
  if (grad) grad[0].setZero();
  if (degree < 1) return;

  out[1] = -kC1 * y;
  out[2] = kC1 * z;
  out[3] = -kC1 * x;
  if (grad) {
    grad[1] = {0.0, -kC1, 0.0};
    grad[2] = {0.0, 0.0, kC1};
    grad[3] = {-kC1, 0.0, 0.0};
  }
  if (degree < 2) return;

  const double xx = x * x, yy = y * y, zz = z * z;
  out[4] = kC2[0] * x * y;
  out[5] = kC2[1] * y * z;
  out[6] = kC2[2] * (2.0 * zz - xx - yy);
  out[7] = kC2[3] * x * z;
  out[8] = kC2[4] * (xx - yy);
  if (grad) {
    grad[4] = kC2[0] * Vec3(y, x, 0.0);
    grad[5] = kC2[1] * Vec3(0.0, z, y);
    grad[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
    grad[7] = kC2[3] * Vec3(z, 0.0, x);
    grad[8] = kC2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);
  }
  if (degree < 3) return;

  out[9] = kC3[0] * y * (3.0 * xx - yy);
  out[10] = kC3[1] * x * y * z;
  out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  out[14] = kC3[5] * z * (xx - yy);
  out[15] = kC3[6] * x * (xx - 3.0 * yy);
  if (grad) {
    grad[9] = kC3[0] * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
    grad[10] = kC3[1] * Vec3(y * z, x * z, x * y);
    grad[11] = kC3[2] * Vec3(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
    grad[12] = kC3[3] * Vec3(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
    grad[13] = kC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
    grad[14] = kC3[5] * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
    grad[15] = kC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
  }
}

Vec3 eval_sh(const std::vector<Vec3>& sh_coeffs, const Vec3& view_dir,
             int degree) {
  if (degree < 0 || degree > kMaxShDegree ||
      static_cast<int>(sh_coeffs.size()) < sh_coeff_count(degree)) {
    fail(ErrorKind::Shape, "sh coefficient count does not cover degree " +
                               std::to_string(degree));
  }
  double basis[16];
  sh_basis(degree, view_dir, basis);
  Vec3 rgb = Vec3::Zero();
  for (int k = 0; k < sh_coeff_count(degree); ++k) rgb += basis[k] * sh_coeffs[k];
  rgb.array() += 0.5;
  return rgb.cwiseMax(0.0);
}

}  // namespace gs4d
