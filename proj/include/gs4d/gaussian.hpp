// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <Eigen/Core>

namespace gs4d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// One splat. Every field is stored in an unconstrained parameterization:
/// the quaternion is normalized on use, scales are logs and opacity is a
/// logit, so any finite value is a valid primitive.
struct GaussianPrimitive {
  Vec3 center = Vec3::Zero();
  Vec4 rotation{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z)
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0.0;
  std::vector<Vec3> sh_coeffs;  // (L+1)^2 RGB triples, band-major
  Eigen::VectorXd embedding;

  double opacity() const;
  Vec3 scale() const { return log_scale.array().exp(); }
  int sh_degree() const;
};

/// Pinhole camera. Pixel (x, y) covers [x, x+1) x [y, y+1); its center is at
/// (x + 0.5, y + 0.5) in the image coordinates the projection produces.
struct Camera {
  Mat4 world_to_camera = Mat4::Identity();
  Vec2 focal{1.0, 1.0};
  Vec2 principal_point{0.0, 0.0};
  int width = 1;
  int height = 1;

  Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
  Vec3 center() const { return -rotation().transpose() * translation(); }

  /// Throws Parameter if the rotation block is not a proper rotation within
  /// `tol`, or focal/size are out of range.
  void validate(double tol = 1e-6) const;
};

double sigmoid(double x);
double logit(double p);

/// Unit quaternion -> rotation matrix. Throws DegenerateRotation on a zero
/// quaternion.
Vec4 normalize_quaternion(const Vec4& q);
Mat3 quaternion_to_matrix(const Vec4& q);

/// R S S^T R^T with S = diag(exp(log_scale)).
Mat3 build_covariance(const Vec4& rotation, const Vec3& log_scale);

/// Local affine approximation of the pinhole projection at a camera-space
/// point. Throws BehindCamera when z <= near_plane.
Mat23 compute_jacobian(const Vec3& center_camera, const Vec2& focal,
                       double near_plane = 1e-6);

/// J W Sigma W^T J^T.
Mat2 project_covariance(const Mat3& cov, const Mat3& w_rot, const Mat23& jac);

/// Pinhole projection of a camera-space point to image coordinates.
Vec2 project_point(const Vec3& center_camera, const Vec2& focal,
                   const Vec2& principal_point);

/// Number of SH coefficients for a given degree.
constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }
inline constexpr int kMaxShDegree = 3;

/// Real SH basis up to `degree` at a unit direction. `out` receives
/// sh_coeff_count(degree) values. If `grad` is non-null it receives the
/// gradient of each basis function with respect to the direction.
void sh_basis(int degree, const Vec3& dir, double* out, Vec3* grad = nullptr);

/// Basis contracted with coefficients, +0.5 offset, clamped at 0 from below.
Vec3 eval_sh(const std::vector<Vec3>& sh_coeffs, const Vec3& view_dir,
             int degree);

}  // namespace gs4d
