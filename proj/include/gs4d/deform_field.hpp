// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gs4d/gaussian.hpp"
#include "gs4d/rasterizer.hpp"

namespace gs4d {

enum class PlaneAxis : int { XY = 0, XZ = 1, YZ = 2 };
inline constexpr int kPlaneCount = 3;

/// World-axis pair sampled by each plane, in plane order XY, XZ, YZ.
inline constexpr std::array<std::array<int, 2>, 3> kPlaneAxes{{{0, 1}, {0, 2}, {1, 2}}};

struct Bounds {
  Vec3 min = Vec3::Constant(-1.0);
  Vec3 max = Vec3::Constant(1.0);
};

/// Three axis-aligned feature grids. Each channel of each plane is an R x R
/// matrix indexed (row along the plane's first axis, column along its second).
struct TriPlane {
  int resolution = 2;
  int features = 1;
  Bounds bounds;
  std::array<std::vector<Eigen::MatrixXd>, 3> channels;

  TriPlane() = default;
  TriPlane(int resolution, int features, const Bounds& bounds, double fill = 0.0);

  Eigen::MatrixXd& channel(int plane, int c) { return channels[plane][c]; }
  const Eigen::MatrixXd& channel(int plane, int c) const { return channels[plane][c]; }

  void validate() const;
};

/// Four grid nodes and bilinear weights for one plane lookup.
struct PlaneStencil {
  int i0 = 0, j0 = 0;
  double fu = 0.0, fv = 0.0;
  // d(fu)/d(x_a), d(fv)/d(x_b); zero when the coordinate is clamped.
  double dfu = 0.0, dfv = 0.0;
};

std::array<PlaneStencil, 3> triplane_stencils(const TriPlane& planes, const Vec3& x);

/// Concatenated bilinear samples (XY, XZ, YZ), 3F values.
Eigen::VectorXd sample_triplane(const TriPlane& planes, const Vec3& x);

/// (sin(2^0 pi t), cos(2^0 pi t), ..., sin(2^{L-1} pi t), cos(2^{L-1} pi t)).
Eigen::VectorXd freq_encode(double t, int levels);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Output head widths, in head order.
inline constexpr std::array<int, 5> kHeadWidths{3, 4, 3, 1, 3};
inline constexpr int kDeformOutputs = 14;

/// Two ReLU hidden layers followed by five linear heads
/// (center, rotation, log_scale, opacity_logit, sh0).
struct DeformDecoder {
  DenseLayer hidden1;
  DenseLayer hidden2;
  std::array<DenseLayer, 5> heads;

  static DeformDecoder zeros(int input_width, int hidden_width);
  int input_width() const { return static_cast<int>(hidden1.weight.cols()); }
  int hidden_width() const { return static_cast<int>(hidden1.weight.rows()); }
  /// Layers in serialization order: hidden1, hidden2, heads...
  std::array<const DenseLayer*, 7> layers() const;
  std::array<DenseLayer*, 7> layers();
  void validate() const;
};

struct DeformOutput {
  Vec3 d_center = Vec3::Zero();
  Vec4 d_rotation = Vec4::Zero();
  Vec3 d_log_scale = Vec3::Zero();
  double d_opacity_logit = 0.0;
  Vec3 d_sh0 = Vec3::Zero();
};

DeformOutput decode_deformation(const Eigen::VectorXd& features,
                                const Eigen::VectorXd& embedding,
                                const Eigen::VectorXd& t_enc,
                                const DeformDecoder& decoder);

GaussianPrimitive apply_deformation(const GaussianPrimitive& g, const DeformOutput& d);

/// Hyperparameters of the deformable model.
struct ModelConfig {
  int sh_degree = 1;
  int embed_dim = 16;
  int plane_res = 64;
  int plane_features = 8;
  int time_freqs = 4;
  int hidden_width = 256;
  bool freq_enc = true;

  int time_width() const { return freq_enc ? 2 * time_freqs : 0; }
  int decoder_input_width() const { return 3 * plane_features + embed_dim + time_width(); }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Canonical Gaussians plus the deformation field that moves them over time.
struct ModelState {
  ModelConfig config;
  std::vector<GaussianPrimitive> gaussians;
  TriPlane planes;
  DeformDecoder decoder;

  void validate() const;
};

/// Zero-initialized planes and decoder matching `config`.
ModelState empty_model(const ModelConfig& config, const Bounds& bounds);

/// Intermediate values of a batched deformation pass, kept for backward.
struct DeformCache {
  double t = 0.0;
  Eigen::MatrixXd input;   // in x N
  Eigen::MatrixXd hidden1; // H x N, post-ReLU
  Eigen::MatrixXd hidden2; // H x N, post-ReLU
  Eigen::MatrixXd output;  // 14 x N
  std::vector<std::array<PlaneStencil, 3>> stencils;
  std::vector<Vec4> rotation_sum;  // rotation + d_rotation, before normalizing
};

/// Deformed Gaussians at normalized time t for the whole set.
std::vector<GaussianPrimitive> deform_gaussians(const ModelState& state, double t,
                                                DeformCache* cache = nullptr);

/// Gradients flowing out of a batched deformation pass.
struct DeformGrads {
  std::vector<GaussianGrad> canonical;             // includes sampling path for centers
  std::vector<Eigen::VectorXd> embeddings;
  std::array<std::vector<Eigen::MatrixXd>, 3> planes;  // same layout as TriPlane::channels
  std::array<DenseLayer, 7> decoder;                  // serialization order
  double time = 0.0;
};

struct DeformGradOptions {
  bool canonical = true;
  bool decoder = true;
  bool planes = true;
};

/// Chain rule through sample -> decode -> apply given gradients with respect
/// to the deformed Gaussians.
DeformGrads deform_gradients(const ModelState& state, const DeformCache& cache,
                             std::span<const GaussianGrad> upstream,
                             const DeformGradOptions& options = {});

}  // namespace gs4d
