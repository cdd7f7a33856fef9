// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gs4d/gaussian.hpp"
#include "gs4d/image.hpp"

namespace gs4d {

struct RenderSettings {
  int width = 1;
  int height = 1;
  int tile_size = 16;
  double near_plane = 0.01;
  Vec3 background = Vec3::Zero();
  double alpha_cutoff = 1.0 / 255.0;
  double transmittance_floor = 1e-4;
  double max_alpha = 0.99;
  /// Added to both diagonal entries of the projected 2x2 covariance.
  double low_pass = 0.3;
  /// Footprint radius as a multiple of the major standard deviation. 0 picks
  /// the opacity-aware radius beyond which alpha < alpha_cutoff, which makes
  /// the footprint cull exact.
  double cull_sigma = 0.0;
  /// Active SH degree; -1 uses each Gaussian's stored degree.
  int sh_degree = -1;

  static RenderSettings for_camera(const Camera& camera);
  void validate() const;
};

struct RenderOutput {
  Image color;
  std::vector<double> final_transmittance;  // height * width
  std::vector<int> contributor_count;       // height * width
  /// Fingerprint of the inputs; the backward pass checks it.
  std::uint64_t scene_hash = 0;
};

/// Gradient of a scalar loss with respect to one Gaussian's parameters.
struct GaussianGrad {
  Vec3 center = Vec3::Zero();
  Vec4 rotation = Vec4::Zero();
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0.0;
  std::vector<Vec3> sh_coeffs;
  /// Screen-space gradient of the projected mean; drives densification.
  Vec2 mean2d = Vec2::Zero();
  /// Projected in front of the camera with a nonempty footprint.
  bool visible = false;
};

/// One composited splat at a pixel, in compositing order.
struct SplatSample {
  int index = -1;
  double alpha = 0.0;
  double transmittance = 1.0;  // before this splat
};

RenderOutput rasterize(std::span<const GaussianPrimitive> gaussians,
                       const Camera& camera, const RenderSettings& settings);

/// Gradients of L = sum(upstream * color). `forward` must be the output of
/// rasterize() on the same inputs, otherwise InconsistentState is thrown.
std::vector<GaussianGrad> rasterize_backward(
    std::span<const GaussianPrimitive> gaussians, const Camera& camera,
    const RenderSettings& settings, const RenderOutput& forward,
    const Image& upstream);

/// The compositing trace the forward pass produces at one pixel.
std::vector<SplatSample> trace_pixel(std::span<const GaussianPrimitive> gaussians,
                                     const Camera& camera,
                                     const RenderSettings& settings, int x, int y);

std::uint64_t scene_fingerprint(std::span<const GaussianPrimitive> gaussians,
                                const Camera& camera,
                                const RenderSettings& settings);

}  // namespace gs4d
