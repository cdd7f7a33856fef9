// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gs4d/image.hpp"

namespace gs4d {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels; identical images give kPsnrCap.
double psnr(const Image& a, const Image& b);

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, zero padding at the borders.
double ssim(const Image& a, const Image& b);

/// (1 - SSIM) / 2.
double dssim(const Image& a, const Image& b);

struct LossValue {
  double value = 0.0;
  Image grad;  // d value / d render
};

/// (1 - w) mean|render - gt| + w (1 - SSIM).
LossValue photometric_loss(const Image& render, const Image& gt, double w_ssim);

}  // namespace gs4d
