// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "gs4d/error.hpp"

namespace gs4d {

namespace {

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, 2 * kRadius + 1> window() {
  std::array<double, 2 * kRadius + 1> w{};
  double sum = 0.0;
  for (int k = -kRadius; k <= kRadius; ++k) {
    w[k + kRadius] = std::exp(-(k * k) / (2.0 * kSigma * kSigma));
    sum += w[k + kRadius];
  }
  for (auto& v : w) v /= sum;
  return w;
}

using Plane = std::vector<double>;

// Separable zero-padded blur of one channel.
Plane blur(const Plane& in, int width, int height) {
  static const auto w = window();
  Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < width) acc += w[k + kRadius] * in[static_cast<size_t>(y) * width + xx];
      }
      tmp[static_cast<size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < height) acc += w[k + kRadius] * tmp[static_cast<size_t>(yy) * width + x];
      }
      out[static_cast<size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

Plane channel(const Image& img, int c) {
  Plane p(img.pixel_count());
  for (size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * 3 + c];
  return p;
}

void check_same(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size()) {
    fail(ErrorKind::Shape, "images differ in size");
  }
  if (a.data.empty()) fail(ErrorKind::Shape, "images are empty");
}

// Mean SSIM; writes d SSIM / d a into grad when non-null.
double ssim_impl(const Image& a, const Image& b, Image* grad) {
  check_same(a, b);
  const int w = a.width, h = a.height;
  const size_t n = a.pixel_count();
  const double norm = 1.0 / static_cast<double>(n * 3);
  if (grad) *grad = Image(w, h);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    const Plane x = channel(a, c), y = channel(b, c);
    Plane xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const Plane mx = blur(x, w, h), my = blur(y, w, h);
    const Plane exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);
    Plane d_mu(n), d_exx(n), d_exy(n);
    for (size_t i = 0; i < n; ++i) {
      const double sxx = exx[i] - mx[i] * mx[i];
      const double syy = eyy[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      const double a1 = 2.0 * mx[i] * my[i] + kC1, a2 = 2.0 * sxy + kC2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + kC1, b2 = sxx + syy + kC2;
      const double s = (a1 * a2) / (b1 * b2);
      total += s;
      if (grad) {
        const double bb = b1 * b2;
        d_mu[i] = norm * (2.0 * my[i] * (a2 - a1) / bb - 2.0 * mx[i] * s * (b2 - b1) / bb);
        d_exx[i] = norm * (-s / b2);
        d_exy[i] = norm * (2.0 * a1 / bb);
      }
    }
    if (grad) {
      // The zero-padded symmetric blur is self-adjoint.
      const Plane g_mu = blur(d_mu, w, h), g_exx = blur(d_exx, w, h), g_exy = blur(d_exy, w, h);
      for (size_t i = 0; i < n; ++i) {
        grad->data[i * 3 + c] = g_mu[i] + 2.0 * x[i] * g_exx[i] + y[i] * g_exy[i];
      }
    }
  }
  return total * norm;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  check_same(a, b);
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, nullptr); }

double dssim(const Image& a, const Image& b) { return (1.0 - ssim(a, b)) / 2.0; }

LossValue photometric_loss(const Image& render, const Image& gt, double w_ssim) {
  check_same(render, gt);
  if (!(w_ssim >= 0.0 && w_ssim <= 1.0)) fail(ErrorKind::Parameter, "w_ssim must lie in [0, 1]");
  LossValue out;
  const double inv = 1.0 / static_cast<double>(render.data.size());
  double l1 = 0.0;
  out.grad = Image(render.width, render.height);
  for (size_t i = 0; i < render.data.size(); ++i) {
    const double d = render.data[i] - gt.data[i];
    l1 += std::abs(d);
    out.grad.data[i] = (1.0 - w_ssim) * inv * ((d > 0.0) - (d < 0.0));
  }
  out.value = (1.0 - w_ssim) * l1 * inv;
  if (w_ssim > 0.0) {
    Image g_ssim;
    const double s = ssim_impl(render, gt, &g_ssim);
    out.value += w_ssim * (1.0 - s);
    for (size_t i = 0; i < render.data.size(); ++i) out.grad.data[i] -= w_ssim * g_ssim.data[i];
  }
  return out;
}

}  // namespace gs4d
