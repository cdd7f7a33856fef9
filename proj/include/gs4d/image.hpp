// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gs4d {

/// Row-major interleaved RGB image with double channels.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // height * width * 3

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

  double& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

/// 8-bit RGB image, the on-disk representation of dataset frames.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  bool operator==(const ImageU8&) const = default;
};

/// Linear [0,1] conversion by /255, no gamma.
Image to_linear(const ImageU8& img);
/// Clamp to [0,1] and round to nearest 8-bit code.
ImageU8 quantize(const Image& img);

ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& img);

/// Little-endian row-major f32 dump of a scalar buffer.
void write_f32(const std::filesystem::path& path, std::span<const double> values);

}  // namespace gs4d
