// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#include "gs4d/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <png.h>

#include "gs4d/error.hpp"

namespace gs4d {

Image to_linear(const ImageU8& img) {
  Image out(img.width, img.height);
  for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / 255.0;
  return out;
}

ImageU8 quantize(const Image& img) {
  ImageU8 out{img.width, img.height, std::vector<std::uint8_t>(img.data.size())};
  for (size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::clamp(img.data[i], 0.0, 1.0);
    out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

ImageU8 read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    fail(ErrorKind::Io, "cannot read png " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  ImageU8 out{static_cast<int>(image.width), static_cast<int>(image.height), {}};
  out.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorKind::Io, "cannot decode png " + path.string() + ": " + image.message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.data.data(), 0, nullptr)) {
    fail(ErrorKind::Io, "cannot write png " + path.string() + ": " + image.message);
  }
}

void write_f32(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string());
  for (double v : values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    const char le[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                        static_cast<char>((bits >> 16) & 0xff), static_cast<char>(bits >> 24)};
    out.write(le, 4);
  }
}

}  // namespace gs4d
