#pragma once

#include <cstdint>
#include <vector>

#include "msba/mat.hpp"

namespace msba {

// Interleaved row-major image with unit-interval double samples.
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> data;

  Image() = default;
  Image(int height, int width, int channels)
      : h(height), w(width), c(channels),
        data(static_cast<size_t>(height) * width * channels, 0.0) {}

  double& at(int y, int x, int ch) {
    return data[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  double at(int y, int x, int ch) const {
    return data[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }

  void clamp01();
};

// Single-channel binary mask, values 0 or 1.
struct Mask {
  int h = 0;
  int w = 0;
  std::vector<uint8_t> data;

  Mask() = default;
  Mask(int height, int width) : h(height), w(width), data(static_cast<size_t>(height) * width, 0) {}

  uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * w + x]; }
  uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * w + x]; }
  double area_fraction() const;
};

std::vector<uint8_t> to_bytes(const Image& img);      // round(x*255), clamped
Image from_bytes(const std::vector<uint8_t>& bytes, int h, int w, int c);

double mse(const Image& a, const Image& b);

}  // namespace msba
