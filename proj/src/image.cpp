#include "msba/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msba {

void Image::clamp01() {
  for (double& x : data) x = std::clamp(x, 0.0, 1.0);
}

double Mask::area_fraction() const {
  if (data.empty()) return 0.0;
  size_t on = 0;
  for (uint8_t m : data) on += (m != 0);
  return static_cast<double>(on) / static_cast<double>(data.size());
}

std::vector<uint8_t> to_bytes(const Image& img) {
  std::vector<uint8_t> out(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    const double x = std::clamp(img.data[i], 0.0, 1.0);
    out[i] = static_cast<uint8_t>(std::lround(x * 255.0));
  }
  return out;
}

Image from_bytes(const std::vector<uint8_t>& bytes, int h, int w, int c) {
  if (bytes.size() != static_cast<size_t>(h) * w * c)
    throw std::invalid_argument("from_bytes: size mismatch");
  Image img(h, w, c);
  for (size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

}  // namespace msba
