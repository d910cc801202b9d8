#pragma once

#include <filesystem>
#include <string>

#include "msba/image.hpp"
#include "msba/mat.hpp"

namespace msba::io {

// 8-bit PNG, 3-channel for images, 1-channel (0/255) for masks.
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_png(const std::filesystem::path& path);

// 16-bit grayscale PNG of a single-channel map; samples are
// clamp(round(value * scale * 65535), 0, 65535).
void write_map_png16(const std::filesystem::path& path, const Mat& map, double scale);
Mat read_map_png16(const std::filesystem::path& path);  // returns raw sample / 65535

// Raw float map file: magic "FIMP", u32 H, W, C (little endian), then
// row-major float32 samples.
void write_fimp(const std::filesystem::path& path, const std::vector<float>& values,
                uint32_t h, uint32_t w, uint32_t c);
std::vector<float> read_fimp(const std::filesystem::path& path, uint32_t& h, uint32_t& w,
                             uint32_t& c);

// In-memory JPEG round trip at the given libjpeg quality (1..100).
Image jpeg_roundtrip(const Image& img, int quality);

}  // namespace msba::io
