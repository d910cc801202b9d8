#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "msba/image.hpp"
#include "msba/manifest.hpp"
#include "msba/rng.hpp"

namespace msba {

struct SyntheticConfig {
  int num_groups = 0;
  int height = 64;
  int width = 64;
  int num_methods = 4;
  uint64_t seed = 0;
  int patch_divisor = 8;  // image sides must divide by the model patch size
};

// Smooth random field with an elliptical face-like region. Values stay inside
// [0.1, 0.92] so that subtractive and additive edits remain visible.
Image synth_real_image(int h, int w, Rng& rng);

// The four synthetic manipulations. All write only inside a seeded random
// ellipse placed in the central face region:
//   0: local coordinate warp, 1: Gaussian blur, 2: additive color shift,
//   3: high-frequency noise texture.
// Mask coverage is kept within [1%, 50%] of the image area.
std::pair<Image, Mask> apply_forgery_method(const Image& image, int method, uint64_t seed);

// Writes images/, masks/ and manifest.jsonl under out_dir. Groups are split
// 8:1:1 into train/val/test (at least one group per split when possible).
// Identical configs yield bit-identical directory trees.
Manifest generate_synthetic_corpus(const SyntheticConfig& config,
                                   const std::filesystem::path& out_dir);

// Separable Gaussian blur with reflected borders, radius = ceil(3*sigma).
Image gaussian_blur(const Image& img, double sigma);

}  // namespace msba
