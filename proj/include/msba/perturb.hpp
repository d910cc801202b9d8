#pragma once

#include <cstdint>
#include <string>

#include "msba/image.hpp"

namespace msba {

enum class PerturbKind {
  gaussian_blur,
  gaussian_noise,
  jpeg_compression,
  color_saturation,
  color_contrast,
};

std::string to_string(PerturbKind k);
PerturbKind perturb_kind_from_string(const std::string& s);

struct PerturbationSpec {
  PerturbKind kind;
  int level;         // 0 = identity, 1..5 per the level tables
  double parameter;  // resolved from kind + level
};

// Level tables (index 1..5):
//   blur sigma        0.5 1.0 1.5 2.0 2.5
//   noise sigma       0.01 0.02 0.03 0.04 0.05
//   jpeg quality      90 70 50 30 10
//   saturation factor 1.1 1.2 1.3 1.4 1.5
//   contrast factor   1.1 1.2 1.3 1.4 1.5
PerturbationSpec make_perturbation(PerturbKind kind, int level);

// Deterministic given (image, seed); only gaussian_noise consumes the seed.
Image perturb(const Image& image, const PerturbationSpec& spec, uint64_t seed);

}  // namespace msba
