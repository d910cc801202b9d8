#include "msba/perturb.hpp"

#include <algorithm>
#include <stdexcept>

#include "msba/imageio.hpp"
#include "msba/rng.hpp"
#include "msba/synth.hpp"

namespace msba {

std::string to_string(PerturbKind k) {
  switch (k) {
    case PerturbKind::gaussian_blur: return "gaussian_blur";
    case PerturbKind::gaussian_noise: return "gaussian_noise";
    case PerturbKind::jpeg_compression: return "jpeg_compression";
    case PerturbKind::color_saturation: return "color_saturation";
    case PerturbKind::color_contrast: return "color_contrast";
  }
  return "gaussian_blur";
}

PerturbKind perturb_kind_from_string(const std::string& s) {
  if (s == "gaussian_blur") return PerturbKind::gaussian_blur;
  if (s == "gaussian_noise") return PerturbKind::gaussian_noise;
  if (s == "jpeg_compression") return PerturbKind::jpeg_compression;
  if (s == "color_saturation") return PerturbKind::color_saturation;
  if (s == "color_contrast") return PerturbKind::color_contrast;
  throw std::invalid_argument("unknown perturbation kind: " + s);
}

PerturbationSpec make_perturbation(PerturbKind kind, int level) {
  if (level < 0 || level > 5)
    throw std::invalid_argument("perturbation level out of range: " + std::to_string(level));
  static const double blur_sigma[6] = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
  static const double noise_sigma[6] = {0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
  static const double jpeg_quality[6] = {100, 90, 70, 50, 30, 10};
  static const double factor[6] = {1.0, 1.1, 1.2, 1.3, 1.4, 1.5};
  double p = 0.0;
  switch (kind) {
    case PerturbKind::gaussian_blur: p = blur_sigma[level]; break;
    case PerturbKind::gaussian_noise: p = noise_sigma[level]; break;
    case PerturbKind::jpeg_compression: p = jpeg_quality[level]; break;
    case PerturbKind::color_saturation: p = factor[level]; break;
    case PerturbKind::color_contrast: p = factor[level]; break;
  }
  return {kind, level, p};
}

Image perturb(const Image& image, const PerturbationSpec& spec, uint64_t seed) {
  if (spec.level == 0) return image;
  if (spec.level < 1 || spec.level > 5)
    throw std::invalid_argument("perturbation level out of range");

  switch (spec.kind) {
    case PerturbKind::gaussian_blur: {
      Image out = gaussian_blur(image, spec.parameter);
      out.clamp01();
      return out;
    }
    case PerturbKind::gaussian_noise: {
      Rng rng(hash_combine(seed, 0x6e6f6973ull));
      Image out = image;
      for (double& x : out.data) x = std::clamp(x + spec.parameter * rng.normal(), 0.0, 1.0);
      return out;
    }
    case PerturbKind::jpeg_compression:
      return io::jpeg_roundtrip(image, static_cast<int>(spec.parameter));
    case PerturbKind::color_saturation: {
      Image out = image;
      if (image.c != 3) throw std::invalid_argument("saturation expects RGB");
      for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x) {
          // Rec.601 luma as the gray pivot.
          const double gray = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) +
                              0.114 * image.at(y, x, 2);
          for (int ch = 0; ch < 3; ++ch)
            out.at(y, x, ch) =
                std::clamp(gray + spec.parameter * (image.at(y, x, ch) - gray), 0.0, 1.0);
        }
      return out;
    }
    case PerturbKind::color_contrast: {
      Image out = image;
      for (double& x : out.data) x = std::clamp(0.5 + spec.parameter * (x - 0.5), 0.0, 1.0);
      return out;
    }
  }
  throw std::invalid_argument("unknown perturbation kind");
}

}  // namespace msba
