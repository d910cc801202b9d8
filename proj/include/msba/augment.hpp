#pragma once

#include <vector>

#include "msba/image.hpp"
#include "msba/mat.hpp"
#include "msba/rng.hpp"

namespace msba {

// Per-channel pixel-wise forgery magnitude, entries in [0,1].
struct IntensityMap {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> v;

  IntensityMap() = default;
  IntensityMap(int height, int width, int channels)
      : h(height), w(width), c(channels),
        v(static_cast<size_t>(height) * width * channels, 0.0) {}

  double& at(int y, int x, int ch) { return v[(static_cast<size_t>(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const { return v[(static_cast<size_t>(y) * w + x) * c + ch]; }

  // Single-channel reduction used for supervision targets and exports.
  Mat channel_mean() const;
  double mean() const;
};

struct BlendSpec {
  std::vector<double> alpha;  // simplex over methods
  double lambda = 1.0;        // overall intensity scale
  double beta = 1.0;          // Dirichlet concentration the alpha came from
};

struct SoftLabel {
  std::vector<double> alpha;
  int binary_label = 1;
};

struct MsbaSample {
  Image image;
  SoftLabel label;
  IntensityMap blended_map;
  BlendSpec spec;
};

struct MsbaConfig {
  double beta = 1.0;
  double lambda_min = 0.8;
  double lambda_max = 1.2;
  double min_intensity = 1e-3;   // resample alpha if mean blended map is below
  bool signed_difference = false;  // experimental: keep the sign of the edit
};

// |real - forged| per channel; throws on shape mismatch.
IntensityMap intensity_map(const Image& real, const Image& forged);

// M independent Gamma(beta,1) draws normalized by their sum.
std::vector<double> sample_blend_weights(int num_methods, double beta, Rng& rng);

// Convex combination of maps; alpha must lie on the simplex within 1e-6.
IntensityMap blend_maps(const std::vector<IntensityMap>& maps,
                        const std::vector<double>& alpha);

// Blended image clamp(real - lambda * blended_map), soft label, and the
// pre-clamp blended map.
MsbaSample synthesize(const Image& real, const std::vector<IntensityMap>& maps,
                      const BlendSpec& spec);

// Full augmentation draw: alpha (with minimum-intensity resampling), lambda,
// then synthesize. In signed mode the blend runs on raw differences instead
// of the stored absolute maps.
MsbaSample draw_msba_sample(const Image& real, const std::vector<Image>& forged,
                            const MsbaConfig& cfg, Rng& rng);

// Channel-mean followed by non-overlapping block averages onto an
// (out_h x out_w) grid. Source dimensions must divide evenly.
Mat to_patch_targets(const IntensityMap& map, int out_h, int out_w);
Mat block_mean(const Mat& src, int out_h, int out_w);

}  // namespace msba
