#include "msba/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msba {

Mat IntensityMap::channel_mean() const {
  Mat m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int ch = 0; ch < c; ++ch) s += at(y, x, ch);
      m.at(y, x) = s / c;
    }
  return m;
}

double IntensityMap::mean() const {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

IntensityMap intensity_map(const Image& real, const Image& forged) {
  if (!real.same_shape(forged)) throw std::invalid_argument("intensity_map: shape mismatch");
  IntensityMap m(real.h, real.w, real.c);
  for (size_t i = 0; i < real.data.size(); ++i) m.v[i] = std::fabs(real.data[i] - forged.data[i]);
  return m;
}

std::vector<double> sample_blend_weights(int num_methods, double beta, Rng& rng) {
  if (num_methods < 1) throw std::invalid_argument("sample_blend_weights: M must be >= 1");
  if (beta <= 0.0) throw std::invalid_argument("sample_blend_weights: beta must be > 0");
  std::vector<double> alpha(num_methods);
  for (int attempt = 0; attempt < 64; ++attempt) {
    double sum = 0.0;
    for (double& a : alpha) {
      a = rng.gamma(beta);
      sum += a;
    }
    if (sum > 1e-300) {
      for (double& a : alpha) a /= sum;
      return alpha;
    }
  }
  throw std::runtime_error("sample_blend_weights: degenerate gamma draws");
}

static void check_simplex(const std::vector<double>& alpha, double tol) {
  double sum = 0.0;
  for (double a : alpha) {
    if (a < -tol) throw std::invalid_argument("alpha has negative component");
    sum += a;
  }
  if (std::fabs(sum - 1.0) > tol) throw std::invalid_argument("alpha does not sum to 1");
}

IntensityMap blend_maps(const std::vector<IntensityMap>& maps,
                        const std::vector<double>& alpha) {
  if (maps.empty() || maps.size() != alpha.size())
    throw std::invalid_argument("blend_maps: need |maps| == |alpha| >= 1");
  check_simplex(alpha, 1e-6);
  const IntensityMap& first = maps.front();
  IntensityMap out(first.h, first.w, first.c);
  for (size_t i = 1; i < maps.size(); ++i)
    if (maps[i].h != first.h || maps[i].w != first.w || maps[i].c != first.c)
      throw std::invalid_argument("blend_maps: map shape mismatch");
  for (size_t k = 0; k < maps.size(); ++k) {
    const double a = alpha[k];
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += a * maps[k].v[i];
  }
  return out;
}

MsbaSample synthesize(const Image& real, const std::vector<IntensityMap>& maps,
                      const BlendSpec& spec) {
  IntensityMap blended = blend_maps(maps, spec.alpha);
  if (blended.h != real.h || blended.w != real.w || blended.c != real.c)
    throw std::invalid_argument("synthesize: map/image shape mismatch");
  MsbaSample s;
  s.image = real;
  for (size_t i = 0; i < s.image.data.size(); ++i)
    s.image.data[i] = std::clamp(real.data[i] - spec.lambda * blended.v[i], 0.0, 1.0);
  s.label.alpha = spec.alpha;
  s.label.binary_label = 1;
  s.blended_map = std::move(blended);
  s.spec = spec;
  return s;
}

MsbaSample draw_msba_sample(const Image& real, const std::vector<Image>& forged,
                            const MsbaConfig& cfg, Rng& rng) {
  if (forged.empty()) throw std::invalid_argument("draw_msba_sample: no forged images");
  std::vector<IntensityMap> maps;
  maps.reserve(forged.size());
  for (const Image& f : forged) maps.push_back(intensity_map(real, f));

  BlendSpec spec;
  spec.beta = cfg.beta;
  IntensityMap blended;
  for (int attempt = 0; attempt < 16; ++attempt) {
    spec.alpha = sample_blend_weights(static_cast<int>(maps.size()), cfg.beta, rng);
    blended = blend_maps(maps, spec.alpha);
    if (blended.mean() >= cfg.min_intensity) break;
  }
  spec.lambda = rng.uniform(cfg.lambda_min, cfg.lambda_max);

  if (!cfg.signed_difference) {
    MsbaSample s;
    s.image = real;
    for (size_t i = 0; i < s.image.data.size(); ++i)
      s.image.data[i] = std::clamp(real.data[i] - spec.lambda * blended.v[i], 0.0, 1.0);
    s.label.alpha = spec.alpha;
    s.label.binary_label = 1;
    s.blended_map = std::move(blended);
    s.spec = spec;
    return s;
  }

  // Signed mode blends raw differences, which reproduces the forged content
  // exactly at one-hot alpha and lambda 1. The supervision map stays absolute.
  MsbaSample s;
  s.image = real;
  for (size_t i = 0; i < s.image.data.size(); ++i) {
    double d = 0.0;
    for (size_t k = 0; k < forged.size(); ++k)
      d += spec.alpha[k] * (real.data[i] - forged[k].data[i]);
    s.image.data[i] = std::clamp(real.data[i] - spec.lambda * d, 0.0, 1.0);
  }
  s.label.alpha = spec.alpha;
  s.label.binary_label = 1;
  s.blended_map = std::move(blended);
  s.spec = spec;
  return s;
}

Mat block_mean(const Mat& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1 || src.rows % out_h != 0 || src.cols % out_w != 0)
    throw std::invalid_argument("block_mean: grid does not divide source");
  const int by = src.rows / out_h;
  const int bx = src.cols / out_w;
  Mat out(out_h, out_w);
  for (int i = 0; i < out_h; ++i)
    for (int j = 0; j < out_w; ++j) {
      double s = 0.0;
      for (int y = 0; y < by; ++y)
        for (int x = 0; x < bx; ++x) s += src.at(i * by + y, j * bx + x);
      out.at(i, j) = s / (by * bx);
    }
  return out;
}

Mat to_patch_targets(const IntensityMap& map, int out_h, int out_w) {
  return block_mean(map.channel_mean(), out_h, out_w);
}

}  // namespace msba
