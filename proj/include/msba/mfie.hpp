#pragma once

#include "msba/mat.hpp"
#include "msba/nn.hpp"
#include "msba/rng.hpp"

namespace msba::mfie {

struct DecoderConfig {
  int width = 128;      // feature width, matches the visual width
  int channels = 4;     // C pattern channels
  int num_methods = 4;  // M, width of the blend-weight head
};

// Parameter indices inside the shared ParamSet.
struct Params {
  DecoderConfig cfg;
  int dec1_w, dec1_b, ln1_g, ln1_b;
  int dec2_w, dec2_b, ln2_g, ln2_b;
  int int_w, int_b;      // per-pixel channel logits
  int wgt_w, wgt_b;      // channel weights from the class token
  int alpha_w, alpha_b;  // blend weights from the class token (zero init)
};

Params add_params(nn::ParamSet& ps, const DecoderConfig& cfg, Rng& rng);

// Two stride-2 transposed convolutions (kernel 4, pad 1), each followed by
// per-pixel layernorm and GELU. patches is (grid_h*grid_w) x width; the
// output covers a (4*grid_h) x (4*grid_w) grid.
nn::Ref build_decode(nn::Tape& t, const Params& p, const nn::ParamSet& ps, nn::Ref patches,
                     int grid_h, int grid_w);

struct IntensityGraph {
  nn::Ref channel_maps;    // (H'*W') x C, rows on the simplex
  nn::Ref channel_weights; // 1 x C simplex
  nn::Ref m_all;           // (H'*W') x 1 in [0,1]
};

IntensityGraph build_intensity(nn::Tape& t, const Params& p, const nn::ParamSet& ps,
                               nn::Ref fde, nn::Ref cls);

nn::Ref build_blend_weights(nn::Tape& t, const Params& p, const nn::ParamSet& ps,
                            nn::Ref cls);  // 1 x M simplex

// Plain-value results for evaluation and export paths.
struct IntensityPrediction {
  Mat channel_maps;     // (H'*W') x C
  Mat channel_weights;  // 1 x C
  Mat m_all;            // H' x W'
};

struct WeightPrediction {
  std::vector<double> alpha_hat;
};

}  // namespace msba::mfie
