#include "msba/mfie.hpp"

#include <stdexcept>

namespace msba::mfie {

Params add_params(nn::ParamSet& ps, const DecoderConfig& cfg, Rng& rng) {
  if (cfg.channels < 1) throw std::invalid_argument("decoder channels must be >= 1");
  const int d = cfg.width;
  Params p;
  p.cfg = cfg;
  p.dec1_w = ps.add("mfie.dec1.w", d, 16 * d);
  p.dec1_b = ps.add("mfie.dec1.b", 1, d);
  p.ln1_g = ps.add("mfie.ln1.gain", 1, d);
  p.ln1_b = ps.add("mfie.ln1.bias", 1, d);
  p.dec2_w = ps.add("mfie.dec2.w", d, 16 * d);
  p.dec2_b = ps.add("mfie.dec2.b", 1, d);
  p.ln2_g = ps.add("mfie.ln2.gain", 1, d);
  p.ln2_b = ps.add("mfie.ln2.bias", 1, d);
  p.int_w = ps.add("mfie.intensity.w", d, cfg.channels);
  p.int_b = ps.add("mfie.intensity.b", 1, cfg.channels);
  p.wgt_w = ps.add("mfie.weights.w", d, cfg.channels);
  p.wgt_b = ps.add("mfie.weights.b", 1, cfg.channels);
  p.alpha_w = ps.add("mfie.alpha.w", d, cfg.num_methods);
  p.alpha_b = ps.add("mfie.alpha.b", 1, cfg.num_methods);

  nn::xavier_init(ps.at(p.dec1_w).value, rng);
  nn::xavier_init(ps.at(p.dec2_w).value, rng);
  nn::xavier_init(ps.at(p.int_w).value, rng);
  nn::xavier_init(ps.at(p.wgt_w).value, rng);
  // alpha head stays zero so training starts from uniform blend weights
  for (double& x : ps.at(p.ln1_g).value.v) x = 1.0;
  for (double& x : ps.at(p.ln2_g).value.v) x = 1.0;
  return p;
}

nn::Ref build_decode(nn::Tape& t, const Params& p, const nn::ParamSet& ps, nn::Ref patches,
                     int grid_h, int grid_w) {
  if (t.val(patches).rows != grid_h * grid_w)
    throw std::invalid_argument("decode: patch count does not match grid");
  nn::Ref x = t.conv_transpose2d(patches, t.param(ps, p.dec1_w), t.param(ps, p.dec1_b),
                                 grid_h, grid_w);
  x = t.layernorm(x, t.param(ps, p.ln1_g), t.param(ps, p.ln1_b));
  x = t.gelu(x);
  x = t.conv_transpose2d(x, t.param(ps, p.dec2_w), t.param(ps, p.dec2_b), 2 * grid_h,
                         2 * grid_w);
  x = t.layernorm(x, t.param(ps, p.ln2_g), t.param(ps, p.ln2_b));
  return t.gelu(x);
}

IntensityGraph build_intensity(nn::Tape& t, const Params& p, const nn::ParamSet& ps,
                               nn::Ref fde, nn::Ref cls) {
  IntensityGraph g;
  g.channel_maps = t.softmax_rows(t.linear(fde, t.param(ps, p.int_w), t.param(ps, p.int_b)));
  g.channel_weights =
      t.softmax_rows(t.linear(cls, t.param(ps, p.wgt_w), t.param(ps, p.wgt_b)));
  g.m_all = t.matmul_bt(g.channel_maps, g.channel_weights);
  return g;
}

nn::Ref build_blend_weights(nn::Tape& t, const Params& p, const nn::ParamSet& ps,
                            nn::Ref cls) {
  return t.softmax_rows(t.linear(cls, t.param(ps, p.alpha_w), t.param(ps, p.alpha_b)));
}

}  // namespace msba::mfie
