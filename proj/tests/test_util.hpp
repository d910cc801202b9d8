#pragma once

#include <functional>
#include <thread>
#include <vector>

#include "msba/model.hpp"
#include "msba/nn.hpp"
#include "msba/rng.hpp"

namespace msba::testutil {

// d_v=16, depth=2, 4x4 patch grid (32x32 at P=8), C=M=4.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.patch_size = 8;
  c.image_h = 32;
  c.image_w = 32;
  c.d_v = 16;
  c.d_t = 8;
  c.depth = 2;
  c.heads = 2;
  c.mlp_ratio = 4;
  c.mip_hidden = 16;
  c.num_fake_prompts = 4;
  c.decoder_channels = 4;
  c.num_methods = 4;
  c.vocab_size = 512;
  c.text_blocks = 2;
  c.text_heads = 2;
  return c;
}

inline Mat random_mat(int rows, int cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (double& x : m.v) x = scale * rng.uniform(-1.0, 1.0);
  return m;
}

// Max relative FD error of a scalar function over a registered ParamSet,
// against analytic gradients supplied per flat coordinate.
inline double fd_check_params(nn::ParamSet& ps,
                              const std::function<double()>& eval_loss,
                              const std::function<double(size_t)>& analytic_flat,
                              double eps = 1e-5, size_t stride = 1) {
  double max_rel = 0.0;
  const size_t total = ps.total_scalars();
  for (size_t k = 0; k < total; k += stride) {
    const double orig = ps.get_flat(k);
    ps.set_flat(k, orig + eps);
    const double fp = eval_loss();
    ps.set_flat(k, orig - eps);
    const double fm = eval_loss();
    ps.set_flat(k, orig);
    const double gn = (fp - fm) / (2.0 * eps);
    const double ga = analytic_flat(k);
    const double rel = std::fabs(ga - gn) / std::max(1e-8, std::fabs(ga) + std::fabs(gn));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace msba::testutil
