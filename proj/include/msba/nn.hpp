#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "msba/mat.hpp"
#include "msba/rng.hpp"

namespace msba::nn {

struct Param {
  std::string name;
  Mat value;
};

class ParamSet {
 public:
  int add(const std::string& name, int rows, int cols);
  int index_of(const std::string& name) const;  // -1 when absent
  Param& at(int i) { return params_[i]; }
  const Param& at(int i) const { return params_[i]; }
  int count() const { return static_cast<int>(params_.size()); }
  size_t total_scalars() const;

  // Flat coordinate view across all parameters, for finite differencing.
  double get_flat(size_t k) const;
  void set_flat(size_t k, double v);

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, int> index_;
};

// Per-thread gradient accumulator aligned with a ParamSet.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamSet& ps);
  void zero();
  Mat& grad(int pidx) { return g_[pidx]; }
  const Mat& grad(int pidx) const { return g_[pidx]; }
  void accumulate(const GradBuffer& other);
  void scale(double s);
  size_t count() const { return g_.size(); }
  double get_flat(size_t k) const;

 private:
  std::vector<Mat> g_;
};

using Ref = int;

// Define-by-run reverse-mode tape over Mat values, double precision.
// A tape is single-threaded; use one per worker.
class Tape {
 public:
  explicit Tape(GradBuffer* grads = nullptr);

  void reset();
  const Mat& val(Ref r) const { return *nodes_[r].val; }
  Mat& grad(Ref r) { return nodes_[r].grad; }

  // Leaves.
  Ref input(Mat m);                                  // owned constant
  Ref input_ref(const Mat* m);                       // external constant
  Ref input_grad(const Mat* m, Mat* grad_sink);      // external, grads accumulated
  Ref param(const ParamSet& ps, int pidx);

  // Ops.
  Ref add(Ref a, Ref b);
  Ref scale(Ref a, double s);
  Ref mul(Ref a, Ref b);                             // elementwise, same shape
  Ref matmul(Ref a, Ref b);
  Ref matmul_bt(Ref a, Ref b);                       // a * b^T
  Ref linear(Ref x, Ref w, Ref b);                   // x*w + bias row
  Ref layernorm(Ref x, Ref gain, Ref bias, double eps = 1e-8);
  Ref gelu(Ref x);
  Ref sigmoid(Ref x);
  Ref softmax_rows(Ref x);
  Ref embedding(Ref table, std::vector<int> ids);
  Ref slice_rows(Ref x, int r0, int r1);
  Ref concat_rows(Ref a, Ref b);
  Ref mean_rows(Ref x);                              // 1 x cols
  // Fused multi-head self-attention; when mask_last_key is set no query may
  // attend to the final token. Keys carry no bias (softmax is invariant to
  // per-key shifts, which would leave a dead parameter).
  Ref mha(Ref x, Ref wq, Ref bq, Ref wk, Ref wv, Ref bv, Ref wo, Ref bo, int heads,
          bool mask_last_key = false);
  // Transposed conv, kernel 4, stride 2, pad 1; x is (h*w) x cin row-major
  // over the grid, weight is cin x (16*cout) with column tap*cout+co per
  // kernel tap. Output is (2h*2w) x cout.
  Ref conv_transpose2d(Ref x, Ref w, Ref b, int in_h, int in_w);

  // Scalar heads (1x1 outputs).
  Ref cosine_mean(Ref p, Ref prompts);               // mean cosine vs each row
  Ref bce(Ref p, double y, double eps = 1e-7);
  Ref smooth_l1(Ref pred, Ref target);
  Ref kl_div(const std::vector<double>& alpha, Ref alpha_hat, double eps = 1e-8);
  Ref weighted_sum(const std::vector<Ref>& terms, const std::vector<double>& weights);

  void backward(Ref loss, double seed_grad = 1.0);
  // Backward from several nodes at once with injected output gradients.
  void backward_multi(const std::vector<std::pair<Ref, const Mat*>>& seeds);

 private:
  struct Node {
    Mat owned;
    const Mat* val = nullptr;
    Mat grad;
    std::function<void(Tape&)> back;
  };

  Ref push_value(Mat m, std::function<void(Tape&)> back);
  Ref push_external(const Mat* m, std::function<void(Tape&)> back);

  // deque keeps node addresses stable, so owned-value pointers survive growth
  std::deque<Node> nodes_;
  GradBuffer* grads_ = nullptr;

  friend struct TapeAccess;
};

struct AdamW {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  std::vector<Mat> m1, m2;

  void init(const ParamSet& ps);
  // decay_mask marks parameters subject to decoupled weight decay.
  void step(ParamSet& ps, const GradBuffer& grads, double lr, double weight_decay,
            const std::vector<char>& decay_mask);
};

void trunc_normal_init(Mat& m, double stddev, Rng& rng);  // resampled at 2 sigma
// Width-scaled init for linear maps, stddev sqrt(2/(fan_in+fan_out)).
void xavier_init(Mat& m, Rng& rng);

// Cosine decay from lr_init (first step) to lr_final (last step), inclusive.
double cosine_lr(int step, int total_steps, double lr_init, double lr_final);

}  // namespace msba::nn
