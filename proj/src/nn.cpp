#include "msba/nn.hpp"

#include <malloc.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace msba::nn {

namespace {

// Tape workloads allocate/free large activation buffers every sample; keep
// them on the free lists instead of round-tripping through mmap.
struct AllocatorTuning {
  AllocatorTuning() {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  }
};

}  // namespace

int ParamSet::add(const std::string& name, int rows, int cols) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  const int idx = static_cast<int>(params_.size());
  params_.push_back({name, Mat(rows, cols)});
  index_[name] = idx;
  return idx;
}

int ParamSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

size_t ParamSet::total_scalars() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

double ParamSet::get_flat(size_t k) const {
  for (const auto& p : params_) {
    if (k < p.value.size()) return p.value.v[k];
    k -= p.value.size();
  }
  throw std::out_of_range("flat parameter index");
}

void ParamSet::set_flat(size_t k, double v) {
  for (auto& p : params_) {
    if (k < p.value.size()) {
      p.value.v[k] = v;
      return;
    }
    k -= p.value.size();
  }
  throw std::out_of_range("flat parameter index");
}

GradBuffer::GradBuffer(const ParamSet& ps) {
  g_.reserve(ps.count());
  for (int i = 0; i < ps.count(); ++i) g_.emplace_back(ps.at(i).value.rows, ps.at(i).value.cols);
}

void GradBuffer::zero() {
  for (auto& m : g_) m.zero();
}

void GradBuffer::accumulate(const GradBuffer& other) {
  for (size_t i = 0; i < g_.size(); ++i) add_inplace(g_[i], other.g_[i]);
}

void GradBuffer::scale(double s) {
  for (auto& m : g_)
    for (double& x : m.v) x *= s;
}

double GradBuffer::get_flat(size_t k) const {
  for (const auto& m : g_) {
    if (k < m.size()) return m.v[k];
    k -= m.size();
  }
  throw std::out_of_range("flat gradient index");
}

void Tape::reset() { nodes_.clear(); }

Tape::Tape(GradBuffer* grads) : grads_(grads) {
  static AllocatorTuning tuning;
  (void)tuning;
}

Ref Tape::push_value(Mat m, std::function<void(Tape&)> back) {
  Node n;
  n.owned = std::move(m);
  n.val = &n.owned;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  // owned moved into the vector; re-point val at its final home
  nodes_.back().val = &nodes_.back().owned;
  return static_cast<Ref>(nodes_.size() - 1);
}

Ref Tape::push_external(const Mat* m, std::function<void(Tape&)> back) {
  Node n;
  n.val = m;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Ref>(nodes_.size() - 1);
}

Ref Tape::input(Mat m) { return push_value(std::move(m), nullptr); }

Ref Tape::input_ref(const Mat* m) { return push_external(m, nullptr); }

Ref Tape::input_grad(const Mat* m, Mat* grad_sink) {
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_external(m, [r, grad_sink](Tape& t) {
    if (grad_sink) add_inplace(*grad_sink, t.nodes_[r].grad);
  });
}

Ref Tape::param(const ParamSet& ps, int pidx) {
  const Ref r = static_cast<Ref>(nodes_.size());
  GradBuffer* gb = grads_;
  return push_external(&ps.at(pidx).value, [r, pidx, gb](Tape& t) {
    if (gb) add_inplace(gb->grad(pidx), t.nodes_[r].grad);
  });
}

Ref Tape::add(Ref a, Ref b) {
  Mat out = val(a);
  add_inplace(out, val(b));
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, a, b](Tape& t) {
    add_inplace(t.nodes_[a].grad, t.nodes_[r].grad);
    add_inplace(t.nodes_[b].grad, t.nodes_[r].grad);
  });
}

Ref Tape::scale(Ref a, double s) {
  Mat out = val(a);
  for (double& x : out.v) x *= s;
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, a, s](Tape& t) {
    add_scaled_inplace(t.nodes_[a].grad, t.nodes_[r].grad, s);
  });
}

Ref Tape::mul(Ref a, Ref b) {
  const Mat& av = val(a);
  const Mat& bv = val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("mul: shape mismatch");
  Mat out = av;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= bv.v[i];
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, a, b](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    const Mat& av = *t.nodes_[a].val;
    const Mat& bv = *t.nodes_[b].val;
    for (size_t i = 0; i < g.v.size(); ++i) {
      t.nodes_[a].grad.v[i] += g.v[i] * bv.v[i];
      t.nodes_[b].grad.v[i] += g.v[i] * av.v[i];
    }
  });
}

Ref Tape::matmul(Ref a, Ref b) {
  Mat out;
  msba::matmul(val(a), val(b), out);
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, a, b](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    matmul_bt_acc(g, *t.nodes_[b].val, t.nodes_[a].grad);
    matmul_at_acc(*t.nodes_[a].val, g, t.nodes_[b].grad);
  });
}

Ref Tape::matmul_bt(Ref a, Ref b) {
  Mat out;
  msba::matmul_bt(val(a), val(b), out);
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, a, b](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    matmul_acc(g, *t.nodes_[b].val, t.nodes_[a].grad);
    matmul_at_acc(g, *t.nodes_[a].val, t.nodes_[b].grad);
  });
}

Ref Tape::linear(Ref x, Ref w, Ref b) {
  Mat out;
  msba::matmul(val(x), val(w), out);
  add_row_broadcast(out, val(b));
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, x, w, b](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    matmul_bt_acc(g, *t.nodes_[w].val, t.nodes_[x].grad);
    matmul_at_acc(*t.nodes_[x].val, g, t.nodes_[w].grad);
    Mat& gb = t.nodes_[b].grad;
    for (int i = 0; i < g.rows; ++i) axpy(1.0, g.row(i), gb.row(0), g.cols);
  });
}

namespace {
struct LnCache {
  Mat xhat;
  std::vector<double> inv_std;
};
}  // namespace

Ref Tape::layernorm(Ref x, Ref gain, Ref bias, double eps) {
  const Mat& xv = val(x);
  const Mat& gv = val(gain);
  const Mat& bv = val(bias);
  if (gv.cols != xv.cols || bv.cols != xv.cols)
    throw std::invalid_argument("layernorm: width mismatch");
  auto cache = std::make_shared<LnCache>();
  cache->xhat.resize(xv.rows, xv.cols);
  cache->inv_std.resize(xv.rows);

  Mat out(xv.rows, xv.cols);
  const int n = xv.cols;
  for (int i = 0; i < xv.rows; ++i) {
    const double* row = xv.row(i);
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += row[j];
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    cache->inv_std[i] = inv;
    for (int j = 0; j < n; ++j) {
      const double xh = (row[j] - mu) * inv;
      cache->xhat.at(i, j) = xh;
      out.at(i, j) = xh * gv.v[j] + bv.v[j];
    }
  }
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, x, gain, bias, cache](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    const Mat& gv = *t.nodes_[gain].val;
    Mat& gx = t.nodes_[x].grad;
    Mat& gg = t.nodes_[gain].grad;
    Mat& gb = t.nodes_[bias].grad;
    const int n = g.cols;
    for (int i = 0; i < g.rows; ++i) {
      const double* grow = g.row(i);
      const double* xh = cache->xhat.row(i);
      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
      for (int j = 0; j < n; ++j) {
        const double dxh = grow[j] * gv.v[j];
        mean_dxh += dxh;
        mean_dxh_xh += dxh * xh[j];
        gg.v[j] += grow[j] * xh[j];
        gb.v[j] += grow[j];
      }
      mean_dxh /= n;
      mean_dxh_xh /= n;
      const double inv = cache->inv_std[i];
      double* gxr = gx.row(i);
      for (int j = 0; j < n; ++j) {
        const double dxh = grow[j] * gv.v[j];
        gxr[j] += inv * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
      }
    }
  });
}

namespace {
// QuickGELU gate, the cheap smooth approximation used by CLIP-style encoders
constexpr double kGeluSlope = 1.702;
inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Ref Tape::gelu(Ref x) {
  Mat out = val(x);
  for (double& v : out.v) v = v * sigmoid_scalar(kGeluSlope * v);
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, x](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    const Mat& xv = *t.nodes_[x].val;
    Mat& gx = t.nodes_[x].grad;
    for (size_t i = 0; i < g.v.size(); ++i) {
      const double v = xv.v[i];
      const double s = sigmoid_scalar(kGeluSlope * v);
      gx.v[i] += g.v[i] * (s + kGeluSlope * v * s * (1.0 - s));
    }
  });
}

Ref Tape::sigmoid(Ref x) {
  Mat out = val(x);
  for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, x](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    const Mat& y = *t.nodes_[r].val;
    Mat& gx = t.nodes_[x].grad;
    for (size_t i = 0; i < g.v.size(); ++i) gx.v[i] += g.v[i] * y.v[i] * (1.0 - y.v[i]);
  });
}

namespace {
void softmax_row(const double* in, double* out, int n) {
  double mx = in[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    sum += out[j];
  }
  for (int j = 0; j < n; ++j) out[j] /= sum;
}
}  // namespace

Ref Tape::softmax_rows(Ref x) {
  const Mat& xv = val(x);
  Mat out(xv.rows, xv.cols);
  for (int i = 0; i < xv.rows; ++i) softmax_row(xv.row(i), out.row(i), xv.cols);
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, x](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    const Mat& y = *t.nodes_[r].val;
    Mat& gx = t.nodes_[x].grad;
    for (int i = 0; i < g.rows; ++i) {
      const double d = dot(g.row(i), y.row(i), g.cols);
      const double* grow = g.row(i);
      const double* yrow = y.row(i);
      double* gxr = gx.row(i);
      for (int j = 0; j < g.cols; ++j) gxr[j] += yrow[j] * (grow[j] - d);
    }
  });
}

Ref Tape::embedding(Ref table, std::vector<int> ids) {
  const Mat& tv = val(table);
  Mat out(static_cast<int>(ids.size()), tv.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows) throw std::out_of_range("embedding id");
    std::copy(tv.row(ids[i]), tv.row(ids[i]) + tv.cols, out.row(static_cast<int>(i)));
  }
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, table, ids = std::move(ids)](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    Mat& gt = t.nodes_[table].grad;
    for (size_t i = 0; i < ids.size(); ++i)
      axpy(1.0, g.row(static_cast<int>(i)), gt.row(ids[i]), g.cols);
  });
}

Ref Tape::slice_rows(Ref x, int r0, int r1) {
  const Mat& xv = val(x);
  if (r0 < 0 || r1 > xv.rows || r0 >= r1) throw std::out_of_range("slice_rows");
  Mat out(r1 - r0, xv.cols);
  std::copy(xv.row(r0), xv.row(r0) + static_cast<size_t>(r1 - r0) * xv.cols, out.v.begin());
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, x, r0](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    Mat& gx = t.nodes_[x].grad;
    for (int i = 0; i < g.rows; ++i) axpy(1.0, g.row(i), gx.row(r0 + i), g.cols);
  });
}

Ref Tape::concat_rows(Ref a, Ref b) {
  const Mat& av = val(a);
  const Mat& bv = val(b);
  if (av.cols != bv.cols) throw std::invalid_argument("concat_rows: width mismatch");
  Mat out(av.rows + bv.rows, av.cols);
  std::copy(av.v.begin(), av.v.end(), out.v.begin());
  std::copy(bv.v.begin(), bv.v.end(), out.v.begin() + av.v.size());
  const Ref r = static_cast<Ref>(nodes_.size());
  const int arows = av.rows;
  return push_value(std::move(out), [r, a, b, arows](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    Mat& ga = t.nodes_[a].grad;
    Mat& gb = t.nodes_[b].grad;
    for (int i = 0; i < arows; ++i) axpy(1.0, g.row(i), ga.row(i), g.cols);
    for (int i = arows; i < g.rows; ++i) axpy(1.0, g.row(i), gb.row(i - arows), g.cols);
  });
}

Ref Tape::mean_rows(Ref x) {
  const Mat& xv = val(x);
  Mat out(1, xv.cols);
  for (int i = 0; i < xv.rows; ++i) axpy(1.0, xv.row(i), out.row(0), xv.cols);
  for (double& v : out.v) v /= xv.rows;
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, x](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    Mat& gx = t.nodes_[x].grad;
    const double s = 1.0 / gx.rows;
    for (int i = 0; i < gx.rows; ++i) axpy(s, g.row(0), gx.row(i), g.cols);
  });
}

namespace {
struct MhaCache {
  Mat q, k, v, o;           // T x d projections and pre-output context
  std::vector<Mat> attn;    // per head, T x T
};
}  // namespace

Ref Tape::mha(Ref x, Ref wq, Ref bq, Ref wk, Ref wv, Ref bv, Ref wo, Ref bo, int heads,
              bool mask_last_key) {
  const Mat& xv = val(x);
  const int tcount = xv.rows;
  const int d = val(wq).cols;
  if (d % heads != 0) throw std::invalid_argument("mha: width not divisible by heads");
  const int dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  auto cache = std::make_shared<MhaCache>();
  msba::matmul(xv, val(wq), cache->q);
  add_row_broadcast(cache->q, val(bq));
  msba::matmul(xv, val(wk), cache->k);
  msba::matmul(xv, val(wv), cache->v);
  add_row_broadcast(cache->v, val(bv));

  cache->attn.assign(heads, Mat(tcount, tcount));
  cache->o.resize(tcount, d);
  std::vector<double> srow(tcount);
  for (int h = 0; h < heads; ++h) {
    const int off = h * dh;
    Mat& attn = cache->attn[h];
    for (int i = 0; i < tcount; ++i) {
      for (int j = 0; j < tcount; ++j)
        srow[j] = dot(cache->q.row(i) + off, cache->k.row(j) + off, dh) * inv_sqrt;
      if (mask_last_key) srow[tcount - 1] = -1e30;
      softmax_row(srow.data(), attn.row(i), tcount);
      double* orow = cache->o.row(i) + off;
      for (int j = 0; j < tcount; ++j) axpy(attn.at(i, j), cache->v.row(j) + off, orow, dh);
    }
  }

  Mat out;
  msba::matmul(cache->o, val(wo), out);
  add_row_broadcast(out, val(bo));

  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, x, wq, bq, wk, wv, bv, wo, bo, heads, cache,
                                     inv_sqrt](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    const Mat& xv = *t.nodes_[x].val;
    const int tcount = xv.rows;
    const int d = cache->q.cols;
    const int dh = d / heads;

    // Output projection.
    Mat go;
    msba::matmul_bt(g, *t.nodes_[wo].val, go);
    matmul_at_acc(cache->o, g, t.nodes_[wo].grad);
    Mat& gbo = t.nodes_[bo].grad;
    for (int i = 0; i < g.rows; ++i) axpy(1.0, g.row(i), gbo.row(0), g.cols);

    Mat gq(tcount, d), gk(tcount, d), gv(tcount, d);
    std::vector<double> da(tcount), ds(tcount);
    for (int h = 0; h < heads; ++h) {
      const int off = h * dh;
      const Mat& attn = cache->attn[h];
      for (int i = 0; i < tcount; ++i) {
        const double* go_row = go.row(i) + off;
        // dA and dV for this query row.
        for (int j = 0; j < tcount; ++j) {
          da[j] = dot(go_row, cache->v.row(j) + off, dh);
          axpy(attn.at(i, j), go_row, gv.row(j) + off, dh);
        }
        // Softmax backward, then scores -> q, k.
        const double* arow = attn.row(i);
        double dsum = 0.0;
        for (int j = 0; j < tcount; ++j) dsum += da[j] * arow[j];
        for (int j = 0; j < tcount; ++j) ds[j] = arow[j] * (da[j] - dsum) * inv_sqrt;
        double* gq_row = gq.row(i) + off;
        for (int j = 0; j < tcount; ++j) {
          axpy(ds[j], cache->k.row(j) + off, gq_row, dh);
          axpy(ds[j], cache->q.row(i) + off, gk.row(j) + off, dh);
        }
      }
    }

    // Project back through the Q/K/V linears.
    matmul_bt_acc(gq, *t.nodes_[wq].val, t.nodes_[x].grad);
    matmul_at_acc(xv, gq, t.nodes_[wq].grad);
    Mat& gbq = t.nodes_[bq].grad;
    for (int i = 0; i < gq.rows; ++i) axpy(1.0, gq.row(i), gbq.row(0), gq.cols);

    matmul_bt_acc(gk, *t.nodes_[wk].val, t.nodes_[x].grad);
    matmul_at_acc(xv, gk, t.nodes_[wk].grad);

    matmul_bt_acc(gv, *t.nodes_[wv].val, t.nodes_[x].grad);
    matmul_at_acc(xv, gv, t.nodes_[wv].grad);
    Mat& gbv = t.nodes_[bv].grad;
    for (int i = 0; i < gv.rows; ++i) axpy(1.0, gv.row(i), gbv.row(0), gv.cols);
  });
}

// One packed gemm computes every tap's contribution; scatter/gather handles
// the stride-2 geometry. Weight layout: (cin) x (16*cout), column tap*cout+co.
Ref Tape::conv_transpose2d(Ref x, Ref w, Ref b, int in_h, int in_w) {
  const Mat& xv = val(x);
  const Mat& wv = val(w);
  const Mat& bv = val(b);
  const int cin = xv.cols;
  if (wv.rows != cin || wv.cols % 16 != 0)
    throw std::invalid_argument("conv_transpose2d: bad kernel shape");
  const int cout = wv.cols / 16;
  if (xv.rows != in_h * in_w) throw std::invalid_argument("conv_transpose2d: bad grid");
  const int oh = 2 * in_h;
  const int ow = 2 * in_w;

  Mat taps;
  msba::matmul(xv, wv, taps);  // (in_h*in_w) x (16*cout)

  Mat out(oh * ow, cout);
  for (int i = 0; i < out.rows; ++i) std::copy(bv.row(0), bv.row(0) + cout, out.row(i));
  for (int py = 0; py < in_h; ++py) {
    for (int ky = 0; ky < 4; ++ky) {
      const int oy = 2 * py - 1 + ky;
      if (oy < 0 || oy >= oh) continue;
      for (int px = 0; px < in_w; ++px) {
        const double* trow = taps.row(py * in_w + px);
        for (int kx = 0; kx < 4; ++kx) {
          const int ox = 2 * px - 1 + kx;
          if (ox < 0 || ox >= ow) continue;
          axpy(1.0, trow + (ky * 4 + kx) * cout, out.row(oy * ow + ox), cout);
        }
      }
    }
  }

  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, x, w, b, in_h, in_w, cin, cout](Tape& t) {
    const Mat& g = t.nodes_[r].grad;
    const Mat& xv = *t.nodes_[x].val;
    const Mat& wv = *t.nodes_[w].val;
    Mat& gb = t.nodes_[b].grad;
    const int oh = 2 * in_h;
    const int ow = 2 * in_w;
    for (int i = 0; i < g.rows; ++i) axpy(1.0, g.row(i), gb.row(0), cout);

    // gather output grads back into tap layout, then two gemms
    Mat gtaps(in_h * in_w, 16 * cout);
    for (int py = 0; py < in_h; ++py) {
      for (int ky = 0; ky < 4; ++ky) {
        const int oy = 2 * py - 1 + ky;
        if (oy < 0 || oy >= oh) continue;
        for (int px = 0; px < in_w; ++px) {
          double* grow = gtaps.row(py * in_w + px);
          for (int kx = 0; kx < 4; ++kx) {
            const int ox = 2 * px - 1 + kx;
            if (ox < 0 || ox >= ow) continue;
            std::copy(g.row(oy * ow + ox), g.row(oy * ow + ox) + cout,
                      grow + (ky * 4 + kx) * cout);
          }
        }
      }
    }
    matmul_bt_acc(gtaps, wv, t.nodes_[x].grad);
    matmul_at_acc(xv, gtaps, t.nodes_[w].grad);
  });
}

Ref Tape::cosine_mean(Ref p, Ref prompts) {
  const Mat& pv = val(p);
  const Mat& tv = val(prompts);
  if (pv.rows != 1 || pv.cols != tv.cols)
    throw std::invalid_argument("cosine_mean: shape mismatch");
  const int n = pv.cols;
  const double pnorm = std::sqrt(dot(pv.row(0), pv.row(0), n));
  if (pnorm < 1e-30) throw std::runtime_error("cosine_mean: zero-norm projection");
  double s = 0.0;
  for (int i = 0; i < tv.rows; ++i) {
    const double tnorm = std::sqrt(dot(tv.row(i), tv.row(i), n));
    if (tnorm < 1e-30) throw std::runtime_error("cosine_mean: zero-norm prompt feature");
    s += dot(pv.row(0), tv.row(i), n) / (pnorm * tnorm);
  }
  Mat out(1, 1);
  out.at(0, 0) = s / tv.rows;
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, p, prompts](Tape& t) {
    const double g = t.nodes_[r].grad.at(0, 0) / t.nodes_[prompts].val->rows;
    const Mat& pv = *t.nodes_[p].val;
    const Mat& tv = *t.nodes_[prompts].val;
    Mat& gp = t.nodes_[p].grad;
    Mat& gt = t.nodes_[prompts].grad;
    const int n = pv.cols;
    const double pn = std::sqrt(dot(pv.row(0), pv.row(0), n));
    for (int i = 0; i < tv.rows; ++i) {
      const double tn = std::sqrt(dot(tv.row(i), tv.row(i), n));
      const double d = dot(pv.row(0), tv.row(i), n);
      const double c = d / (pn * tn);
      // d cos / dp and d cos / dt_i
      axpy(g / (pn * tn), tv.row(i), gp.row(0), n);
      axpy(-g * c / (pn * pn), pv.row(0), gp.row(0), n);
      axpy(g / (pn * tn), pv.row(0), gt.row(i), n);
      axpy(-g * c / (tn * tn), tv.row(i), gt.row(i), n);
    }
  });
}

Ref Tape::bce(Ref p, double y, double eps) {
  if (y != 0.0 && y != 1.0) throw std::invalid_argument("bce: label must be 0 or 1");
  const double praw = val(p).at(0, 0);
  const double pc = std::clamp(praw, eps, 1.0 - eps);
  Mat out(1, 1);
  out.at(0, 0) = -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, p, y, eps](Tape& t) {
    const double g = t.nodes_[r].grad.at(0, 0);
    const double praw = t.nodes_[p].val->at(0, 0);
    if (praw <= eps || praw >= 1.0 - eps) return;  // clamp is flat
    t.nodes_[p].grad.at(0, 0) += g * (praw - y) / (praw * (1.0 - praw));
  });
}

Ref Tape::smooth_l1(Ref pred, Ref target) {
  const Mat& pv = val(pred);
  const Mat& tv = val(target);
  if (!pv.same_shape(tv)) throw std::invalid_argument("smooth_l1: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < pv.v.size(); ++i) {
    const double d = pv.v[i] - tv.v[i];
    const double a = std::fabs(d);
    s += a < 1.0 ? 0.5 * d * d : a - 0.5;
  }
  Mat out(1, 1);
  out.at(0, 0) = s / static_cast<double>(pv.v.size());
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, pred, target](Tape& t) {
    const double g = t.nodes_[r].grad.at(0, 0);
    const Mat& pv = *t.nodes_[pred].val;
    const Mat& tv = *t.nodes_[target].val;
    Mat& gp = t.nodes_[pred].grad;
    const double inv_n = 1.0 / static_cast<double>(pv.v.size());
    for (size_t i = 0; i < pv.v.size(); ++i) {
      const double d = pv.v[i] - tv.v[i];
      const double f = std::fabs(d) < 1.0 ? d : (d > 0 ? 1.0 : -1.0);
      gp.v[i] += g * f * inv_n;
    }
  });
}

Ref Tape::kl_div(const std::vector<double>& alpha, Ref alpha_hat, double eps) {
  const Mat& av = val(alpha_hat);
  if (av.rows != 1 || av.cols != static_cast<int>(alpha.size()))
    throw std::invalid_argument("kl_div: size mismatch");
  // Floor alpha_hat at eps and renormalize before taking the divergence.
  std::vector<double> f(alpha.size());
  double fsum = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i) {
    f[i] = std::max(av.v[i], eps);
    fsum += f[i];
  }
  double l = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i)
    if (alpha[i] > 0.0) l += alpha[i] * (std::log(alpha[i]) - std::log(f[i] / fsum));
  Mat out(1, 1);
  out.at(0, 0) = l;
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, alpha, alpha_hat, eps](Tape& t) {
    const double g = t.nodes_[r].grad.at(0, 0);
    const Mat& av = *t.nodes_[alpha_hat].val;
    Mat& ga = t.nodes_[alpha_hat].grad;
    double fsum = 0.0;
    for (size_t i = 0; i < alpha.size(); ++i) fsum += std::max(av.v[i], eps);
    double asum = 0.0;
    for (double a : alpha) asum += a;
    for (size_t i = 0; i < alpha.size(); ++i) {
      if (av.v[i] < eps) continue;  // flat below the floor
      const double fi = std::max(av.v[i], eps);
      ga.v[i] += g * (asum / fsum - alpha[i] / fi);
    }
  });
}

Ref Tape::weighted_sum(const std::vector<Ref>& terms, const std::vector<double>& weights) {
  if (terms.size() != weights.size() || terms.empty())
    throw std::invalid_argument("weighted_sum: size mismatch");
  Mat out(1, 1);
  for (size_t i = 0; i < terms.size(); ++i) out.at(0, 0) += weights[i] * val(terms[i]).at(0, 0);
  const Ref r = static_cast<Ref>(nodes_.size());
  return push_value(std::move(out), [r, terms, weights](Tape& t) {
    const double g = t.nodes_[r].grad.at(0, 0);
    for (size_t i = 0; i < terms.size(); ++i)
      t.nodes_[terms[i]].grad.at(0, 0) += g * weights[i];
  });
}

void Tape::backward(Ref loss, double seed_grad) {
  if (val(loss).rows != 1 || val(loss).cols != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  for (auto& n : nodes_) n.grad.resize(n.val->rows, n.val->cols);
  nodes_[loss].grad.at(0, 0) = seed_grad;
  for (int i = loss; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

void Tape::backward_multi(const std::vector<std::pair<Ref, const Mat*>>& seeds) {
  for (auto& n : nodes_) n.grad.resize(n.val->rows, n.val->cols);
  Ref top = 0;
  for (const auto& [r, g] : seeds) {
    if (!g->same_shape(*nodes_[r].val))
      throw std::invalid_argument("backward_multi: seed shape mismatch");
    add_inplace(nodes_[r].grad, *g);
    top = std::max(top, r);
  }
  for (int i = top; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

void AdamW::init(const ParamSet& ps) {
  t = 0;
  m1.clear();
  m2.clear();
  for (int i = 0; i < ps.count(); ++i) {
    m1.emplace_back(ps.at(i).value.rows, ps.at(i).value.cols);
    m2.emplace_back(ps.at(i).value.rows, ps.at(i).value.cols);
  }
}

void AdamW::step(ParamSet& ps, const GradBuffer& grads, double lr, double weight_decay,
                 const std::vector<char>& decay_mask) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (int p = 0; p < ps.count(); ++p) {
    Mat& theta = ps.at(p).value;
    const Mat& g = grads.grad(p);
    const double wd = decay_mask[p] ? weight_decay : 0.0;
    for (size_t i = 0; i < theta.v.size(); ++i) {
      m1[p].v[i] = beta1 * m1[p].v[i] + (1.0 - beta1) * g.v[i];
      m2[p].v[i] = beta2 * m2[p].v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
      const double mhat = m1[p].v[i] / bc1;
      const double vhat = m2[p].v[i] / bc2;
      theta.v[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * theta.v[i]);
    }
  }
}

void trunc_normal_init(Mat& m, double stddev, Rng& rng) {
  for (double& x : m.v) {
    double z = rng.normal();
    while (std::fabs(z) > 2.0) z = rng.normal();
    x = z * stddev;
  }
}

void xavier_init(Mat& m, Rng& rng) {
  trunc_normal_init(m, std::sqrt(2.0 / (m.rows + m.cols)), rng);
}

double cosine_lr(int step, int total_steps, double lr_init, double lr_final) {
  if (total_steps <= 1) return lr_init;
  const double x = static_cast<double>(step) / (total_steps - 1);
  return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(std::numbers::pi * x));
}

}  // namespace msba::nn
