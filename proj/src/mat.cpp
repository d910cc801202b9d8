#include "msba/mat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace msba {

// Four dependency chains pipeline the FMAs; the fixed summation order keeps
// results deterministic for a given binary.
double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

namespace {

constexpr int kRowTile = 4;
constexpr int kColTile = 16;

// Vector-extension lane type; gcc lowers it to zmm/ymm pairs as available.
typedef double vd __attribute__((vector_size(64)));

inline vd vload(const double* p) {
  vd v;
  __builtin_memcpy(&v, p, sizeof(v));
  return v;
}
inline void vstore(double* p, vd v) { __builtin_memcpy(p, &v, sizeof(v)); }
inline vd vsplat(double x) { return vd{x, x, x, x, x, x, x, x}; }

// 4x16 register-tiled micro-kernel: 8 vector accumulators stay resident,
// each k step costs two B loads and four broadcasts for eight FMAs.
void gemm_tile_full(const Mat& a, const Mat& b, Mat& out, int i0, int j0, bool accumulate) {
  vd c00, c01, c10, c11, c20, c21, c30, c31;
  if (accumulate) {
    c00 = vload(out.row(i0) + j0);
    c01 = vload(out.row(i0) + j0 + 8);
    c10 = vload(out.row(i0 + 1) + j0);
    c11 = vload(out.row(i0 + 1) + j0 + 8);
    c20 = vload(out.row(i0 + 2) + j0);
    c21 = vload(out.row(i0 + 2) + j0 + 8);
    c30 = vload(out.row(i0 + 3) + j0);
    c31 = vload(out.row(i0 + 3) + j0 + 8);
  } else {
    c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = vsplat(0.0);
  }
  const int kk = a.cols;
  const double* a0 = a.row(i0);
  const double* a1 = a.row(i0 + 1);
  const double* a2 = a.row(i0 + 2);
  const double* a3 = a.row(i0 + 3);
  for (int k = 0; k < kk; ++k) {
    const double* brow = b.row(k) + j0;
    const vd b0 = vload(brow);
    const vd b1 = vload(brow + 8);
    vd s = vsplat(a0[k]);
    c00 += s * b0;
    c01 += s * b1;
    s = vsplat(a1[k]);
    c10 += s * b0;
    c11 += s * b1;
    s = vsplat(a2[k]);
    c20 += s * b0;
    c21 += s * b1;
    s = vsplat(a3[k]);
    c30 += s * b0;
    c31 += s * b1;
  }
  vstore(out.row(i0) + j0, c00);
  vstore(out.row(i0) + j0 + 8, c01);
  vstore(out.row(i0 + 1) + j0, c10);
  vstore(out.row(i0 + 1) + j0 + 8, c11);
  vstore(out.row(i0 + 2) + j0, c20);
  vstore(out.row(i0 + 2) + j0 + 8, c21);
  vstore(out.row(i0 + 3) + j0, c30);
  vstore(out.row(i0 + 3) + j0 + 8, c31);
}

void gemm_tile_edge(const Mat& a, const Mat& b, Mat& out, int i0, int j0, int ib, int jb,
                    bool accumulate) {
  double acc[kRowTile][kColTile];
  for (int ii = 0; ii < ib; ++ii) {
    const double* orow = out.row(i0 + ii) + j0;
    for (int jj = 0; jj < jb; ++jj) acc[ii][jj] = accumulate ? orow[jj] : 0.0;
  }
  const int kk = a.cols;
  for (int k = 0; k < kk; ++k) {
    const double* brow = b.row(k) + j0;
    for (int ii = 0; ii < ib; ++ii) {
      const double aik = a.at(i0 + ii, k);
      for (int jj = 0; jj < jb; ++jj) acc[ii][jj] += aik * brow[jj];
    }
  }
  for (int ii = 0; ii < ib; ++ii) {
    double* orow = out.row(i0 + ii) + j0;
    for (int jj = 0; jj < jb; ++jj) orow[jj] = acc[ii][jj];
  }
}

void gemm_kernel(const Mat& a, const Mat& b, Mat& out, bool accumulate) {
  assert(a.cols == b.rows);
  if (!accumulate) out.resize(a.rows, b.cols);
  assert(out.rows == a.rows && out.cols == b.cols);
  const int m = a.rows;
  const int n = b.cols;
  for (int i0 = 0; i0 < m; i0 += kRowTile) {
    const int ib = std::min(kRowTile, m - i0);
    for (int j0 = 0; j0 < n; j0 += kColTile) {
      const int jb = std::min(kColTile, n - j0);
      if (ib == kRowTile && jb == kColTile)
        gemm_tile_full(a, b, out, i0, j0, accumulate);
      else
        gemm_tile_edge(a, b, out, i0, j0, ib, jb, accumulate);
    }
  }
}

Mat transpose(const Mat& a) {
  Mat t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = arow[j];
  }
  return t;
}

}  // namespace

void matmul(const Mat& a, const Mat& b, Mat& out) { gemm_kernel(a, b, out, false); }
void matmul_acc(const Mat& a, const Mat& b, Mat& out) { gemm_kernel(a, b, out, true); }

// out += A * B^T via an explicit transpose of B so the kernel stays
// row-contiguous. Callers prepare (zero or preloaded) out.
static void gemm_bt_accumulate(const Mat& a, const Mat& b, Mat& out) {
  assert(a.cols == b.cols);
  assert(out.rows == a.rows && out.cols == b.rows);
  if (a.rows == 1 || b.rows <= 4) {  // transpose not worth it for thin shapes
    for (int i = 0; i < a.rows; ++i) {
      const double* arow = a.row(i);
      double* orow = out.row(i);
      for (int j = 0; j < b.rows; ++j) orow[j] += dot(arow, b.row(j), a.cols);
    }
    return;
  }
  const Mat bt = transpose(b);
  gemm_kernel(a, bt, out, true);
}

void matmul_bt(const Mat& a, const Mat& b, Mat& out) {
  out.resize(a.rows, b.rows);
  gemm_bt_accumulate(a, b, out);
}

void matmul_bt_acc(const Mat& a, const Mat& b, Mat& out) { gemm_bt_accumulate(a, b, out); }

void matmul_at_acc(const Mat& a, const Mat& b, Mat& out) {
  assert(a.rows == b.rows);
  assert(out.rows == a.cols && out.cols == b.cols);
  if (a.cols <= 4 || a.rows <= 8) {
    for (int k = 0; k < a.rows; ++k) {
      const double* arow = a.row(k);
      const double* brow = b.row(k);
      for (int i = 0; i < a.cols; ++i) {
        const double aki = arow[i];
        if (aki == 0.0) continue;
        axpy(aki, brow, out.row(i), b.cols);
      }
    }
    return;
  }
  const Mat at = transpose(a);
  gemm_kernel(at, b, out, true);
}

void add_inplace(Mat& a, const Mat& b) {
  assert(a.same_shape(b));
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

void add_scaled_inplace(Mat& a, const Mat& b, double s) {
  assert(a.same_shape(b));
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += s * b.v[i];
}

void add_row_broadcast(Mat& a, const Mat& bias) {
  assert(bias.rows == 1 && bias.cols == a.cols);
  for (int i = 0; i < a.rows; ++i) axpy(1.0, bias.row(0), a.row(i), a.cols);
}

double max_abs_diff(const Mat& a, const Mat& b) {
  assert(a.same_shape(b));
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::fabs(a.v[i] - b.v[i]));
  return m;
}

bool all_finite(const Mat& a) {
  for (double x : a.v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace msba
