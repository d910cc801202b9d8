#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace msba {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 as convenient.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }

  double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

  size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  void resize(int r, int c) {
    rows = r;
    cols = c;
    v.assign(static_cast<size_t>(r) * c, 0.0);
  }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// out = a * b
void matmul(const Mat& a, const Mat& b, Mat& out);
// out += a * b
void matmul_acc(const Mat& a, const Mat& b, Mat& out);
// out = a * b^T
void matmul_bt(const Mat& a, const Mat& b, Mat& out);
// out += a * b^T
void matmul_bt_acc(const Mat& a, const Mat& b, Mat& out);
// out += a^T * b
void matmul_at_acc(const Mat& a, const Mat& b, Mat& out);

void add_inplace(Mat& a, const Mat& b);            // a += b
void add_scaled_inplace(Mat& a, const Mat& b, double s);  // a += s*b
void add_row_broadcast(Mat& a, const Mat& bias);   // a[i] += bias (1 x cols)

double dot(const double* a, const double* b, int n);
void axpy(double alpha, const double* x, double* y, int n);  // y += alpha*x

double max_abs_diff(const Mat& a, const Mat& b);
bool all_finite(const Mat& a);

}  // namespace msba
