#include "msba/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msba::objectives {

void LossWeights::validate() const {
  if (lambda_cls < 0 || lambda_sim < 0 || lambda_int < 0 || lambda_wgt < 0)
    throw std::invalid_argument("loss weights must be nonnegative");
}

double bce(double p, int y, double eps) {
  if (y != 0 && y != 1) throw std::invalid_argument("bce: label must be 0 or 1");
  const double pc = std::clamp(p, eps, 1.0 - eps);
  return -(y * std::log(pc) + (1 - y) * std::log(1.0 - pc));
}

double similarity_loss(double s, int y, double kappa) {
  const double p = 1.0 / (1.0 + std::exp(-kappa * s));
  return bce(p, y);
}

double smooth_l1(const Mat& pred, const Mat& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("smooth_l1: shape mismatch");
  if (pred.empty()) throw std::invalid_argument("smooth_l1: empty input");
  double s = 0.0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    const double a = std::fabs(d);
    s += a < 1.0 ? 0.5 * d * d : a - 0.5;
  }
  return s / static_cast<double>(pred.v.size());
}

double kl_weights(const std::vector<double>& alpha, const std::vector<double>& alpha_hat,
                  double eps) {
  if (alpha.size() != alpha_hat.size() || alpha.empty())
    throw std::invalid_argument("kl_weights: size mismatch");
  auto check = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) {
      if (x < -1e-6) throw std::invalid_argument("kl_weights: negative component");
      sum += x;
    }
    if (std::fabs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("kl_weights: input not on the simplex");
  };
  check(alpha);
  check(alpha_hat);

  double fsum = 0.0;
  for (double x : alpha_hat) fsum += std::max(x, eps);
  double l = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] <= 0.0) continue;  // 0 * log 0 convention
    const double r = std::max(alpha_hat[i], eps) / fsum;
    l += alpha[i] * (std::log(alpha[i]) - std::log(r));
  }
  return std::max(l, 0.0);
}

LossBreakdown total_loss(double l_cls, double l_sim, double l_int, double l_wgt,
                         const LossWeights& w, bool has_alpha) {
  w.validate();
  LossBreakdown b;
  b.l_cls = l_cls;
  b.l_sim = l_sim;
  b.l_int = l_int;
  b.l_wgt = has_alpha ? l_wgt : 0.0;
  b.total = w.lambda_cls * b.l_cls + w.lambda_sim * b.l_sim + w.lambda_int * b.l_int +
            w.lambda_wgt * b.l_wgt;
  return b;
}

double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  std::vector<double> point, const std::vector<double>& analytic_grad,
                  double eps) {
  if (point.size() != analytic_grad.size())
    throw std::invalid_argument("grad_check: size mismatch");
  double max_rel = 0.0;
  for (size_t i = 0; i < point.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + eps;
    const double fp = f(point);
    point[i] = orig - eps;
    const double fm = f(point);
    point[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("grad_check: non-finite evaluation");
    const double gn = (fp - fm) / (2.0 * eps);
    const double ga = analytic_grad[i];
    const double rel = std::fabs(ga - gn) / std::max(1e-8, std::fabs(ga) + std::fabs(gn));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace msba::objectives
