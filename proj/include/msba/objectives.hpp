#pragma once

#include <functional>
#include <vector>

#include "msba/mat.hpp"

namespace msba::objectives {

struct LossWeights {
  double lambda_cls = 1.0;
  double lambda_sim = 0.5;
  double lambda_int = 1.0;
  double lambda_wgt = 0.1;

  static LossWeights paper_defaults() { return {1.0, 0.5, 1.0, 0.1}; }
  static LossWeights equal_weighting() { return {1.0, 1.0, 1.0, 0.1}; }
  void validate() const;
};

struct LossBreakdown {
  double l_cls = 0.0;
  double l_sim = 0.0;
  double l_int = 0.0;
  double l_wgt = 0.0;
  double total = 0.0;
};

// Binary cross entropy with the probability clamped to [eps, 1-eps].
double bce(double p, int y, double eps = 1e-7);

// BCE on sigmoid(kappa * s), mapping the cosine score into a probability.
double similarity_loss(double s, int y, double kappa);

// Elementwise 0.5x^2 (|x|<1) else |x|-0.5, mean-reduced.
double smooth_l1(const Mat& pred, const Mat& target);

// D_KL(alpha || alpha_hat); alpha_hat floored at eps and renormalized,
// zero alpha entries contribute nothing.
double kl_weights(const std::vector<double>& alpha, const std::vector<double>& alpha_hat,
                  double eps = 1e-8);

// has_alpha gates the blend-weight term (real samples carry no alpha).
LossBreakdown total_loss(double l_cls, double l_sim, double l_int, double l_wgt,
                         const LossWeights& w, bool has_alpha);

// Central finite differences against an analytic gradient; returns the
// maximum relative error |ga - gn| / max(1e-8, |ga| + |gn|).
double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  std::vector<double> point, const std::vector<double>& analytic_grad,
                  double eps = 1e-5);

}  // namespace msba::objectives
