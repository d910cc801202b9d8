#include <doctest.h>

#include <cmath>

#include "msba/objectives.hpp"
#include "msba/rng.hpp"
#include "test_util.hpp"

using namespace msba;
using namespace msba::objectives;

TEST_CASE("bce analytic values and loop oracle") {
  CHECK(bce(1.0 - 1e-7, 1) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(bce(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS(bce(0.5, 2));

  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform01();
    const int y = rng.uniform01() < 0.5 ? 0 : 1;
    const double pc = std::clamp(p, 1e-7, 1.0 - 1e-7);
    const double expect = -(y * std::log(pc) + (1 - y) * std::log(1 - pc));
    CHECK(std::fabs(bce(p, y) - expect) < 1e-12);
    CHECK(bce(p, y) >= 0.0);
  }
}

TEST_CASE("similarity_loss analytic values and monotonicity") {
  CHECK(similarity_loss(0.0, 0, 10.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(similarity_loss(0.0, 1, 10.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const double expect = -std::log(1.0 / (1.0 + std::exp(-10.0)));
  CHECK(similarity_loss(1.0, 1, 10.0) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(similarity_loss(1.0, 1, 10.0) == doctest::Approx(4.5398e-5).epsilon(1e-3));

  double prev = similarity_loss(-1.0, 1, 5.0);
  for (double s = -0.9; s <= 1.0; s += 0.1) {
    const double cur = similarity_loss(s, 1, 5.0);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("smooth_l1 piecewise values and loop oracle") {
  Mat p(1, 1), t(1, 1);
  p.at(0, 0) = 0.5;
  CHECK(smooth_l1(p, t) == doctest::Approx(0.125).epsilon(1e-12));
  p.at(0, 0) = 2.0;
  CHECK(smooth_l1(p, t) == doctest::Approx(1.5).epsilon(1e-12));
  p.at(0, 0) = 0.0;
  CHECK(smooth_l1(p, t) == doctest::Approx(0.0));

  Rng rng(32);
  for (int rep = 0; rep < 200; ++rep) {
    Mat a = testutil::random_mat(5, 7, rng, 2.0);
    Mat b = testutil::random_mat(5, 7, rng, 2.0);
    double expect = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
      const double d = a.v[i] - b.v[i];
      expect += std::fabs(d) < 1.0 ? 0.5 * d * d : std::fabs(d) - 0.5;
    }
    expect /= static_cast<double>(a.v.size());
    CHECK(std::fabs(smooth_l1(a, b) - expect) < 1e-12);
  }
  Mat bad(2, 2);
  CHECK_THROWS(smooth_l1(p, bad));
}

TEST_CASE("kl_weights analytic values, Gibbs inequality, loop oracle") {
  const std::vector<double> uniform4 = {0.25, 0.25, 0.25, 0.25};
  const std::vector<double> onehot = {1.0, 0.0, 0.0, 0.0};
  CHECK(kl_weights(uniform4, uniform4) == doctest::Approx(0.0));
  CHECK(kl_weights(onehot, uniform4) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(kl_weights(onehot, onehot) == doctest::Approx(0.0));

  Rng rng(33);
  for (int rep = 0; rep < 1000; ++rep) {
    auto draw = [&](int m) {
      std::vector<double> v(m);
      double sum = 0.0;
      for (double& x : v) {
        x = rng.gamma(1.0);
        sum += x;
      }
      for (double& x : v) x /= sum;
      return v;
    };
    const auto a = draw(4);
    const auto b = draw(4);
    double expect = 0.0;
    double fsum = 0.0;
    for (double x : b) fsum += std::max(x, 1e-8);
    for (int i = 0; i < 4; ++i)
      if (a[i] > 0) expect += a[i] * (std::log(a[i]) - std::log(std::max(b[i], 1e-8) / fsum));
    CHECK(std::fabs(kl_weights(a, b) - expect) < 1e-12);
    CHECK(kl_weights(a, b) >= 0.0);      // Gibbs
    CHECK(kl_weights(a, a) < 1e-12);     // equality case
  }
  CHECK_THROWS(kl_weights({0.5, 0.6}, {0.5, 0.5}));  // off simplex
}

TEST_CASE("total_loss arithmetic, masking and weight linearity") {
  LossWeights w;  // paper defaults 1, 0.5, 1, 0.1
  const LossBreakdown b = total_loss(0.1, 0.2, 0.3, 0.4, w, true);
  CHECK(b.total == doctest::Approx(0.1 + 0.1 + 0.3 + 0.04).epsilon(1e-12));
  CHECK(b.total ==
        doctest::Approx(w.lambda_cls * b.l_cls + w.lambda_sim * b.l_sim +
                        w.lambda_int * b.l_int + w.lambda_wgt * b.l_wgt).epsilon(1e-9));

  const LossBreakdown masked = total_loss(0.1, 0.2, 0.3, 0.4, w, false);
  CHECK(masked.l_wgt == 0.0);
  CHECK(masked.total == doctest::Approx(0.1 + 0.1 + 0.3).epsilon(1e-12));

  LossWeights zero{0, 0, 0, 0};
  CHECK(total_loss(1, 2, 3, 4, zero, true).total == 0.0);

  LossWeights doubled = w;
  doubled.lambda_int *= 2.0;
  const double delta = total_loss(0.1, 0.2, 0.3, 0.4, doubled, true).total - b.total;
  CHECK(delta == doctest::Approx(w.lambda_int * 0.3).epsilon(1e-12));

  LossWeights bad;
  bad.lambda_sim = -1.0;
  CHECK_THROWS(total_loss(1, 1, 1, 1, bad, true));
}

TEST_CASE("grad_check harness on polynomials") {
  auto square = [](const std::vector<double>& x) { return x[0] * x[0]; };
  CHECK(grad_check(square, {3.0}, {6.0}) < 1e-9);

  Rng rng(34);
  std::vector<double> point(10), grad(10);
  for (int i = 0; i < 10; ++i) {
    point[i] = rng.uniform(0.5, 1.5);
    grad[i] = 2.0 * point[i];
  }
  auto sumsq = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  // central differences are exact for quadratics; a larger step just
  // suppresses cancellation noise
  CHECK(grad_check(sumsq, point, grad, 1e-4) < 1e-10);

  // wrong gradient is caught
  grad[0] += 0.5;
  CHECK(grad_check(sumsq, point, grad, 1e-4) > 1e-2);
}
