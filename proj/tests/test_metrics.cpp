#include <doctest.h>

#include <cmath>

#include "msba/metrics.hpp"
#include "msba/rng.hpp"

using namespace msba;

namespace {

// O(n^2) pair-count oracle with half credit for ties.
double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j])
        num += 1.0;
      else if (s[i] == s[j])
        num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auc trivial cases") {
  CHECK(metrics::auc({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(metrics::auc({0.9, 0.2, 0.3, 0.1}, {1, 1, 0, 0}) == doctest::Approx(0.75));
  CHECK(metrics::auc({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}) == doctest::Approx(0.5));
  CHECK_THROWS(metrics::auc({0.1, 0.2}, {1, 1}));
  CHECK_THROWS(metrics::auc({0.1, NAN}, {1, 0}));
}

TEST_CASE("auc equals the pair-count oracle on 200 random instances with ties") {
  Rng rng(41);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = rng.uniform_int(2, 64);
    std::vector<double> s(n);
    std::vector<int> y(n);
    int npos = 0;
    for (int i = 0; i < n; ++i) {
      // quantized scores force frequent ties
      s[i] = rng.uniform_int(0, 7) / 7.0;
      y[i] = rng.uniform01() < 0.5 ? 1 : 0;
      npos += y[i];
    }
    if (npos == 0) y[0] = 1;
    if (npos == n) y[0] = 0;
    CHECK(metrics::auc(s, y) == doctest::Approx(auc_pairs(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("auc is invariant under strictly monotone transforms") {
  Rng rng(42);
  std::vector<double> s(40);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) {
    s[i] = rng.uniform_int(0, 9) / 9.0;
    y[i] = i < 20 ? 1 : 0;
  }
  const double base = metrics::auc(s, y);
  auto apply = [&](auto f) {
    std::vector<double> t(s.size());
    for (size_t i = 0; i < s.size(); ++i) t[i] = f(s[i]);
    return metrics::auc(t, y);
  };
  CHECK(apply([](double v) { return 2.0 * v + 1.0; }) == doctest::Approx(base).epsilon(1e-15));
  CHECK(apply([](double v) { return (v + 1.0) * (v + 1.0) * (v + 1.0); }) ==
        doctest::Approx(base).epsilon(1e-15));
  CHECK(apply([](double v) { return std::exp(v); }) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("accuracy threshold boundary and loop oracle") {
  CHECK(metrics::accuracy({0.6, 0.4}, {1, 0}) == doctest::Approx(1.0));
  // a score exactly at the threshold counts as fake
  CHECK(metrics::accuracy({0.5}, {1}) == doctest::Approx(1.0));
  CHECK(metrics::accuracy({0.5}, {0}) == doctest::Approx(0.0));
  CHECK_THROWS(metrics::accuracy({}, {}));

  Rng rng(43);
  std::vector<double> s(100);
  std::vector<int> y(100);
  for (int i = 0; i < 100; ++i) {
    s[i] = rng.uniform01();
    y[i] = rng.uniform01() < 0.5 ? 1 : 0;
  }
  int correct = 0;
  for (int i = 0; i < 100; ++i) correct += ((s[i] >= 0.5 ? 1 : 0) == y[i]);
  CHECK(metrics::accuracy(s, y) == doctest::Approx(correct / 100.0));
}
