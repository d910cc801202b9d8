#include <doctest.h>

#include <cmath>

#include "msba/augment.hpp"
#include "msba/rng.hpp"

using namespace msba;

namespace {

Image random_image(int h, int w, Rng& rng) {
  Image img(h, w, 3);
  for (double& x : img.data) x = rng.uniform01();
  return img;
}

IntensityMap random_map(int h, int w, Rng& rng) {
  IntensityMap m(h, w, 3);
  for (double& x : m.v) x = rng.uniform01();
  return m;
}

}  // namespace

TEST_CASE("intensity_map equals the per-pixel loop oracle") {
  Rng rng(51);
  const Image a = random_image(8, 8, rng);
  const Image b = random_image(8, 8, rng);
  const IntensityMap m = intensity_map(a, b);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(m.at(y, x, c) == std::fabs(a.at(y, x, c) - b.at(y, x, c)));

  const IntensityMap zero = intensity_map(a, a);
  for (double v : zero.v) CHECK(v == 0.0);

  Image pixel_a(1, 1, 3), pixel_b(1, 1, 3);
  pixel_a.data = {0.5, 0.5, 0.5};
  pixel_b.data = {0.8, 0.5, 0.5};
  const IntensityMap pm = intensity_map(pixel_a, pixel_b);
  CHECK(pm.at(0, 0, 0) == doctest::Approx(0.3));
  CHECK(pm.at(0, 0, 1) == doctest::Approx(0.0));
  CHECK(pm.channel_mean().at(0, 0) == doctest::Approx(0.1));

  Image other(4, 4, 3);
  CHECK_THROWS(intensity_map(a, other));
}

TEST_CASE("sample_blend_weights simplex, determinism and moments") {
  Rng rng(52);
  CHECK(sample_blend_weights(1, 1.0, rng) == std::vector<double>{1.0});
  CHECK_THROWS(sample_blend_weights(0, 1.0, rng));
  CHECK_THROWS(sample_blend_weights(4, 0.0, rng));

  for (int rep = 0; rep < 200; ++rep) {
    const auto a = sample_blend_weights(4, 1.0, rng);
    double sum = 0.0;
    for (double x : a) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }

  Rng r1(99), r2(99);
  CHECK(sample_blend_weights(4, 1.0, r1) == sample_blend_weights(4, 1.0, r2));

  // Component means of a symmetric Dirichlet(1) with M=4: 0.25, Var = 3/80.
  Rng mr(53);
  const int n = 10000;
  double mean[4] = {0, 0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const auto a = sample_blend_weights(4, 1.0, mr);
    for (int j = 0; j < 4; ++j) mean[j] += a[j];
  }
  const double se = std::sqrt((3.0 / 80.0) / n);
  for (int j = 0; j < 4; ++j) CHECK(std::fabs(mean[j] / n - 0.25) < 3.0 * se);
}

TEST_CASE("blend_maps oracle, convexity bound and one-hot endpoint") {
  Rng rng(54);
  std::vector<IntensityMap> maps;
  for (int i = 0; i < 4; ++i) maps.push_back(random_map(8, 8, rng));
  auto alpha = sample_blend_weights(4, 1.0, rng);

  const IntensityMap blended = blend_maps(maps, alpha);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) {
        double expect = 0.0, lo = 1e30, hi = -1e30;
        for (int i = 0; i < 4; ++i) {
          expect += alpha[i] * maps[i].at(y, x, c);
          lo = std::min(lo, maps[i].at(y, x, c));
          hi = std::max(hi, maps[i].at(y, x, c));
        }
        CHECK(std::fabs(blended.at(y, x, c) - expect) < 1e-12);
        CHECK(blended.at(y, x, c) >= lo - 1e-12);
        CHECK(blended.at(y, x, c) <= hi + 1e-12);
      }

  const IntensityMap endpoint = blend_maps(maps, {0.0, 0.0, 1.0, 0.0});
  CHECK(endpoint.v == maps[2].v);  // bit-exact at the convexity endpoint

  IntensityMap c1(8, 8, 3), c2(8, 8, 3);
  for (double& v : c1.v) v = 0.2;
  for (double& v : c2.v) v = 0.6;
  const IntensityMap mid = blend_maps({c1, c2}, {0.5, 0.5});
  for (double v : mid.v) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));

  CHECK_THROWS(blend_maps(maps, {0.5, 0.5}));
  CHECK_THROWS(blend_maps(maps, {0.5, 0.5, 0.5, 0.5}));
}

TEST_CASE("synthesize applies the scaled subtraction with clamping") {
  Rng rng(55);
  const Image real = random_image(8, 8, rng);
  std::vector<IntensityMap> maps;
  for (int i = 0; i < 4; ++i) maps.push_back(random_map(8, 8, rng));

  BlendSpec spec;
  spec.alpha = sample_blend_weights(4, 1.0, rng);
  spec.lambda = 1.1;
  const MsbaSample s = synthesize(real, maps, spec);
  CHECK(s.label.binary_label == 1);
  CHECK(s.label.alpha == spec.alpha);
  for (size_t i = 0; i < real.data.size(); ++i) {
    double expect = real.data[i];
    for (int k = 0; k < 4; ++k) expect -= spec.lambda * spec.alpha[k] * maps[k].v[i];
    expect = std::clamp(expect, 0.0, 1.0);
    CHECK(std::fabs(s.image.data[i] - expect) < 1e-12);
  }

  // all-zero maps degenerate to the identity on content
  std::vector<IntensityMap> zeros(4, IntensityMap(8, 8, 3));
  const MsbaSample z = synthesize(real, zeros, spec);
  for (size_t i = 0; i < real.data.size(); ++i) CHECK(z.image.data[i] == real.data[i]);
  CHECK(z.label.binary_label == 1);

  // spot values from the subtraction/clamp rule
  Image one(1, 1, 3);
  one.data = {0.5, 0.1, 0.9};
  IntensityMap m3(1, 1, 3);
  m3.v = {0.3, 0.3, 0.3};
  BlendSpec unit{{1.0}, 1.0, 1.0};
  const MsbaSample p = synthesize(one, {m3}, unit);
  CHECK(p.image.data[0] == doctest::Approx(0.2));
  CHECK(p.image.data[1] == doctest::Approx(0.0));  // clamped
  CHECK(p.image.data[2] == doctest::Approx(0.6));
}

TEST_CASE("monotone erosion: larger lambda weakly darkens every pixel") {
  Rng rng(56);
  const Image real = random_image(8, 8, rng);
  std::vector<IntensityMap> maps = {random_map(8, 8, rng), random_map(8, 8, rng)};
  BlendSpec a{{0.4, 0.6}, 0.8, 1.0};
  BlendSpec b{{0.4, 0.6}, 1.2, 1.0};
  const MsbaSample sa = synthesize(real, maps, a);
  const MsbaSample sb = synthesize(real, maps, b);
  for (size_t i = 0; i < real.data.size(); ++i)
    CHECK(sb.image.data[i] <= sa.image.data[i] + 1e-15);
}

TEST_CASE("draw_msba_sample is deterministic and respects min intensity") {
  Rng base(57);
  const Image real = random_image(8, 8, base);
  std::vector<Image> forged;
  for (int i = 0; i < 3; ++i) {
    Image f = real;
    f.at(2, 2 + i, 0) = std::min(1.0, f.at(2, 2 + i, 0) + 0.4);
    forged.push_back(std::move(f));
  }
  MsbaConfig cfg;
  Rng r1(1234), r2(1234);
  const MsbaSample s1 = draw_msba_sample(real, forged, cfg, r1);
  const MsbaSample s2 = draw_msba_sample(real, forged, cfg, r2);
  CHECK(s1.image.data == s2.image.data);
  CHECK(s1.label.alpha == s2.label.alpha);
  CHECK(s1.spec.lambda >= cfg.lambda_min);
  CHECK(s1.spec.lambda <= cfg.lambda_max);
  CHECK(s1.blended_map.mean() >= 0.0);
}

TEST_CASE("to_patch_targets equals the block-mean loop oracle") {
  Rng rng(58);
  const IntensityMap m = random_map(8, 8, rng);
  const Mat targets = to_patch_targets(m, 4, 4);
  const Mat cm = m.channel_mean();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double expect = 0.0;
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) expect += cm.at(2 * i + y, 2 * j + x);
      CHECK(targets.at(i, j) == doctest::Approx(expect / 4.0).epsilon(1e-15));
    }

  IntensityMap constant(8, 8, 3);
  for (double& v : constant.v) v = 0.37;
  const Mat ct = to_patch_targets(constant, 2, 2);
  for (double v : ct.v) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));

  // one quadrant at 0.4 on all channels, rest zero
  IntensityMap quad(4, 4, 3);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      for (int c = 0; c < 3; ++c) quad.at(y, x, c) = 0.4;
  const Mat qt = to_patch_targets(quad, 2, 2);
  CHECK(qt.at(0, 0) == doctest::Approx(0.4));
  CHECK(qt.at(0, 1) == doctest::Approx(0.0));
  CHECK(qt.at(1, 0) == doctest::Approx(0.0));
  CHECK(qt.at(1, 1) == doctest::Approx(0.0));

  CHECK_THROWS(to_patch_targets(m, 3, 4));
}
