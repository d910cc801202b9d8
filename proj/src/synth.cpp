#include "msba/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "msba/imageio.hpp"

namespace msba {

namespace {

struct Ellipse {
  double cy, cx, ay, ax, theta;

  bool contains(double y, double x) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    const double u = (ct * dx + st * dy) / ax;
    const double v = (-st * dx + ct * dy) / ay;
    return u * u + v * v <= 1.0;
  }
};

double bilinear(const Mat& grid, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0;
  const double fx = x - x0;
  const int y1 = std::min(y0 + 1, grid.rows - 1);
  const int x1 = std::min(x0 + 1, grid.cols - 1);
  return grid.at(y0, x0) * (1 - fy) * (1 - fx) + grid.at(y0, x1) * (1 - fy) * fx +
         grid.at(y1, x0) * fy * (1 - fx) + grid.at(y1, x1) * fy * fx;
}

double sample_image_bilinear(const Image& img, double y, double x, int ch) {
  y = std::clamp(y, 0.0, static_cast<double>(img.h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.w - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0;
  const double fx = x - x0;
  const int y1 = std::min(y0 + 1, img.h - 1);
  const int x1 = std::min(x0 + 1, img.w - 1);
  return img.at(y0, x0, ch) * (1 - fy) * (1 - fx) + img.at(y0, x1, ch) * (1 - fy) * fx +
         img.at(y1, x0, ch) * fy * (1 - fx) + img.at(y1, x1, ch) * fy * fx;
}

// Mask ellipses are constrained to the fixed central face region so the
// sampler needs nothing beyond the image dimensions.
Ellipse face_region(int h, int w) {
  return {h / 2.0, w / 2.0, 0.38 * h, 0.38 * w, 0.0};
}

Mask rasterize_forgery_mask(int h, int w, Rng& rng) {
  const Ellipse face = face_region(h, w);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double frac = rng.uniform(0.16, 0.42);
    const double aspect = rng.uniform(0.6, 1.7);
    const double area = frac * h * w;
    double ay = std::sqrt(area * aspect / std::numbers::pi);
    double ax = area / (std::numbers::pi * ay);
    const double cy = face.cy + rng.uniform(-0.3, 0.3) * face.ay;
    const double cx = face.cx + rng.uniform(-0.3, 0.3) * face.ax;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const Ellipse e{cy, cx, ay, ax, theta};

    Mask m(h, w);
    size_t on = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (e.contains(y, x) && face.contains(y, x)) {
          m.at(y, x) = 1;
          ++on;
        }
    const double cov = static_cast<double>(on) / (static_cast<double>(h) * w);
    if (cov >= 0.01 && cov <= 0.5) return m;
  }
  // Deterministic fallback: a centered quarter-area ellipse always fits.
  const Ellipse e{face.cy, face.cx, 0.28 * h, 0.28 * w, 0.0};
  Mask m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (e.contains(y, x)) m.at(y, x) = 1;
  return m;
}

}  // namespace

Image synth_real_image(int h, int w, Rng& rng) {
  // Low-frequency background from a bilinearly upsampled control grid.
  const int gh = 5, gw = 5;
  Mat grid[3] = {Mat(gh, gw), Mat(gh, gw), Mat(gh, gw)};
  for (auto& g : grid)
    for (double& x : g.v) x = rng.uniform(0.25, 0.75);

  Image img(h, w, 3);
  for (int y = 0; y < h; ++y) {
    const double gy = (gh - 1) * static_cast<double>(y) / std::max(1, h - 1);
    for (int x = 0; x < w; ++x) {
      const double gx = (gw - 1) * static_cast<double>(x) / std::max(1, w - 1);
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = bilinear(grid[ch], gy, gx);
    }
  }

  // Face-like ellipse blended toward a seeded skin tone.
  const double skin[3] = {rng.uniform(0.65, 0.85), rng.uniform(0.5, 0.68), rng.uniform(0.4, 0.58)};
  const Ellipse face{h / 2.0 + rng.uniform(-0.02, 0.02) * h,
                     w / 2.0 + rng.uniform(-0.02, 0.02) * w,
                     rng.uniform(0.40, 0.46) * h, rng.uniform(0.40, 0.46) * w,
                     rng.uniform(-0.15, 0.15)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (face.contains(y, x))
        for (int ch = 0; ch < 3; ++ch)
          img.at(y, x, ch) = 0.35 * img.at(y, x, ch) + 0.65 * skin[ch];

  for (double& x : img.data) x = std::clamp(x, 0.1, 0.92);
  return img;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    ksum += kernel[i + radius];
  }
  for (double& k : kernel) k /= ksum;

  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - i - 1;
    }
    return i;
  };

  Image tmp(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k)
          s += kernel[k + radius] * img.at(y, reflect(x + k, img.w), ch);
        tmp.at(y, x, ch) = s;
      }
  Image out(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k)
          s += kernel[k + radius] * tmp.at(reflect(y + k, img.h), x, ch);
        out.at(y, x, ch) = s;
      }
  return out;
}

std::pair<Image, Mask> apply_forgery_method(const Image& image, int method, uint64_t seed) {
  if (method < 0 || method > 3)
    throw std::invalid_argument("forgery method out of range: " + std::to_string(method));
  Rng rng(hash_combine(seed, 0x6d61736bull + method));
  Mask mask = rasterize_forgery_mask(image.h, image.w, rng);
  Image forged = image;

  switch (method) {
    case 0: {  // local coordinate warp
      const double amp = rng.uniform(1.6, 3.2);
      const double fy = rng.uniform(1.0, 2.5);
      const double fx = rng.uniform(1.0, 2.5);
      const double p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x) {
          if (!mask.at(y, x)) continue;
          const double dy = amp * std::sin(2.0 * std::numbers::pi * fy * y / image.h + p1);
          const double dx = amp * std::cos(2.0 * std::numbers::pi * fx * x / image.w + p2);
          for (int ch = 0; ch < 3; ++ch)
            forged.at(y, x, ch) = sample_image_bilinear(image, y + dy, x + dx, ch);
        }
      break;
    }
    case 1: {  // Gaussian blur inside the mask
      const Image blurred = gaussian_blur(image, rng.uniform(1.8, 2.6));
      for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x)
          if (mask.at(y, x))
            for (int ch = 0; ch < 3; ++ch) forged.at(y, x, ch) = blurred.at(y, x, ch);
      break;
    }
    case 2: {  // additive color shift
      double shift[3];
      for (double& s : shift) {
        s = rng.uniform(0.09, 0.18);
        if (rng.uniform01() < 0.5) s = -s;
      }
      for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x)
          if (mask.at(y, x))
            for (int ch = 0; ch < 3; ++ch)
              forged.at(y, x, ch) = std::clamp(image.at(y, x, ch) + shift[ch], 0.0, 1.0);
      break;
    }
    case 3: {  // high-frequency noise texture
      const double amp = rng.uniform(0.10, 0.18);
      for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x) {
          if (!mask.at(y, x)) continue;
          const double tex = ((y + x) % 2 == 0) ? 1.0 : 0.55;
          for (int ch = 0; ch < 3; ++ch) {
            const double n = amp * tex * rng.uniform(-1.0, 1.0);
            forged.at(y, x, ch) = std::clamp(image.at(y, x, ch) + n, 0.0, 1.0);
          }
        }
      break;
    }
  }
  return {std::move(forged), std::move(mask)};
}

Manifest generate_synthetic_corpus(const SyntheticConfig& config,
                                   const std::filesystem::path& out_dir) {
  if (config.num_groups < 1) throw std::invalid_argument("num_groups must be >= 1");
  if (config.num_methods < 1) throw std::invalid_argument("num_methods must be >= 1");
  if (config.num_methods > 4) throw std::invalid_argument("at most 4 synthetic methods");
  if (config.height % config.patch_divisor != 0 || config.width % config.patch_divisor != 0)
    throw std::invalid_argument("image size must divide by the patch size");

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  std::filesystem::create_directories(out_dir / "masks", ec);
  if (!std::filesystem::is_directory(out_dir / "images"))
    throw std::runtime_error("cannot create output directory: " + out_dir.string());

  // Seeded 8:1:1 group split, each split nonempty when there are >= 3 groups.
  Rng split_rng(hash_combine(config.seed, 0x73706c69ull));
  const std::vector<int> order = split_rng.permutation(config.num_groups);
  int n_val = config.num_groups / 10;
  int n_test = config.num_groups / 10;
  if (config.num_groups >= 3) {
    n_val = std::max(1, n_val);
    n_test = std::max(1, n_test);
  }
  std::vector<Split> group_split(config.num_groups, Split::train);
  for (int i = 0; i < n_val; ++i) group_split[order[i]] = Split::val;
  for (int i = 0; i < n_test; ++i) group_split[order[n_val + i]] = Split::test;

  Manifest m;
  m.base_dir = out_dir;
  m.num_methods = config.num_methods;
  m.height = config.height;
  m.width = config.width;

  char buf[64];
  for (int g = 0; g < config.num_groups; ++g) {
    Rng grng(hash_combine(config.seed, 0x67726f75ull + static_cast<uint64_t>(g) * 7919));
    const Image real = synth_real_image(config.height, config.width, grng);

    std::snprintf(buf, sizeof(buf), "g%04d", g);
    const std::string gid(buf);

    ImageRecord rr;
    rr.id = gid + "_real";
    rr.image_path = "images/" + gid + "_real.png";
    rr.label = 0;
    rr.group_id = gid;
    rr.split = group_split[g];
    io::write_png(out_dir / rr.image_path, real);
    m.records.push_back(rr);

    for (int mi = 0; mi < config.num_methods; ++mi) {
      const uint64_t mseed = hash_combine(config.seed, (static_cast<uint64_t>(g) << 8) | mi);
      auto [forged, mask] = apply_forgery_method(real, mi, mseed);
      ImageRecord fr;
      fr.id = gid + "_f" + std::to_string(mi);
      fr.image_path = "images/" + fr.id + ".png";
      fr.label = 1;
      fr.method = mi;
      fr.group_id = gid;
      fr.split = group_split[g];
      fr.mask_path = "masks/" + fr.id + ".png";
      io::write_png(out_dir / fr.image_path, forged);
      io::write_mask_png(out_dir / *fr.mask_path, mask);
      m.records.push_back(fr);
    }
  }

  m.rebuild_index();
  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

}  // namespace msba
