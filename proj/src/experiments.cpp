#include "msba/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "msba/imageio.hpp"

namespace msba {

RobustnessReport robustness_sweep(const Detector& det, const PromptTable& table,
                                  const Manifest& manifest, int threads, uint64_t seed) {
  RobustnessReport rep;
  const EvalReport clean = evaluate(det, table, manifest, Split::test, threads);
  if (!clean.frame_auc) throw std::runtime_error("robustness sweep needs both classes");
  rep.clean_auc = *clean.frame_auc;

  const PerturbKind kinds[5] = {PerturbKind::gaussian_blur, PerturbKind::gaussian_noise,
                                PerturbKind::jpeg_compression, PerturbKind::color_saturation,
                                PerturbKind::color_contrast};
  for (const PerturbKind kind : kinds) {
    for (int level = 1; level <= 5; ++level) {
      const PerturbationSpec spec = make_perturbation(kind, level);
      const uint64_t cell_seed =
          hash_combine(seed, (static_cast<uint64_t>(kind) << 8) | level);
      const EvalReport r = evaluate(det, table, manifest, Split::test, threads, spec,
                                    cell_seed);
      rep.cells.push_back({kind, level, r.frame_auc.value_or(0.0)});
    }
  }
  return rep;
}

void write_robustness_csv(const RobustnessReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write robustness csv: " + path.string());
  f << "kind,level,frame_auc\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "clean,0,%.17g\n", report.clean_auc);
  f << buf;
  for (const auto& c : report.cells) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.17g\n", to_string(c.kind).c_str(), c.level,
                  c.frame_auc);
    f << buf;
  }
}

Manifest leave_one_method_out(const Manifest& manifest, int held_out_method) {
  if (held_out_method < 0 || held_out_method >= manifest.num_methods)
    throw std::invalid_argument("held-out method out of range");
  Manifest out;
  out.base_dir = manifest.base_dir;
  out.num_methods = manifest.num_methods;
  out.height = manifest.height;
  out.width = manifest.width;
  for (const auto& r : manifest.records) {
    if (r.label == 0) {
      out.records.push_back(r);
      continue;
    }
    const bool is_held = (*r.method == held_out_method);
    if (r.split == Split::test ? is_held : !is_held) out.records.push_back(r);
  }
  out.rebuild_index();
  return out;
}

TrainConfig apply_variant(const TrainConfig& base, const std::string& variant) {
  TrainConfig cfg = base;
  if (variant == "full") return cfg;
  if (variant == "no_msba") {
    cfg.batch_composition.single_fake_frac += cfg.batch_composition.msba_frac;
    cfg.batch_composition.msba_frac = 0.0;
    return cfg;
  }
  if (variant == "no_mfie") {
    cfg.loss_weights.lambda_int = 0.0;
    cfg.loss_weights.lambda_wgt = 0.0;
    return cfg;
  }
  throw std::invalid_argument("unknown ablation variant: " + variant);
}

uint64_t config_hash(const TrainConfig& cfg) {
  const std::string text = train_config_to_json(cfg);
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<AblationRow> ablation_run(const TrainConfig& base, const Manifest& manifest,
                                      const std::vector<std::string>& variants,
                                      const std::vector<uint64_t>& seeds,
                                      const std::vector<int>& held_out_methods,
                                      const std::filesystem::path& work_dir) {
  if (seeds.size() < 3) throw std::invalid_argument("ablation needs at least 3 seeds");
  std::filesystem::create_directories(work_dir);
  std::vector<AblationRow> rows;
  char buf[64];
  for (const auto& variant : variants) {
    for (const int held : held_out_methods) {
      const Manifest lomo = leave_one_method_out(manifest, held);
      for (const uint64_t seed : seeds) {
        TrainConfig cfg = apply_variant(base, variant);
        cfg.seed = seed;
        std::snprintf(buf, sizeof(buf), "%s_h%d_s%llu", variant.c_str(), held,
                      static_cast<unsigned long long>(seed));
        const auto run_dir = work_dir / buf;
        const TrainResult tr = train(cfg, lomo, run_dir);
        auto [det, table] = Detector::load_checkpoint(tr.best_checkpoint);
        const EvalReport rep = evaluate(*det, table, lomo, Split::test, cfg.threads);
        AblationRow row;
        row.variant = variant;
        row.held_out_method = held;
        row.seed = seed;
        row.heldout_auc = rep.frame_auc.value_or(0.0);
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(config_hash(cfg)));
        row.config_hash = buf;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write ablation csv: " + path.string());
  f << "variant,held_out_method,seed,heldout_auc,config_hash\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%llu,%.17g,%s\n", r.variant.c_str(),
                  r.held_out_method, static_cast<unsigned long long>(r.seed), r.heldout_auc,
                  r.config_hash.c_str());
    f << buf;
  }
}

std::vector<AblationSummary> summarize_ablation(const std::vector<AblationRow>& rows) {
  std::vector<AblationSummary> out;
  std::vector<std::string> variants;
  for (const auto& r : rows)
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end())
      variants.push_back(r.variant);
  for (const auto& v : variants) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rows)
      if (r.variant == v) {
        sum += r.heldout_auc;
        ++n;
      }
    const double mean = sum / n;
    double var = 0.0;
    for (const auto& r : rows)
      if (r.variant == v) var += (r.heldout_auc - mean) * (r.heldout_auc - mean);
    out.push_back({v, mean, std::sqrt(var / n), n});
  }
  return out;
}

namespace {

Image render_triptych(const Image& input, const Mat& gt, const Mat& pred, double scale) {
  const int h = input.h;
  const int w = input.w;
  Image out(h, 3 * w, 3);
  auto put_gray = [&](const Mat& m, int x0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int my = y * m.rows / h;
        const int mx = x * m.cols / w;
        const double v = std::clamp(m.at(my, mx) * scale, 0.0, 1.0);
        for (int ch = 0; ch < 3; ++ch) out.at(y, x0 + x, ch) = v;
      }
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = input.at(y, x, ch);
  put_gray(gt, w);
  put_gray(pred, 2 * w);
  return out;
}

std::vector<float> map_to_floats(const Mat& m) {
  std::vector<float> out(m.size());
  for (size_t i = 0; i < m.size(); ++i) out[i] = static_cast<float>(m.v[i]);
  return out;
}

}  // namespace

void export_intensity_maps(const Detector& det, const PromptTable& table,
                           const Manifest& manifest, const std::vector<std::string>& ids,
                           const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ImageCache cache(manifest);
  const Mat fake_feats = det.compute_fake_prompt_features(table);
  const int out_h = 4 * det.config().grid_h();
  const int out_w = 4 * det.config().grid_w();
  const double scale = 5.0;  // x5 visibility scale for exported maps

  for (const auto& id : ids) {
    const ImageRecord* rec = manifest.find(id);
    if (!rec) throw std::invalid_argument("unknown record id: " + id);
    const Image img = cache.image(*rec);

    Mat gt(out_h, out_w);
    if (rec->label == 1) {
      const Image real = cache.real_image(rec->group_id);
      gt = to_patch_targets(intensity_map(real, img), out_h, out_w);
    }
    const auto [ip, wp] = det.predict_maps(img, "Unknown", table, &fake_feats);

    io::write_png(out_dir / (id + "_input.png"), img);
    io::write_map_png16(out_dir / (id + "_gt.png"), gt, scale);
    io::write_map_png16(out_dir / (id + "_pred.png"), ip.m_all, scale);
    io::write_fimp(out_dir / (id + "_gt.fimp"), map_to_floats(gt),
                   static_cast<uint32_t>(gt.rows), static_cast<uint32_t>(gt.cols), 1);
    io::write_fimp(out_dir / (id + "_pred.fimp"), map_to_floats(ip.m_all),
                   static_cast<uint32_t>(ip.m_all.rows), static_cast<uint32_t>(ip.m_all.cols),
                   1);
    io::write_png(out_dir / (id + "_triptych.png"), render_triptych(img, gt, ip.m_all, scale));
  }
}

}  // namespace msba
