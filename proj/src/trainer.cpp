#include "msba/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "msba/imageio.hpp"
#include "msba/metrics.hpp"

namespace msba {

using nlohmann::json;
using objectives::LossBreakdown;
using objectives::LossWeights;

void TrainConfig::validate() const {
  model.validate();
  loss_weights.validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (lr_final > lr_init) throw std::invalid_argument("lr_final must be <= lr_init");
  if (schedule != "cosine") throw std::invalid_argument("unknown schedule: " + schedule);
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (prompt_mode != "unknown_only" && prompt_mode != "type_conditioned_train")
    throw std::invalid_argument("unknown prompt_mode: " + prompt_mode);
  if (msba.beta <= 0.0) throw std::invalid_argument("msba beta must be > 0");
  if (msba.lambda_min > msba.lambda_max) throw std::invalid_argument("bad lambda range");
}

TrainConfig TrainConfig::paper_protocol() {
  TrainConfig c;
  c.batch_size = 64;
  c.epochs = 100;
  c.lr_init = 2e-5;
  c.lr_final = 2e-7;
  c.model.patch_size = 16;
  c.model.image_h = 224;
  c.model.image_w = 224;
  c.model.mip_hidden = 512;
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["model"] = json::parse(model_config_to_json(c.model));
  j["loss_weights"] = {{"lambda_cls", c.loss_weights.lambda_cls},
                       {"lambda_sim", c.loss_weights.lambda_sim},
                       {"lambda_int", c.loss_weights.lambda_int},
                       {"lambda_wgt", c.loss_weights.lambda_wgt}};
  j["msba"] = {{"beta", c.msba.beta},
               {"lambda_min", c.msba.lambda_min},
               {"lambda_max", c.msba.lambda_max},
               {"min_intensity", c.msba.min_intensity},
               {"signed_difference", c.msba.signed_difference}};
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["lr_init"] = c.lr_init;
  j["lr_final"] = c.lr_final;
  j["schedule"] = c.schedule;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["batch_composition"] = {{"real_frac", c.batch_composition.real_frac},
                            {"single_fake_frac", c.batch_composition.single_fake_frac},
                            {"msba_frac", c.batch_composition.msba_frac}};
  j["prompt_mode"] = c.prompt_mode;
  j["threads"] = c.threads;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainConfig c;
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    if (preset == "paper_protocol")
      c = TrainConfig::paper_protocol();
    else if (preset != "toy")
      throw std::invalid_argument("unknown preset: " + preset);
  }
  if (j.contains("loss_preset")) {
    const std::string preset = j.at("loss_preset").get<std::string>();
    if (preset == "paper")
      c.loss_weights = LossWeights::paper_defaults();
    else if (preset == "equal")
      c.loss_weights = LossWeights::equal_weighting();
    else
      throw std::invalid_argument("unknown loss_preset: " + preset);
  }
  if (j.contains("model")) c.model = model_config_from_json(j.at("model").dump());
  if (j.contains("loss_weights")) {
    const auto& w = j.at("loss_weights");
    c.loss_weights.lambda_cls = w.value("lambda_cls", c.loss_weights.lambda_cls);
    c.loss_weights.lambda_sim = w.value("lambda_sim", c.loss_weights.lambda_sim);
    c.loss_weights.lambda_int = w.value("lambda_int", c.loss_weights.lambda_int);
    c.loss_weights.lambda_wgt = w.value("lambda_wgt", c.loss_weights.lambda_wgt);
  }
  if (j.contains("msba")) {
    const auto& m = j.at("msba");
    c.msba.beta = m.value("beta", c.msba.beta);
    c.msba.lambda_min = m.value("lambda_min", c.msba.lambda_min);
    c.msba.lambda_max = m.value("lambda_max", c.msba.lambda_max);
    c.msba.min_intensity = m.value("min_intensity", c.msba.min_intensity);
    c.msba.signed_difference = m.value("signed_difference", c.msba.signed_difference);
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.lr_init = j.value("lr_init", c.lr_init);
  c.lr_final = j.value("lr_final", c.lr_final);
  c.schedule = j.value("schedule", c.schedule);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  if (j.contains("batch_composition")) {
    const auto& b = j.at("batch_composition");
    c.batch_composition.real_frac = b.value("real_frac", c.batch_composition.real_frac);
    c.batch_composition.single_fake_frac =
        b.value("single_fake_frac", c.batch_composition.single_fake_frac);
    c.batch_composition.msba_frac = b.value("msba_frac", c.batch_composition.msba_frac);
  }
  c.prompt_mode = j.value("prompt_mode", c.prompt_mode);
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

TrainConfig train_config_from_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return train_config_from_json(ss.str());
}

void ImageCache::preload(std::initializer_list<Split> splits) {
  for (const auto& rec : manifest_.records) {
    bool wanted = false;
    for (Split s : splits) wanted |= (rec.split == s);
    if (wanted) image(rec);
  }
}

Image ImageCache::image(const ImageRecord& rec) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(rec.id);
  if (it == cache_.end()) {
    Image img = io::read_png(manifest_.resolve(rec.image_path));
    it = cache_
             .emplace(rec.id, std::make_pair(std::make_pair(img.h, img.w), to_bytes(img)))
             .first;
  }
  const auto& [dims, bytes] = it->second;
  return from_bytes(bytes, dims.first, dims.second, 3);
}

Image ImageCache::real_image(const std::string& group_id) {
  return image(manifest_.real_of_group(group_id));
}

SupervisedSample make_supervised_sample(const SampleSpec& spec, const Manifest& manifest,
                                        ImageCache& cache, const ModelConfig& model_cfg,
                                        const MsbaConfig& msba_cfg,
                                        const std::string& prompt_mode) {
  const int out_h = 4 * model_cfg.grid_h();
  const int out_w = 4 * model_cfg.grid_w();
  SupervisedSample s;
  Rng rng(spec.rng_tag);

  switch (spec.kind) {
    case SampleKind::real: {
      s.image = cache.real_image(spec.record->group_id);
      s.label = 0;
      s.intensity_target.resize(out_h * out_w, 1);  // all-zero target
      break;
    }
    case SampleKind::single_fake: {
      const ImageRecord* fake = spec.record;
      if (fake->label == 0) {
        const auto fakes = manifest.fakes_of_group(spec.record->group_id);
        if (fakes.empty()) throw std::runtime_error("group has no fakes: " + fake->group_id);
        fake = fakes[rng.uniform_int(0, static_cast<int>(fakes.size()) - 1)];
      }
      const Image real = cache.real_image(fake->group_id);
      s.image = cache.image(*fake);
      s.label = 1;
      s.has_alpha = true;
      s.alpha.assign(model_cfg.num_methods, 0.0);
      s.alpha[*fake->method] = 1.0;
      const Mat target = to_patch_targets(intensity_map(real, s.image), out_h, out_w);
      s.intensity_target.resize(out_h * out_w, 1);
      std::copy(target.v.begin(), target.v.end(), s.intensity_target.v.begin());
      if (prompt_mode == "type_conditioned_train")
        s.prompt_key = PromptTable::class_for_method(*fake->method);
      break;
    }
    case SampleKind::msba: {
      const auto fakes = manifest.fakes_of_group(spec.record->group_id);
      if (fakes.empty())
        throw std::runtime_error("group has no fakes: " + spec.record->group_id);
      const Image real = cache.real_image(spec.record->group_id);
      std::vector<Image> forged;
      forged.reserve(fakes.size());
      for (const auto* f : fakes) forged.push_back(cache.image(*f));
      MsbaSample ms = draw_msba_sample(real, forged, msba_cfg, rng);
      s.image = std::move(ms.image);
      s.label = 1;
      s.has_alpha = true;
      s.alpha.assign(model_cfg.num_methods, 0.0);
      for (size_t i = 0; i < fakes.size(); ++i) s.alpha[*fakes[i]->method] = ms.label.alpha[i];
      const Mat target = to_patch_targets(ms.blended_map, out_h, out_w);
      s.intensity_target.resize(out_h * out_w, 1);
      std::copy(target.v.begin(), target.v.end(), s.intensity_target.v.begin());
      break;
    }
  }
  return s;
}

SampleLossRefs build_sample_loss(nn::Tape& t, const Detector& det,
                                 const SupervisedSample& sample, nn::Ref class_feat,
                                 nn::Ref fake_feats, const LossWeights& w) {
  const bool with_mfie = w.lambda_int > 0.0 || w.lambda_wgt > 0.0;
  const Detector::Graph g = det.build(t, sample.image, class_feat, fake_feats, with_mfie);

  SampleLossRefs refs;
  refs.l_cls = t.bce(g.y_hat, sample.label);
  refs.l_sim = t.bce(det.build_sim_prob(t, g.s), sample.label);

  std::vector<nn::Ref> terms = {refs.l_cls, refs.l_sim};
  std::vector<double> weights = {w.lambda_cls, w.lambda_sim};
  if (with_mfie) {
    nn::Ref target = t.input(sample.intensity_target);
    refs.l_int = t.smooth_l1(g.m_all, target);
    terms.push_back(refs.l_int);
    weights.push_back(w.lambda_int);
    if (sample.has_alpha) {
      refs.l_wgt = t.kl_div(sample.alpha, g.alpha_hat);
      terms.push_back(refs.l_wgt);
      weights.push_back(w.lambda_wgt);
    }
  }
  refs.total = t.weighted_sum(terms, weights);
  return refs;
}

namespace {

struct PromptFeatures {
  std::map<std::string, nn::Ref> class_refs;
  std::map<std::string, Mat> class_vals;
  std::vector<nn::Ref> fake_refs;
  Mat fake_mat;  // L x d_t
};

PromptFeatures build_prompt_features(nn::Tape& t, const Detector& det,
                                     const PromptTable& table,
                                     const std::set<std::string>& class_keys) {
  PromptFeatures pf;
  for (const auto& key : class_keys) {
    const nn::Ref r = det.build_text_feature(t, table.class_prompts.at(key));
    pf.class_refs[key] = r;
    pf.class_vals[key] = t.val(r);
  }
  const int L = det.config().num_fake_prompts;
  pf.fake_mat.resize(L, det.config().d_t);
  for (int i = 0; i < L; ++i) {
    const nn::Ref r = det.build_text_feature(t, table.fake_prompts[i]);
    pf.fake_refs.push_back(r);
    const Mat& v = t.val(r);
    std::copy(v.row(0), v.row(0) + v.cols, pf.fake_mat.row(i));
  }
  return pf;
}

struct PromptGradSinks {
  std::map<std::string, Mat> class_sinks;  // 1 x d_t each
  Mat fake_sink;                           // L x d_t

  PromptGradSinks(const std::set<std::string>& keys, int l, int d_t) {
    for (const auto& k : keys) class_sinks.emplace(k, Mat(1, d_t));
    fake_sink.resize(l, d_t);
  }
  void accumulate(const PromptGradSinks& o) {
    for (auto& [k, m] : class_sinks) add_inplace(m, o.class_sinks.at(k));
    add_inplace(fake_sink, o.fake_sink);
  }
};

}  // namespace

LossBreakdown batch_loss(const Detector& det, const PromptTable& table,
                         const std::vector<SupervisedSample>& samples, const LossWeights& w,
                         nn::GradBuffer* grads, int threads) {
  if (samples.empty()) throw std::invalid_argument("batch_loss: empty batch");
  table.validate(det.config().num_fake_prompts);
  std::set<std::string> class_keys;
  for (const auto& s : samples) class_keys.insert(s.prompt_key);

  nn::Tape prompt_tape(grads);
  const PromptFeatures pf = build_prompt_features(prompt_tape, det, table, class_keys);
  const int d_t = det.config().d_t;
  const int L = det.config().num_fake_prompts;

  const double inv_b = 1.0 / static_cast<double>(samples.size());
  const int n_workers = std::max(1, std::min<int>(threads, static_cast<int>(samples.size())));

  std::vector<LossBreakdown> worker_sums(n_workers);
  std::vector<nn::GradBuffer> worker_grads;
  std::vector<PromptGradSinks> worker_sinks;
  for (int i = 0; i < n_workers; ++i) {
    if (grads) worker_grads.emplace_back(det.params());
    worker_sinks.emplace_back(class_keys, L, d_t);
  }

  auto run_range = [&](int widx, size_t lo, size_t hi) {
    nn::GradBuffer* wg = grads ? &worker_grads[widx] : nullptr;
    PromptGradSinks& sinks = worker_sinks[widx];
    LossBreakdown& sum = worker_sums[widx];
    nn::Tape t(wg);
    for (size_t i = lo; i < hi; ++i) {
      t.reset();
      const SupervisedSample& s = samples[i];
      nn::Ref cf =
          t.input_grad(&pf.class_vals.at(s.prompt_key),
                       grads ? &sinks.class_sinks.at(s.prompt_key) : nullptr);
      nn::Ref ff = t.input_grad(&pf.fake_mat, grads ? &sinks.fake_sink : nullptr);
      const SampleLossRefs refs = build_sample_loss(t, det, s, cf, ff, w);
      sum.l_cls += t.val(refs.l_cls).at(0, 0) * inv_b;
      sum.l_sim += t.val(refs.l_sim).at(0, 0) * inv_b;
      if (refs.l_int >= 0) sum.l_int += t.val(refs.l_int).at(0, 0) * inv_b;
      if (refs.l_wgt >= 0) sum.l_wgt += t.val(refs.l_wgt).at(0, 0) * inv_b;
      sum.total += t.val(refs.total).at(0, 0) * inv_b;
      if (grads) t.backward(refs.total, inv_b);
    }
  };

  if (n_workers == 1) {
    run_range(0, 0, samples.size());
  } else {
    std::vector<std::thread> pool;
    const size_t per = (samples.size() + n_workers - 1) / n_workers;
    for (int widx = 0; widx < n_workers; ++widx) {
      const size_t lo = widx * per;
      const size_t hi = std::min(samples.size(), lo + per);
      if (lo >= hi) break;
      pool.emplace_back(run_range, widx, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  LossBreakdown out;
  for (const auto& wsum : worker_sums) {
    out.l_cls += wsum.l_cls;
    out.l_sim += wsum.l_sim;
    out.l_int += wsum.l_int;
    out.l_wgt += wsum.l_wgt;
    out.total += wsum.total;
  }

  if (grads) {
    for (const auto& wg : worker_grads) grads->accumulate(wg);
    PromptGradSinks total_sinks(class_keys, L, d_t);
    for (const auto& sk : worker_sinks) total_sinks.accumulate(sk);

    std::vector<std::pair<nn::Ref, const Mat*>> seeds;
    for (const auto& [key, r] : pf.class_refs)
      seeds.emplace_back(r, &total_sinks.class_sinks.at(key));
    std::vector<Mat> fake_rows;
    fake_rows.reserve(L);
    for (int i = 0; i < L; ++i) {
      Mat row(1, d_t);
      std::copy(total_sinks.fake_sink.row(i), total_sinks.fake_sink.row(i) + d_t, row.row(0));
      fake_rows.push_back(std::move(row));
    }
    for (int i = 0; i < L; ++i) seeds.emplace_back(pf.fake_refs[i], &fake_rows[i]);
    prompt_tape.backward_multi(seeds);
  }
  return out;
}

EvalReport report_from_scores(std::vector<FrameScore> frames) {
  EvalReport rep;
  rep.frames = std::move(frames);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& f : rep.frames) {
    scores.push_back(f.y_hat);
    labels.push_back(f.label);
    if (f.label == 0)
      ++rep.n_real;
    else
      ++rep.n_fake;
  }
  rep.frame_acc = metrics::accuracy(scores, labels);
  if (rep.n_real > 0 && rep.n_fake > 0) rep.frame_auc = metrics::auc(scores, labels);

  // Video scores: average member frames per (group, real-or-method) key.
  std::map<std::string, std::pair<double, int>> video_sum;
  std::map<std::string, int> video_label;
  for (const auto& f : rep.frames) {
    const std::string key =
        f.group_id + (f.label == 0 ? "/real" : "/f" + std::to_string(f.method));
    video_sum[key].first += f.y_hat;
    video_sum[key].second += 1;
    video_label[key] = f.label;
  }
  std::vector<double> vscores;
  std::vector<int> vlabels;
  for (const auto& [key, sum] : video_sum) {
    vscores.push_back(sum.first / sum.second);
    vlabels.push_back(video_label[key]);
  }
  rep.video_acc = metrics::accuracy(vscores, vlabels);
  bool has0 = false, has1 = false;
  for (int l : vlabels) (l ? has1 : has0) = true;
  if (has0 && has1) rep.video_auc = metrics::auc(vscores, vlabels);

  // Per-method AUC: all reals vs that method's fakes.
  std::set<int> methods;
  for (const auto& f : rep.frames)
    if (f.label == 1) methods.insert(f.method);
  for (int m : methods) {
    std::vector<double> ms;
    std::vector<int> ml;
    int n_fake = 0;
    for (const auto& f : rep.frames) {
      if (f.label == 0) {
        ms.push_back(f.y_hat);
        ml.push_back(0);
      } else if (f.method == m) {
        ms.push_back(f.y_hat);
        ml.push_back(1);
        ++n_fake;
      }
    }
    if (rep.n_real > 0 && n_fake > 0)
      rep.per_method.push_back({m, metrics::auc(ms, ml), n_fake});
  }
  return rep;
}

EvalReport evaluate(const Detector& det, const PromptTable& table, const Manifest& manifest,
                    Split split, int threads, const std::optional<PerturbationSpec>& pert,
                    uint64_t pert_seed) {
  const auto records = manifest.split_records(split);
  if (records.empty()) throw std::invalid_argument("empty split: " + to_string(split));
  ImageCache cache(manifest);
  for (const auto* r : records) cache.image(*r);  // sequential preload

  const Mat fake_feats = det.compute_fake_prompt_features(table);
  std::vector<FrameScore> frames(records.size());

  auto run_range = [&](size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) {
      const ImageRecord& rec = *records[i];
      Image img = cache.image(rec);
      if (pert) {
        uint64_t h = 14695981039346656037ull;
        for (unsigned char c : rec.id) {
          h ^= c;
          h *= 1099511628211ull;
        }
        img = perturb(img, *pert, hash_combine(pert_seed, h));
      }
      const ModelOutput out = det.forward(img, "Unknown", table, &fake_feats);
      frames[i] = {rec.id,   rec.group_id,         rec.label, rec.method.value_or(-1),
                   out.fused_prob, out.z_cls, out.s};
    }
  };

  const int n_workers = std::max(1, std::min<int>(threads, static_cast<int>(records.size())));
  if (n_workers == 1) {
    run_range(0, records.size());
  } else {
    std::vector<std::thread> pool;
    const size_t per = (records.size() + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w) {
      const size_t lo = w * per;
      const size_t hi = std::min(records.size(), lo + per);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return report_from_scores(std::move(frames));
}

void write_scores_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write scores csv: " + path.string());
  f << "id,group_id,label,y_hat,z_cls,s\n";
  char buf[256];
  for (const auto& fr : report.frames) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g", fr.label, fr.y_hat, fr.z_cls,
                  fr.s);
    f << fr.id << ',' << fr.group_id << ',' << buf << '\n';
  }
}

std::vector<FrameScore> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read scores csv: " + path.string());
  std::string line;
  std::getline(f, line);  // header
  std::vector<FrameScore> frames;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    FrameScore fr;
    std::getline(ss, fr.id, ',');
    std::getline(ss, fr.group_id, ',');
    std::getline(ss, field, ',');
    fr.label = std::stoi(field);
    std::getline(ss, field, ',');
    fr.y_hat = std::stod(field);
    std::getline(ss, field, ',');
    fr.z_cls = std::stod(field);
    std::getline(ss, field, ',');
    fr.s = std::stod(field);
    frames.push_back(std::move(fr));
  }
  return frames;
}

TrainResult train(const TrainConfig& cfg, const Manifest& manifest,
                  const std::filesystem::path& out_dir) {
  cfg.validate();
  if (manifest.num_methods > cfg.model.num_methods)
    throw std::invalid_argument("manifest has more methods than the model supports");
  std::filesystem::create_directories(out_dir);

  Detector det(cfg.model, cfg.seed);
  const PromptTable table = PromptTable::defaults(cfg.model.num_fake_prompts);
  ImageCache cache(manifest);
  cache.preload({Split::train, Split::val});

  BatchIterator iter(manifest, Split::train, cfg.batch_size, cfg.batch_composition, cfg.seed);
  const int total_steps = cfg.epochs * iter.batches_per_epoch();

  nn::AdamW opt;
  opt.init(det.params());
  nn::GradBuffer grads(det.params());
  const std::vector<char> decay = det.decay_mask();

  std::ofstream train_log(out_dir / "train_log.csv", std::ios::binary);
  train_log << "step,l_cls,l_sim,l_int,l_wgt,total,lr\n";
  std::ofstream val_log(out_dir / "val_log.csv", std::ios::binary);
  val_log << "epoch,frame_auc,frame_acc\n";

  TrainResult result;
  result.total_steps = total_steps;
  result.best_checkpoint = out_dir / "checkpoint_best.msbc";
  result.last_checkpoint = out_dir / "checkpoint_last.msbc";
  result.best_val_auc = -1.0;

  std::vector<SampleSpec> batch;
  std::vector<SupervisedSample> samples;
  int step = 0;
  char buf[256];
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    iter.begin_epoch(epoch);
    while (iter.next(batch)) {
      samples.clear();
      samples.reserve(batch.size());
      for (const auto& spec : batch)
        samples.push_back(make_supervised_sample(spec, manifest, cache, cfg.model, cfg.msba,
                                                 cfg.prompt_mode));
      const double lr = nn::cosine_lr(step, total_steps, cfg.lr_init, cfg.lr_final);
      grads.zero();
      const LossBreakdown lb =
          batch_loss(det, table, samples, cfg.loss_weights, &grads, cfg.threads);
      if (!std::isfinite(lb.total))
        throw std::runtime_error("training diverged: non-finite loss at step " +
                                 std::to_string(step));
      opt.step(det.params(), grads, lr, cfg.weight_decay, decay);
      det.clamp_kappa();

      std::snprintf(buf, sizeof(buf), "%d,%.8g,%.8g,%.8g,%.8g,%.8g,%.10g\n", step, lb.l_cls,
                    lb.l_sim, lb.l_int, lb.l_wgt, lb.total, lr);
      train_log << buf;
      result.final_lr = lr;
      ++step;
    }

    const EvalReport val = evaluate(det, table, manifest, Split::val, cfg.threads);
    const double val_auc = val.frame_auc.value_or(val.frame_acc);
    std::snprintf(buf, sizeof(buf), "%d,%.8g,%.8g\n", epoch, val_auc, val.frame_acc);
    val_log << buf;
    if (val_auc > result.best_val_auc) {
      result.best_val_auc = val_auc;
      result.best_epoch = epoch;
      det.save_checkpoint(result.best_checkpoint, table);
    }
  }
  det.save_checkpoint(result.last_checkpoint, table);
  if (result.best_epoch < 0) {
    det.save_checkpoint(result.best_checkpoint, table);
    result.best_epoch = cfg.epochs - 1;
  }
  return result;
}

}  // namespace msba
