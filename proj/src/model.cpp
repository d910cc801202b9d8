#include "msba/model.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace msba {

using nlohmann::json;

void ModelConfig::validate() const {
  if (patch_size < 1 || image_h % patch_size != 0 || image_w % patch_size != 0)
    throw std::invalid_argument("image sides must divide by patch_size");
  if (d_v % heads != 0) throw std::invalid_argument("d_v must divide by heads");
  if (d_t % text_heads != 0) throw std::invalid_argument("d_t must divide by text_heads");
  if (depth < 1 || text_blocks < 1) throw std::invalid_argument("need at least one block");
  if (num_fake_prompts < 1) throw std::invalid_argument("need at least one fake prompt");
  if (decoder_channels < 1 || num_methods < 1)
    throw std::invalid_argument("decoder channels and methods must be >= 1");
  if (vocab_size < 1 || max_text_tokens < 1)
    throw std::invalid_argument("bad text encoder dimensions");
  if (backbone != "toy" && backbone != "pluggable")
    throw std::invalid_argument("backbone must be 'toy' or 'pluggable'");
}

std::string model_config_to_json(const ModelConfig& c) {
  json j;
  j["patch_size"] = c.patch_size;
  j["image_h"] = c.image_h;
  j["image_w"] = c.image_w;
  j["d_v"] = c.d_v;
  j["d_t"] = c.d_t;
  j["depth"] = c.depth;
  j["heads"] = c.heads;
  j["mlp_ratio"] = c.mlp_ratio;
  j["mip_hidden"] = c.mip_hidden;
  j["num_fake_prompts"] = c.num_fake_prompts;
  j["sim_temperature_init"] = c.sim_temperature_init;
  j["decoder_channels"] = c.decoder_channels;
  j["num_methods"] = c.num_methods;
  j["backbone"] = c.backbone;
  j["vocab_size"] = c.vocab_size;
  j["text_blocks"] = c.text_blocks;
  j["text_heads"] = c.text_heads;
  j["max_text_tokens"] = c.max_text_tokens;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig c;
  c.patch_size = j.value("patch_size", c.patch_size);
  c.image_h = j.value("image_h", c.image_h);
  c.image_w = j.value("image_w", c.image_w);
  c.d_v = j.value("d_v", c.d_v);
  c.d_t = j.value("d_t", c.d_t);
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", c.heads);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.mip_hidden = j.value("mip_hidden", c.mip_hidden);
  c.num_fake_prompts = j.value("num_fake_prompts", c.num_fake_prompts);
  c.sim_temperature_init = j.value("sim_temperature_init", c.sim_temperature_init);
  c.decoder_channels = j.value("decoder_channels", c.decoder_channels);
  c.num_methods = j.value("num_methods", c.num_methods);
  c.backbone = j.value("backbone", c.backbone);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.text_blocks = j.value("text_blocks", c.text_blocks);
  c.text_heads = j.value("text_heads", c.text_heads);
  c.max_text_tokens = j.value("max_text_tokens", c.max_text_tokens);
  c.validate();
  return c;
}

const std::vector<std::string>& PromptTable::class_names() {
  static const std::vector<std::string> names = {"DeepFakes", "NeuralTextures", "FaceSwap",
                                                 "Face2Face", "Unknown"};
  return names;
}

const std::string& PromptTable::class_for_method(int method) {
  const auto& names = class_names();
  if (method < 0 || method >= 4) return names[4];  // Unknown
  return names[method];
}

PromptTable PromptTable::defaults(int num_fake_prompts) {
  PromptTable t;
  for (const auto& name : class_names())
    t.class_prompts[name] = "The forgery type of this fake face is " + name;
  static const std::vector<std::string> base = {
      "A manipulated face",
      "This is a synthetic portrait",
      "A digitally forged face image",
      "This face has been tampered with",
      "An artificially generated face",
      "A fake human face",
      "This image shows a face swap",
      "A photo with facial manipulation",
      "This portrait is not authentic",
      "A counterfeit facial image",
      "A face with synthetic artifacts",
      "This face was altered by software",
      "A doctored face photograph",
      "An image containing a forged face",
      "A machine generated facial image",
      "This is a fabricated face picture",
  };
  for (int i = 0; i < num_fake_prompts; ++i) {
    if (i < static_cast<int>(base.size()))
      t.fake_prompts.push_back(base[i]);
    else
      t.fake_prompts.push_back("A fake face, description variant " + std::to_string(i));
  }
  return t;
}

void PromptTable::validate(int num_fake_prompts) const {
  if (class_prompts.size() != 5) throw std::invalid_argument("need exactly 5 class prompts");
  for (const auto& name : class_names())
    if (!class_prompts.count(name) || class_prompts.at(name).empty())
      throw std::invalid_argument("missing class prompt: " + name);
  if (static_cast<int>(fake_prompts.size()) != num_fake_prompts)
    throw std::invalid_argument("fake prompt count mismatch");
  for (const auto& p : fake_prompts)
    if (p.empty()) throw std::invalid_argument("empty fake prompt");
}

std::string prompt_table_to_json(const PromptTable& t) {
  json j;
  j["class_prompts"] = t.class_prompts;
  j["fake_prompts"] = t.fake_prompts;
  return j.dump();
}

PromptTable prompt_table_from_json(const std::string& text) {
  const json j = json::parse(text);
  PromptTable t;
  t.class_prompts = j.at("class_prompts").get<std::map<std::string, std::string>>();
  t.fake_prompts = j.at("fake_prompts").get<std::vector<std::string>>();
  return t;
}

std::vector<int> tokenize_prompt(const std::string& prompt, int vocab_size, int max_tokens) {
  if (prompt.empty()) throw std::invalid_argument("empty prompt");
  std::vector<int> ids;
  std::string word;
  auto flush = [&] {
    if (word.empty() || static_cast<int>(ids.size()) >= max_tokens) {
      word.clear();
      return;
    }
    uint64_t h = 14695981039346656037ull;  // FNV-1a 64
    for (unsigned char ch : word) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    ids.push_back(static_cast<int>(h % static_cast<uint64_t>(vocab_size)));
    word.clear();
  };
  for (char ch : prompt) {
    if (std::isalnum(static_cast<unsigned char>(ch)))
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    else
      flush();
  }
  flush();
  if (ids.empty()) throw std::invalid_argument("prompt has no tokens: " + prompt);
  return ids;
}

Mat image_to_patches(const Image& img, int patch_size) {
  if (img.h % patch_size != 0 || img.w % patch_size != 0)
    throw std::invalid_argument("image sides must divide by patch_size");
  const int gh = img.h / patch_size;
  const int gw = img.w / patch_size;
  Mat out(gh * gw, patch_size * patch_size * img.c);
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      double* row = out.row(gy * gw + gx);
      int k = 0;
      for (int py = 0; py < patch_size; ++py)
        for (int px = 0; px < patch_size; ++px)
          for (int ch = 0; ch < img.c; ++ch)
            row[k++] = img.at(gy * patch_size + py, gx * patch_size + px, ch);
    }
  return out;
}

Detector::Detector(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  init_params(init_seed);
}

namespace {

Detector::Block add_block(nn::ParamSet& ps, const std::string& prefix, int d, int hidden,
                          Rng& rng) {
  Detector::Block b;
  b.ln1_g = ps.add(prefix + ".ln1.gain", 1, d);
  b.ln1_b = ps.add(prefix + ".ln1.bias", 1, d);
  b.wq = ps.add(prefix + ".attn.q.w", d, d);
  b.bq = ps.add(prefix + ".attn.q.b", 1, d);
  b.wk = ps.add(prefix + ".attn.k.w", d, d);
  b.wv = ps.add(prefix + ".attn.v.w", d, d);
  b.bv = ps.add(prefix + ".attn.v.b", 1, d);
  b.wo = ps.add(prefix + ".attn.o.w", d, d);
  b.bo = ps.add(prefix + ".attn.o.b", 1, d);
  b.ln2_g = ps.add(prefix + ".ln2.gain", 1, d);
  b.ln2_b = ps.add(prefix + ".ln2.bias", 1, d);
  b.fc1_w = ps.add(prefix + ".mlp.fc1.w", d, hidden);
  b.fc1_b = ps.add(prefix + ".mlp.fc1.b", 1, hidden);
  b.fc2_w = ps.add(prefix + ".mlp.fc2.w", hidden, d);
  b.fc2_b = ps.add(prefix + ".mlp.fc2.b", 1, d);
  for (int w : {b.wq, b.wk, b.wv, b.wo, b.fc1_w, b.fc2_w})
    nn::xavier_init(ps.at(w).value, rng);
  for (int g : {b.ln1_g, b.ln2_g})
    for (double& x : ps.at(g).value.v) x = 1.0;
  return b;
}

}  // namespace

void Detector::init_params(uint64_t seed) {
  Rng rng(hash_combine(seed, 0x6d6f64656cull));
  const int d = cfg_.d_v;
  const int dt = cfg_.d_t;
  const int n1 = cfg_.num_patches() + 1;

  patch_w_ = params_.add("patch.w", cfg_.patch_size * cfg_.patch_size * 3, d);
  patch_b_ = params_.add("patch.b", 1, d);
  cls_token_ = params_.add("cls_token", 1, d);
  pos_embed_ = params_.add("pos_embed", n1, d);
  nn::xavier_init(params_.at(patch_w_).value, rng);
  nn::trunc_normal_init(params_.at(cls_token_).value, 0.02, rng);
  nn::trunc_normal_init(params_.at(pos_embed_).value, 0.02, rng);

  for (int i = 0; i < cfg_.depth; ++i)
    vis_blocks_.push_back(
        add_block(params_, "vis.b" + std::to_string(i), d, cfg_.mlp_ratio * d, rng));
  vis_lnf_g_ = params_.add("vis.lnf.gain", 1, d);
  vis_lnf_b_ = params_.add("vis.lnf.bias", 1, d);
  for (double& x : params_.at(vis_lnf_g_).value.v) x = 1.0;

  tok_embed_ = params_.add("text.tok_embed", cfg_.vocab_size, dt);
  text_pos_ = params_.add("text.pos_embed", cfg_.max_text_tokens, dt);
  nn::trunc_normal_init(params_.at(tok_embed_).value, 0.02, rng);
  nn::trunc_normal_init(params_.at(text_pos_).value, 0.02, rng);
  for (int i = 0; i < cfg_.text_blocks; ++i)
    text_blocks_.push_back(
        add_block(params_, "text.b" + std::to_string(i), dt, cfg_.mlp_ratio * dt, rng));
  text_lnf_g_ = params_.add("text.lnf.gain", 1, dt);
  text_lnf_b_ = params_.add("text.lnf.bias", 1, dt);
  for (double& x : params_.at(text_lnf_g_).value.v) x = 1.0;

  mip_ln_g_ = params_.add("mip.ln.gain", 1, dt);
  mip_ln_b_ = params_.add("mip.ln.bias", 1, dt);
  mip_fc1_w_ = params_.add("mip.fc1.w", dt, cfg_.mip_hidden);
  mip_fc1_b_ = params_.add("mip.fc1.b", 1, cfg_.mip_hidden);
  mip_fc2_w_ = params_.add("mip.fc2.w", cfg_.mip_hidden, d);
  mip_fc2_b_ = params_.add("mip.fc2.b", 1, d);
  for (double& x : params_.at(mip_ln_g_).value.v) x = 1.0;
  nn::xavier_init(params_.at(mip_fc1_w_).value, rng);
  nn::xavier_init(params_.at(mip_fc2_w_).value, rng);

  head_w_ = params_.add("head.cls.w", d, 1);
  head_b_ = params_.add("head.cls.b", 1, 1);
  sim_w_ = params_.add("head.sim.w", d, dt);
  sim_b_ = params_.add("head.sim.b", 1, dt);
  nn::xavier_init(params_.at(head_w_).value, rng);
  nn::xavier_init(params_.at(sim_w_).value, rng);

  kappa_ = params_.add("kappa", 1, 1);
  params_.at(kappa_).value.at(0, 0) = cfg_.sim_temperature_init;

  mfie::DecoderConfig dcfg;
  dcfg.width = d;
  dcfg.channels = cfg_.decoder_channels;
  dcfg.num_methods = cfg_.num_methods;
  mfie_ = mfie::add_params(params_, dcfg, rng);
}

std::vector<char> Detector::decay_mask() const {
  std::vector<char> mask(params_.count(), 0);
  for (int i = 0; i < params_.count(); ++i) {
    const std::string& n = params_.at(i).name;
    mask[i] = n.size() > 2 && n.compare(n.size() - 2, 2, ".w") == 0;
  }
  return mask;
}

void Detector::set_backbone(const Backbone* backbone) {
  if (backbone) {
    if (cfg_.backbone != "pluggable")
      throw std::invalid_argument("config backbone mode is not 'pluggable'");
    if (backbone->visual_width() != cfg_.d_v || backbone->text_width() != cfg_.d_t)
      throw std::invalid_argument("backbone widths do not match config");
  }
  backbone_ = backbone;
}

double Detector::kappa() const { return params_.at(kappa_).value.at(0, 0); }

void Detector::clamp_kappa(double lo, double hi) {
  double& k = params_.at(kappa_).value.at(0, 0);
  k = std::clamp(k, lo, hi);
}

namespace {

nn::Ref block_forward(nn::Tape& t, const nn::ParamSet& ps, const Detector::Block& b,
                      nn::Ref x, int heads, bool mask_last) {
  nn::Ref h = t.layernorm(x, t.param(ps, b.ln1_g), t.param(ps, b.ln1_b));
  h = t.mha(h, t.param(ps, b.wq), t.param(ps, b.bq), t.param(ps, b.wk), t.param(ps, b.wv),
            t.param(ps, b.bv), t.param(ps, b.wo), t.param(ps, b.bo), heads, mask_last);
  x = t.add(x, h);
  nn::Ref m = t.layernorm(x, t.param(ps, b.ln2_g), t.param(ps, b.ln2_b));
  m = t.linear(m, t.param(ps, b.fc1_w), t.param(ps, b.fc1_b));
  m = t.gelu(m);
  m = t.linear(m, t.param(ps, b.fc2_w), t.param(ps, b.fc2_b));
  return t.add(x, m);
}

}  // namespace

nn::Ref Detector::build_text_feature(nn::Tape& t, const std::string& prompt) const {
  if (backbone_) return t.input(backbone_->text_feature(prompt));
  const auto ids = tokenize_prompt(prompt, cfg_.vocab_size, cfg_.max_text_tokens);
  nn::Ref x = t.embedding(t.param(params_, tok_embed_), ids);
  nn::Ref pos = t.slice_rows(t.param(params_, text_pos_), 0, static_cast<int>(ids.size()));
  x = t.add(x, pos);
  for (const auto& b : text_blocks_) x = block_forward(t, params_, b, x, cfg_.text_heads, false);
  x = t.layernorm(x, t.param(params_, text_lnf_g_), t.param(params_, text_lnf_b_));
  return t.mean_rows(x);
}

nn::Ref Detector::build_patch_tokens(nn::Tape& t, const Image& img) const {
  if (img.h != cfg_.image_h || img.w != cfg_.image_w || img.c != 3)
    throw std::invalid_argument("image shape does not match model config");
  nn::Ref tokens;
  if (backbone_) {
    Mat m = backbone_->image_tokens(img);
    if (m.rows != cfg_.num_patches() + 1 || m.cols != cfg_.d_v)
      throw std::invalid_argument("backbone token shape mismatch");
    tokens = t.input(std::move(m));
  } else {
    nn::Ref pm = t.input(image_to_patches(img, cfg_.patch_size));
    nn::Ref emb = t.linear(pm, t.param(params_, patch_w_), t.param(params_, patch_b_));
    tokens = t.concat_rows(t.param(params_, cls_token_), emb);
  }
  return t.add(tokens, t.param(params_, pos_embed_));
}

nn::Ref Detector::build_mip(nn::Tape& t, nn::Ref text_feat) const {
  nn::Ref x = t.layernorm(text_feat, t.param(params_, mip_ln_g_), t.param(params_, mip_ln_b_));
  x = t.linear(x, t.param(params_, mip_fc1_w_), t.param(params_, mip_fc1_b_));
  x = t.gelu(x);
  return t.linear(x, t.param(params_, mip_fc2_w_), t.param(params_, mip_fc2_b_));
}

Detector::EncoderOut Detector::build_encoder(nn::Tape& t, nn::Ref tokens, nn::Ref text_token,
                                             bool mask_text) const {
  const int n = cfg_.num_patches();
  nn::Ref seq = t.concat_rows(tokens, text_token);
  nn::Ref penultimate = seq;
  for (int i = 0; i < cfg_.depth; ++i) {
    if (i == cfg_.depth - 1) penultimate = seq;
    seq = block_forward(t, params_, vis_blocks_[i], seq, cfg_.heads, mask_text);
  }
  seq = t.layernorm(seq, t.param(params_, vis_lnf_g_), t.param(params_, vis_lnf_b_));
  EncoderOut out;
  out.cls = t.slice_rows(seq, 0, 1);
  out.patches = t.slice_rows(penultimate, 1, n + 1);
  out.text_tok = t.slice_rows(seq, n + 1, n + 2);
  return out;
}

nn::Ref Detector::build_classify(nn::Tape& t, nn::Ref cls) const {
  return t.linear(cls, t.param(params_, head_w_), t.param(params_, head_b_));
}

nn::Ref Detector::build_sim_projection(nn::Tape& t, nn::Ref cls) const {
  return t.linear(cls, t.param(params_, sim_w_), t.param(params_, sim_b_));
}

nn::Ref Detector::build_fused(nn::Tape& t, nn::Ref z, nn::Ref s) const {
  nn::Ref ks = t.mul(t.param(params_, kappa_), s);
  return t.add(t.scale(t.sigmoid(z), 0.5), t.scale(t.sigmoid(ks), 0.5));
}

nn::Ref Detector::build_sim_prob(nn::Tape& t, nn::Ref s) const {
  return t.sigmoid(t.mul(t.param(params_, kappa_), s));
}

Detector::Graph Detector::build(nn::Tape& t, const Image& img, nn::Ref class_feat,
                                nn::Ref fake_feats, bool with_mfie, bool mask_text) const {
  Graph g;
  nn::Ref tokens = build_patch_tokens(t, img);
  nn::Ref text_tok = build_mip(t, class_feat);
  EncoderOut enc = build_encoder(t, tokens, text_tok, mask_text);
  g.cls = enc.cls;
  g.patches = enc.patches;
  g.text_tok = enc.text_tok;
  g.z_cls = build_classify(t, enc.cls);
  nn::Ref proj = build_sim_projection(t, enc.cls);
  g.s = t.cosine_mean(proj, fake_feats);
  g.y_hat = build_fused(t, g.z_cls, g.s);
  if (with_mfie) {
    g.has_mfie = true;
    g.fde = mfie::build_decode(t, mfie_, params_, enc.patches, cfg_.grid_h(), cfg_.grid_w());
    mfie::IntensityGraph ig = mfie::build_intensity(t, mfie_, params_, g.fde, enc.cls);
    g.channel_maps = ig.channel_maps;
    g.channel_weights = ig.channel_weights;
    g.m_all = ig.m_all;
    g.alpha_hat = mfie::build_blend_weights(t, mfie_, params_, enc.cls);
  }
  return g;
}

Mat Detector::compute_text_feature(const std::string& prompt) const {
  nn::Tape t;
  return t.val(build_text_feature(t, prompt));
}

Mat Detector::compute_fake_prompt_features(const PromptTable& table) const {
  table.validate(cfg_.num_fake_prompts);
  Mat out(cfg_.num_fake_prompts, cfg_.d_t);
  for (int i = 0; i < cfg_.num_fake_prompts; ++i) {
    const Mat f = compute_text_feature(table.fake_prompts[i]);
    std::copy(f.row(0), f.row(0) + f.cols, out.row(i));
  }
  return out;
}

ModelOutput Detector::forward(const Image& img, const std::string& class_key,
                              const PromptTable& table,
                              const Mat* precomputed_fake_feats) const {
  if (!table.class_prompts.count(class_key))
    throw std::invalid_argument("unknown class prompt key: " + class_key);
  nn::Tape t;
  nn::Ref cf = build_text_feature(t, table.class_prompts.at(class_key));
  Mat fake_local;
  if (!precomputed_fake_feats) fake_local = compute_fake_prompt_features(table);
  nn::Ref ff = precomputed_fake_feats ? t.input_ref(precomputed_fake_feats)
                                      : t.input(std::move(fake_local));
  Graph g = build(t, img, cf, ff, /*with_mfie=*/false);
  ModelOutput out;
  out.z_cls = t.val(g.z_cls).at(0, 0);
  out.s = t.val(g.s).at(0, 0);
  out.fused_prob = t.val(g.y_hat).at(0, 0);
  out.features.cls = t.val(g.cls);
  out.features.patches = t.val(g.patches);
  out.features.text_token_out = t.val(g.text_tok);
  return out;
}

std::pair<mfie::IntensityPrediction, mfie::WeightPrediction> Detector::predict_maps(
    const Image& img, const std::string& class_key, const PromptTable& table,
    const Mat* precomputed_fake_feats) const {
  nn::Tape t;
  nn::Ref cf = build_text_feature(t, table.class_prompts.at(class_key));
  Mat fake_local;
  if (!precomputed_fake_feats) fake_local = compute_fake_prompt_features(table);
  nn::Ref ff = precomputed_fake_feats ? t.input_ref(precomputed_fake_feats)
                                      : t.input(std::move(fake_local));
  Graph g = build(t, img, cf, ff, /*with_mfie=*/true);

  mfie::IntensityPrediction ip;
  ip.channel_maps = t.val(g.channel_maps);
  ip.channel_weights = t.val(g.channel_weights);
  const Mat& m_all = t.val(g.m_all);
  ip.m_all.resize(4 * cfg_.grid_h(), 4 * cfg_.grid_w());
  std::copy(m_all.v.begin(), m_all.v.end(), ip.m_all.v.begin());

  mfie::WeightPrediction wp;
  const Mat& ah = t.val(g.alpha_hat);
  wp.alpha_hat.assign(ah.v.begin(), ah.v.end());
  return {std::move(ip), std::move(wp)};
}

namespace {

void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ofstream& f, uint64_t v) { f.write(reinterpret_cast<char*>(&v), 8); }
uint32_t read_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::ifstream& f) {
  uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void Detector::save_checkpoint(const std::filesystem::path& path,
                               const PromptTable& table) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path.string());
  f.write("MSBC", 4);
  write_u32(f, 1);
  json blob;
  blob["model"] = json::parse(model_config_to_json(cfg_));
  blob["prompts"] = json::parse(prompt_table_to_json(table));
  const std::string cfg_text = blob.dump();
  write_u64(f, cfg_text.size());
  f.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  write_u32(f, static_cast<uint32_t>(params_.count()));
  std::vector<float> fbuf;
  for (int i = 0; i < params_.count(); ++i) {
    const auto& p = params_.at(i);
    write_u32(f, static_cast<uint32_t>(p.name.size()));
    f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(f, static_cast<uint32_t>(p.value.rows));
    write_u32(f, static_cast<uint32_t>(p.value.cols));
    fbuf.resize(p.value.size());
    for (size_t k = 0; k < fbuf.size(); ++k) fbuf[k] = static_cast<float>(p.value.v[k]);
    f.write(reinterpret_cast<char*>(fbuf.data()),
            static_cast<std::streamsize>(fbuf.size() * 4));
  }
  if (!f) throw std::runtime_error("checkpoint write failed: " + path.string());
}

std::pair<std::unique_ptr<Detector>, PromptTable> Detector::load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "MSBC", 4) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path.string());
  const uint32_t version = read_u32(f);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version");
  const uint64_t cfg_len = read_u64(f);
  std::string cfg_text(cfg_len, '\0');
  f.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));
  const json blob = json::parse(cfg_text);
  const ModelConfig cfg = model_config_from_json(blob.at("model").dump());
  PromptTable table = prompt_table_from_json(blob.at("prompts").dump());

  auto det = std::make_unique<Detector>(cfg, /*init_seed=*/0);
  const uint32_t n = read_u32(f);
  if (n != static_cast<uint32_t>(det->params_.count()))
    throw std::runtime_error("checkpoint tensor count mismatch");
  std::vector<float> fbuf;
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t name_len = read_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint32_t rows = read_u32(f);
    const uint32_t cols = read_u32(f);
    const int idx = det->params_.index_of(name);
    if (idx < 0) throw std::runtime_error("unknown tensor in checkpoint: " + name);
    Mat& m = det->params_.at(idx).value;
    if (m.rows != static_cast<int>(rows) || m.cols != static_cast<int>(cols))
      throw std::runtime_error("tensor shape mismatch: " + name);
    fbuf.resize(m.size());
    f.read(reinterpret_cast<char*>(fbuf.data()), static_cast<std::streamsize>(fbuf.size() * 4));
    for (size_t k = 0; k < fbuf.size(); ++k) m.v[k] = fbuf[k];
  }
  if (!f) throw std::runtime_error("truncated checkpoint: " + path.string());
  return {std::move(det), std::move(table)};
}

}  // namespace msba
