#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "msba/image.hpp"
#include "msba/mfie.hpp"
#include "msba/nn.hpp"

namespace msba {

struct ModelConfig {
  int patch_size = 8;
  int image_h = 64;
  int image_w = 64;
  int d_v = 128;
  int d_t = 64;
  int depth = 4;
  int heads = 4;
  int mlp_ratio = 4;
  int mip_hidden = 128;
  int num_fake_prompts = 16;  // L
  double sim_temperature_init = 10.0;
  int decoder_channels = 4;  // C
  int num_methods = 4;       // M
  std::string backbone = "toy";  // "toy" or "pluggable"
  // toy text encoder
  int vocab_size = 4096;
  int text_blocks = 2;
  int text_heads = 4;
  int max_text_tokens = 32;

  int grid_h() const { return image_h / patch_size; }
  int grid_w() const { return image_w / patch_size; }
  int num_patches() const { return grid_h() * grid_w(); }
  void validate() const;
};

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

struct PromptTable {
  std::map<std::string, std::string> class_prompts;  // DeepFakes..Unknown
  std::vector<std::string> fake_prompts;             // L generic descriptions

  static PromptTable defaults(int num_fake_prompts);
  static const std::vector<std::string>& class_names();  // fixed order, 5 names
  // Class prompt key for a synthetic method index; real/eval samples use
  // "Unknown".
  static const std::string& class_for_method(int method);
  void validate(int num_fake_prompts) const;
};

std::string prompt_table_to_json(const PromptTable& t);
PromptTable prompt_table_from_json(const std::string& text);

// Frozen feature provider used in "pluggable" mode in place of the toy patch
// embedding and text encoder.
struct Backbone {
  virtual ~Backbone() = default;
  virtual int visual_width() const = 0;
  virtual int text_width() const = 0;
  virtual Mat image_tokens(const Image& img) const = 0;       // (N+1) x d_v
  virtual Mat text_feature(const std::string& s) const = 0;   // 1 x d_t
};

struct VisualFeatures {
  Mat cls;            // 1 x d_v, final layer
  Mat patches;        // N x d_v, penultimate layer, text/class tokens excluded
  Mat text_token_out; // 1 x d_v
};

struct ModelOutput {
  double z_cls = 0.0;
  double s = 0.0;
  double fused_prob = 0.0;
  VisualFeatures features;
};

// FNV-1a word hashing tokenizer; lowercased, split on non-alphanumerics,
// capped at max_tokens. Throws on prompts with no tokens.
std::vector<int> tokenize_prompt(const std::string& prompt, int vocab_size, int max_tokens);

class Detector {
 public:
  Detector(const ModelConfig& cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  std::vector<char> decay_mask() const;  // 2d weights decay, gains/biases do not
  const mfie::Params& mfie_params() const { return mfie_; }

  void set_backbone(const Backbone* backbone);

  double kappa() const;
  void clamp_kappa(double lo = 1.0, double hi = 100.0);

  // Graph builders; all return tape refs so callers can extend the graph.
  nn::Ref build_text_feature(nn::Tape& t, const std::string& prompt) const;  // 1 x d_t
  nn::Ref build_patch_tokens(nn::Tape& t, const Image& img) const;  // (N+1) x d_v
  nn::Ref build_mip(nn::Tape& t, nn::Ref text_feat) const;          // 1 x d_v

  struct EncoderOut {
    nn::Ref cls;      // 1 x d_v (after final layernorm)
    nn::Ref patches;  // N x d_v (penultimate block output)
    nn::Ref text_tok; // 1 x d_v (final layer)
  };
  EncoderOut build_encoder(nn::Tape& t, nn::Ref tokens, nn::Ref text_token,
                           bool mask_text = false) const;

  nn::Ref build_classify(nn::Tape& t, nn::Ref cls) const;        // 1 x 1 logit
  nn::Ref build_sim_projection(nn::Tape& t, nn::Ref cls) const;  // 1 x d_t
  nn::Ref build_fused(nn::Tape& t, nn::Ref z, nn::Ref s) const;  // 1 x 1 prob
  nn::Ref build_sim_prob(nn::Tape& t, nn::Ref s) const;          // sigmoid(kappa*s)

  struct Graph {
    nn::Ref cls, patches, text_tok;
    nn::Ref z_cls, s, y_hat;
    bool has_mfie = false;
    nn::Ref fde, channel_maps, channel_weights, m_all, alpha_hat;
  };
  // class_feat: 1 x d_t node; fake_feats: L x d_t node.
  Graph build(nn::Tape& t, const Image& img, nn::Ref class_feat, nn::Ref fake_feats,
              bool with_mfie, bool mask_text = false) const;

  // Evaluation conveniences (no gradients).
  Mat compute_text_feature(const std::string& prompt) const;           // 1 x d_t
  Mat compute_fake_prompt_features(const PromptTable& table) const;    // L x d_t
  ModelOutput forward(const Image& img, const std::string& class_key,
                      const PromptTable& table,
                      const Mat* precomputed_fake_feats = nullptr) const;
  std::pair<mfie::IntensityPrediction, mfie::WeightPrediction> predict_maps(
      const Image& img, const std::string& class_key, const PromptTable& table,
      const Mat* precomputed_fake_feats = nullptr) const;

  void save_checkpoint(const std::filesystem::path& path, const PromptTable& table) const;
  static std::pair<std::unique_ptr<Detector>, PromptTable> load_checkpoint(
      const std::filesystem::path& path);

  struct Block {
    int ln1_g, ln1_b, wq, bq, wk, wv, bv, wo, bo, ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

 private:
  void init_params(uint64_t seed);

  ModelConfig cfg_;
  nn::ParamSet params_;
  const Backbone* backbone_ = nullptr;

  // visual pathway
  int patch_w_, patch_b_, cls_token_, pos_embed_;
  std::vector<Block> vis_blocks_;
  int vis_lnf_g_, vis_lnf_b_;
  // toy text encoder
  int tok_embed_, text_pos_;
  std::vector<Block> text_blocks_;
  int text_lnf_g_, text_lnf_b_;
  // projection heads
  int mip_ln_g_, mip_ln_b_, mip_fc1_w_, mip_fc1_b_, mip_fc2_w_, mip_fc2_b_;
  int head_w_, head_b_;
  int sim_w_, sim_b_;
  int kappa_;
  mfie::Params mfie_;
};

// Patch extraction: grid row-major, within a patch (y, x, channel) order.
Mat image_to_patches(const Image& img, int patch_size);

}  // namespace msba
