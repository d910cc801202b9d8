#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "msba/augment.hpp"
#include "msba/batch.hpp"
#include "msba/manifest.hpp"
#include "msba/model.hpp"
#include "msba/objectives.hpp"
#include "msba/perturb.hpp"

namespace msba {

struct TrainConfig {
  ModelConfig model;
  objectives::LossWeights loss_weights;
  MsbaConfig msba;
  int batch_size = 32;
  int epochs = 10;
  double lr_init = 3e-4;
  double lr_final = 3e-6;
  std::string schedule = "cosine";
  double weight_decay = 0.01;
  uint64_t seed = 7;
  BatchComposition batch_composition;
  std::string prompt_mode = "unknown_only";  // or "type_conditioned_train"
  int threads = 2;

  void validate() const;
  // Scaled-up protocol from the original training recipe: batch 64,
  // 100 epochs, lr 2e-5 -> 2e-7.
  static TrainConfig paper_protocol();
};

std::string train_config_to_json(const TrainConfig& cfg);
// Accepts partial configs; optional "preset" ("toy" | "paper_protocol") and
// "loss_preset" ("paper" | "equal") keys select baselines before overrides.
TrainConfig train_config_from_json(const std::string& text);
TrainConfig train_config_from_file(const std::filesystem::path& path);

// Decoded-image cache over manifest records (8-bit storage).
class ImageCache {
 public:
  explicit ImageCache(const Manifest& manifest) : manifest_(manifest) {}
  void preload(std::initializer_list<Split> splits);
  Image image(const ImageRecord& rec);
  Image real_image(const std::string& group_id);

 private:
  const Manifest& manifest_;
  std::map<std::string, std::pair<std::pair<int, int>, std::vector<uint8_t>>> cache_;
  std::mutex mu_;
};

// Fully-resolved training sample with supervision targets.
struct SupervisedSample {
  Image image;
  int label = 0;
  bool has_alpha = false;
  std::vector<double> alpha;  // model num_methods wide
  Mat intensity_target;       // (H'*W') x 1
  std::string prompt_key = "Unknown";
};

SupervisedSample make_supervised_sample(const SampleSpec& spec, const Manifest& manifest,
                                        ImageCache& cache, const ModelConfig& model_cfg,
                                        const MsbaConfig& msba_cfg,
                                        const std::string& prompt_mode);

// Builds the four-term graph for one sample; l_int/l_wgt are -1 when the
// corresponding terms are inactive.
struct SampleLossRefs {
  nn::Ref l_cls = -1, l_sim = -1, l_int = -1, l_wgt = -1, total = -1;
};
SampleLossRefs build_sample_loss(nn::Tape& t, const Detector& det,
                                 const SupervisedSample& sample, nn::Ref class_feat,
                                 nn::Ref fake_feats, const objectives::LossWeights& w);

// Batch-mean loss; accumulates analytic gradients into grads when given.
// Thread partitioning is by contiguous sample ranges, so results are
// bit-stable for a fixed thread count (threads=1 is the reference order).
objectives::LossBreakdown batch_loss(const Detector& det, const PromptTable& table,
                                     const std::vector<SupervisedSample>& samples,
                                     const objectives::LossWeights& w, nn::GradBuffer* grads,
                                     int threads = 1);

struct FrameScore {
  std::string id;
  std::string group_id;
  int label = 0;
  int method = -1;  // -1 for real frames
  double y_hat = 0.0;
  double z_cls = 0.0;
  double s = 0.0;
};

struct EvalReport {
  double frame_acc = 0.0;
  std::optional<double> frame_auc;
  double video_acc = 0.0;
  std::optional<double> video_auc;
  struct MethodAuc {
    int method;
    double auc;
    int n_fake;
  };
  std::vector<MethodAuc> per_method;
  int n_real = 0;
  int n_fake = 0;
  std::vector<FrameScore> frames;
};

// Metrics recomputed from per-frame scores; video scores average member
// frames per (group, real/method) key.
EvalReport report_from_scores(std::vector<FrameScore> frames);

EvalReport evaluate(const Detector& det, const PromptTable& table, const Manifest& manifest,
                    Split split, int threads,
                    const std::optional<PerturbationSpec>& pert = std::nullopt,
                    uint64_t pert_seed = 0);

void write_scores_csv(const EvalReport& report, const std::filesystem::path& path);
std::vector<FrameScore> read_scores_csv(const std::filesystem::path& path);

struct TrainResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  double best_val_auc = 0.0;
  int best_epoch = -1;
  int total_steps = 0;
  double final_lr = 0.0;
};

TrainResult train(const TrainConfig& cfg, const Manifest& manifest,
                  const std::filesystem::path& out_dir);

}  // namespace msba
