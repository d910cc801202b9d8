#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "msba/trainer.hpp"

namespace msba {

struct RobustnessCell {
  PerturbKind kind;
  int level;
  double frame_auc;
};

struct RobustnessReport {
  double clean_auc = 0.0;
  std::vector<RobustnessCell> cells;  // 5 kinds x 5 levels
};

// 26-cell sweep (clean + 5x5) over the test split.
RobustnessReport robustness_sweep(const Detector& det, const PromptTable& table,
                                  const Manifest& manifest, int threads, uint64_t seed);
void write_robustness_csv(const RobustnessReport& report, const std::filesystem::path& path);

// Cross-method generalization protocol: train/val keep every method except
// the held-out one; the test split keeps reals plus held-out-method fakes.
Manifest leave_one_method_out(const Manifest& manifest, int held_out_method);

struct AblationRow {
  std::string variant;
  int held_out_method;
  uint64_t seed;
  double heldout_auc;
  std::string config_hash;
};

// Variants: "full", "no_msba" (single-method fakes only), "no_mfie"
// (lambda_int = lambda_wgt = 0).
TrainConfig apply_variant(const TrainConfig& base, const std::string& variant);

std::vector<AblationRow> ablation_run(const TrainConfig& base, const Manifest& manifest,
                                      const std::vector<std::string>& variants,
                                      const std::vector<uint64_t>& seeds,
                                      const std::vector<int>& held_out_methods,
                                      const std::filesystem::path& work_dir);
void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path);

// Mean and population standard deviation of held-out AUC per variant.
struct AblationSummary {
  std::string variant;
  double mean_auc;
  double std_auc;
  int n_runs;
};
std::vector<AblationSummary> summarize_ablation(const std::vector<AblationRow>& rows);

// Per id: input PNG copy, ground-truth patch-target map and predicted map as
// x5-scaled 16-bit PNGs plus raw float files, and a side-by-side triptych.
void export_intensity_maps(const Detector& det, const PromptTable& table,
                           const Manifest& manifest, const std::vector<std::string>& ids,
                           const std::filesystem::path& out_dir);

uint64_t config_hash(const TrainConfig& cfg);

}  // namespace msba
