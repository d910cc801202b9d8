#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "msba/experiments.hpp"
#include "msba/imageio.hpp"
#include "msba/synth.hpp"
#include "msba/trainer.hpp"

using namespace msba;
using nlohmann::json;

namespace {

void write_snapshot(const std::filesystem::path& out_dir, const json& resolved) {
  std::filesystem::create_directories(out_dir);
  std::ofstream f(out_dir / "resolved_config.json", std::ios::binary);
  f << resolved.dump(2) << "\n";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void print_report(const EvalReport& rep) {
  std::printf("frames: %d real, %d fake\n", rep.n_real, rep.n_fake);
  std::printf("frame_acc: %.4f\n", rep.frame_acc);
  if (rep.frame_auc)
    std::printf("frame_auc: %.4f\n", *rep.frame_auc);
  else
    std::printf("frame_auc: undefined (single class)\n");
  std::printf("video_acc: %.4f\n", rep.video_acc);
  if (rep.video_auc) std::printf("video_auc: %.4f\n", *rep.video_auc);
  for (const auto& m : rep.per_method)
    std::printf("method %d auc: %.4f (%d fakes)\n", m.method, m.auc, m.n_fake);
}

json report_json(const EvalReport& rep) {
  json j;
  j["frame_acc"] = rep.frame_acc;
  if (rep.frame_auc) j["frame_auc"] = *rep.frame_auc;
  j["video_acc"] = rep.video_acc;
  if (rep.video_auc) j["video_auc"] = *rep.video_auc;
  j["n_real"] = rep.n_real;
  j["n_fake"] = rep.n_fake;
  json per = json::array();
  for (const auto& m : rep.per_method)
    per.push_back({{"method", m.method}, {"auc", m.auc}, {"n_fake", m.n_fake}});
  j["per_method"] = per;
  return j;
}

TrainConfig load_train_config(const std::string& config_path, uint64_t seed_override,
                              bool seed_given, int threads_override, bool threads_given) {
  TrainConfig cfg =
      config_path.empty() ? TrainConfig{} : train_config_from_file(config_path);
  if (seed_given) cfg.seed = seed_override;
  if (threads_given) cfg.threads = threads_override;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"soft-blending face-forgery detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  uint64_t seed = 0;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed, "seed override");
  app.add_option("--out", out_dir, "output directory");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  int groups = 50, height = 64, width = 64, methods = 4, patch = 8;
  synth->add_option("--groups", groups, "number of groups");
  synth->add_option("--height", height, "image height");
  synth->add_option("--width", width, "image width");
  synth->add_option("--methods", methods, "forgery methods per group");
  synth->add_option("--patch", patch, "patch size the corpus must divide by");

  auto* train_cmd = app.add_subcommand("train", "train a detector");
  std::string manifest_path;
  int threads = 0;
  train_cmd->add_option("--manifest", manifest_path, "manifest.jsonl path")->required();
  auto* threads_opt = train_cmd->add_option("--threads", threads, "worker threads");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint_path;
  std::string split_name = "test";
  std::string eval_manifest;
  int eval_threads = 2;
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "manifest.jsonl path")->required();
  eval_cmd->add_option("--split", split_name, "train|val|test");
  eval_cmd->add_option("--threads", eval_threads, "worker threads");

  auto* robust_cmd = app.add_subcommand("robustness", "perturbation sweep");
  std::string robust_checkpoint, robust_manifest;
  int robust_threads = 2;
  robust_cmd->add_option("--checkpoint", robust_checkpoint, "checkpoint file")->required();
  robust_cmd->add_option("--manifest", robust_manifest, "manifest.jsonl path")->required();
  robust_cmd->add_option("--threads", robust_threads, "worker threads");

  auto* ablate_cmd = app.add_subcommand("ablate", "leave-one-method-out ablations");
  std::string ablate_manifest;
  std::string seeds_csv = "1,2,3,4,5";
  std::string variants_csv = "full,no_msba,no_mfie";
  std::string methods_csv = "0,1,2,3";
  ablate_cmd->add_option("--manifest", ablate_manifest, "manifest.jsonl path")->required();
  ablate_cmd->add_option("--seeds", seeds_csv, "comma-separated seeds (>=3)");
  ablate_cmd->add_option("--variants", variants_csv, "comma-separated variants");
  ablate_cmd->add_option("--methods", methods_csv, "held-out method indices");

  auto* export_cmd = app.add_subcommand("export-maps", "dump intensity map triptychs");
  std::string export_checkpoint, export_manifest, ids_csv;
  export_cmd->add_option("--checkpoint", export_checkpoint, "checkpoint file")->required();
  export_cmd->add_option("--manifest", export_manifest, "manifest.jsonl path")->required();
  export_cmd->add_option("--ids", ids_csv, "comma-separated record ids")->required();

  auto* preview_cmd = app.add_subcommand("augment-preview", "preview one blended sample");
  std::string preview_manifest, group_id;
  preview_cmd->add_option("--manifest", preview_manifest, "manifest.jsonl path")->required();
  preview_cmd->add_option("--group", group_id, "group id to blend")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the message and usage text
    return code == 0 ? 0 : 1;     // usage errors exit 1; --help exits 0
  }

  try {
    if (*synth) {
      if (out_dir.empty()) throw CLI::ValidationError("--out is required for synth");
      SyntheticConfig cfg;
      cfg.num_groups = groups;
      cfg.height = height;
      cfg.width = width;
      cfg.num_methods = methods;
      cfg.seed = seed;
      cfg.patch_divisor = patch;
      const Manifest m = generate_synthetic_corpus(cfg, out_dir);
      write_snapshot(out_dir, json{{"command", "synth"},
                                   {"num_groups", cfg.num_groups},
                                   {"height", cfg.height},
                                   {"width", cfg.width},
                                   {"num_methods", cfg.num_methods},
                                   {"seed", cfg.seed},
                                   {"patch_divisor", cfg.patch_divisor}});
      std::printf("wrote %zu records under %s\n", m.records.size(), out_dir.c_str());
    } else if (*train_cmd) {
      if (out_dir.empty()) throw CLI::ValidationError("--out is required for train");
      const TrainConfig cfg = load_train_config(config_path, seed, seed_opt->count() > 0,
                                                threads, threads_opt->count() > 0);
      const Manifest m = load_manifest(manifest_path);
      write_snapshot(out_dir, json::parse(train_config_to_json(cfg)));
      const TrainResult r = train(cfg, m, out_dir);
      std::printf("best val auc %.4f at epoch %d; checkpoints in %s\n", r.best_val_auc,
                  r.best_epoch, out_dir.c_str());
    } else if (*eval_cmd) {
      if (out_dir.empty()) throw CLI::ValidationError("--out is required for eval");
      auto [det, table] = Detector::load_checkpoint(checkpoint_path);
      const Manifest m = load_manifest(eval_manifest);
      const EvalReport rep =
          evaluate(*det, table, m, split_from_string(split_name), eval_threads);
      std::filesystem::create_directories(out_dir);
      write_scores_csv(rep, std::filesystem::path(out_dir) / "scores.csv");
      std::ofstream jf(std::filesystem::path(out_dir) / "report.json", std::ios::binary);
      jf << report_json(rep).dump(2) << "\n";
      write_snapshot(out_dir, json{{"command", "eval"},
                                   {"checkpoint", checkpoint_path},
                                   {"manifest", eval_manifest},
                                   {"split", split_name},
                                   {"threads", eval_threads}});
      print_report(rep);
    } else if (*robust_cmd) {
      if (out_dir.empty()) throw CLI::ValidationError("--out is required for robustness");
      auto [det, table] = Detector::load_checkpoint(robust_checkpoint);
      const Manifest m = load_manifest(robust_manifest);
      const RobustnessReport rep = robustness_sweep(*det, table, m, robust_threads, seed);
      std::filesystem::create_directories(out_dir);
      write_robustness_csv(rep, std::filesystem::path(out_dir) / "robustness.csv");
      write_snapshot(out_dir, json{{"command", "robustness"},
                                   {"checkpoint", robust_checkpoint},
                                   {"manifest", robust_manifest},
                                   {"seed", seed},
                                   {"threads", robust_threads}});
      std::printf("clean auc %.4f; grid written to %s/robustness.csv\n", rep.clean_auc,
                  out_dir.c_str());
    } else if (*ablate_cmd) {
      if (out_dir.empty()) throw CLI::ValidationError("--out is required for ablate");
      const TrainConfig base = load_train_config(config_path, seed, seed_opt->count() > 0,
                                                 0, false);
      const Manifest m = load_manifest(ablate_manifest);
      std::vector<uint64_t> seeds;
      for (const auto& s : split_list(seeds_csv)) seeds.push_back(std::stoull(s));
      std::vector<int> held;
      for (const auto& s : split_list(methods_csv)) held.push_back(std::stoi(s));
      const auto rows = ablation_run(base, m, split_list(variants_csv), seeds, held,
                                     std::filesystem::path(out_dir) / "runs");
      write_ablation_csv(rows, std::filesystem::path(out_dir) / "ablation.csv");
      write_snapshot(out_dir, json{{"command", "ablate"},
                                   {"base_config", json::parse(train_config_to_json(base))},
                                   {"seeds", seeds},
                                   {"variants", split_list(variants_csv)},
                                   {"held_out_methods", held}});
      for (const auto& s : summarize_ablation(rows))
        std::printf("%-10s mean heldout auc %.4f +- %.4f (%d runs)\n", s.variant.c_str(),
                    s.mean_auc, s.std_auc, s.n_runs);
    } else if (*export_cmd) {
      if (out_dir.empty()) throw CLI::ValidationError("--out is required for export-maps");
      auto [det, table] = Detector::load_checkpoint(export_checkpoint);
      const Manifest m = load_manifest(export_manifest);
      export_intensity_maps(*det, table, m, split_list(ids_csv), out_dir);
      write_snapshot(out_dir, json{{"command", "export-maps"},
                                   {"checkpoint", export_checkpoint},
                                   {"ids", split_list(ids_csv)}});
      std::printf("maps written to %s\n", out_dir.c_str());
    } else if (*preview_cmd) {
      if (out_dir.empty()) throw CLI::ValidationError("--out is required for augment-preview");
      const Manifest m = load_manifest(preview_manifest);
      ImageCache cache(m);
      const Image real = cache.real_image(group_id);
      const auto fakes = m.fakes_of_group(group_id);
      if (fakes.empty()) throw std::runtime_error("group has no fakes: " + group_id);
      std::vector<Image> forged;
      for (const auto* f : fakes) forged.push_back(cache.image(*f));
      MsbaConfig aug;
      Rng rng(hash_combine(seed, 0x70726576ull));
      const MsbaSample sample = draw_msba_sample(real, forged, aug, rng);

      std::filesystem::create_directories(out_dir);
      const std::filesystem::path dir(out_dir);
      io::write_png(dir / "real.png", real);
      io::write_png(dir / "blended.png", sample.image);
      io::write_map_png16(dir / "blended_map.png", sample.blended_map.channel_mean(), 5.0);
      for (size_t i = 0; i < forged.size(); ++i) {
        const Mat cm = intensity_map(real, forged[i]).channel_mean();
        io::write_map_png16(dir / ("map_m" + std::to_string(*fakes[i]->method) + ".png"), cm,
                            5.0);
      }
      json lbl;
      lbl["alpha"] = sample.label.alpha;
      lbl["lambda"] = sample.spec.lambda;
      lbl["binary_label"] = sample.label.binary_label;
      std::ofstream jf(dir / "soft_label.json", std::ios::binary);
      jf << lbl.dump(2) << "\n";
      write_snapshot(out_dir, json{{"command", "augment-preview"},
                                   {"group", group_id},
                                   {"seed", seed}});
      std::printf("preview written to %s\n", out_dir.c_str());
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
