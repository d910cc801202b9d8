#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "msba/experiments.hpp"
#include "msba/imageio.hpp"
#include "msba/synth.hpp"
#include "test_util.hpp"

using namespace msba;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("msba_exp_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Manifest tiny_corpus(const fs::path& dir, int groups = 8) {
  SyntheticConfig cfg;
  cfg.num_groups = groups;
  cfg.height = 32;
  cfg.width = 32;
  cfg.num_methods = 4;
  cfg.seed = 77;
  return generate_synthetic_corpus(cfg, dir);
}

}  // namespace

TEST_CASE("leave-one-method-out filters train and test as the protocol demands") {
  const Manifest m = tiny_corpus(temp_dir("lomo"));
  const Manifest lomo = leave_one_method_out(m, 2);
  for (const auto& r : lomo.records) {
    if (r.label == 0) continue;
    if (r.split == Split::test)
      CHECK(*r.method == 2);
    else
      CHECK(*r.method != 2);
  }
  // reals all kept
  int reals = 0;
  for (const auto& r : lomo.records) reals += (r.label == 0);
  CHECK(reals == 8);
  CHECK_THROWS(leave_one_method_out(m, 4));
}

TEST_CASE("ablation variants adjust exactly one lever each") {
  TrainConfig base;
  base.model = testutil::tiny_config();
  const TrainConfig full = apply_variant(base, "full");
  CHECK(full.batch_composition.msba_frac == doctest::Approx(1.0 / 3));
  const TrainConfig no_msba = apply_variant(base, "no_msba");
  CHECK(no_msba.batch_composition.msba_frac == 0.0);
  CHECK(no_msba.batch_composition.single_fake_frac == doctest::Approx(2.0 / 3));
  CHECK(no_msba.loss_weights.lambda_int == base.loss_weights.lambda_int);
  const TrainConfig no_mfie = apply_variant(base, "no_mfie");
  CHECK(no_mfie.loss_weights.lambda_int == 0.0);
  CHECK(no_mfie.loss_weights.lambda_wgt == 0.0);
  CHECK(no_mfie.batch_composition.msba_frac == doctest::Approx(1.0 / 3));
  CHECK_THROWS(apply_variant(base, "nope"));

  CHECK(config_hash(full) != config_hash(no_mfie));
  CHECK(config_hash(full) == config_hash(apply_variant(base, "full")));
}

TEST_CASE("robustness sweep: 26 cells, clean cell matches evaluate bit-exactly") {
  const Manifest m = tiny_corpus(temp_dir("robust"), 6);
  Detector det(testutil::tiny_config(), 31);
  const PromptTable table = PromptTable::defaults(det.config().num_fake_prompts);

  const RobustnessReport rep = robustness_sweep(det, table, m, 2, 5);
  CHECK(rep.cells.size() == 25);
  const EvalReport ev = evaluate(det, table, m, Split::test, 2);
  CHECK(rep.clean_auc == *ev.frame_auc);  // bit-exact

  const fs::path dir = temp_dir("robust_csv");
  write_robustness_csv(rep, dir / "r.csv");
  std::ifstream f(dir / "r.csv");
  std::string line;
  int rows = -1;
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 26);

  // determinism of the full sweep
  const RobustnessReport rep2 = robustness_sweep(det, table, m, 1, 5);
  for (size_t i = 0; i < rep.cells.size(); ++i)
    CHECK(rep.cells[i].frame_auc == rep2.cells[i].frame_auc);
}

TEST_CASE("export_intensity_maps writes the documented artifacts") {
  const fs::path data = temp_dir("export_data");
  const Manifest m = tiny_corpus(data, 4);
  Detector det(testutil::tiny_config(), 33);
  const PromptTable table = PromptTable::defaults(det.config().num_fake_prompts);

  std::string real_id, fake_id;
  for (const auto& r : m.records) {
    if (r.label == 0 && real_id.empty()) real_id = r.id;
    if (r.label == 1 && fake_id.empty()) fake_id = r.id;
  }
  const fs::path out = temp_dir("export_out");
  export_intensity_maps(det, table, m, {real_id, fake_id}, out);

  for (const auto& id : {real_id, fake_id}) {
    CHECK(fs::exists(out / (id + "_input.png")));
    CHECK(fs::exists(out / (id + "_gt.png")));
    CHECK(fs::exists(out / (id + "_pred.png")));
    CHECK(fs::exists(out / (id + "_gt.fimp")));
    CHECK(fs::exists(out / (id + "_pred.fimp")));
    CHECK(fs::exists(out / (id + "_triptych.png")));
  }

  // a pristine image's ground-truth map is all black
  const Mat gt = io::read_map_png16(out / (real_id + "_gt.png"));
  for (double v : gt.v) CHECK(v == 0.0);

  // raw float files round-trip through the documented header
  uint32_t h = 0, w = 0, c = 0;
  const auto vals = io::read_fimp(out / (fake_id + "_pred.fimp"), h, w, c);
  CHECK(h == 16);
  CHECK(w == 16);
  CHECK(c == 1);
  CHECK(vals.size() == 256);

  // png sample rule: clamp(round(value*5*65535), 0, 65535)
  const Mat pred_png = io::read_map_png16(out / (fake_id + "_pred.png"));
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      const double expected =
          std::clamp(std::lround(static_cast<double>(vals[i * 16 + j]) * 5.0 * 65535.0), 0l,
                     65535l) /
          65535.0;
      CHECK(pred_png.at(i, j) == doctest::Approx(expected).epsilon(1e-12));
    }

  CHECK_THROWS(export_intensity_maps(det, table, m, {"missing_id"}, out));
}
