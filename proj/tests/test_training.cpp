#include <gtest/gtest.h>

#include <torch/torch.h>

#include <filesystem>
#include <limits>

#include "evhdr/checkpoint.hpp"
#include "evhdr/errors.hpp"
#include "evhdr/io.hpp"
#include "evhdr/training.hpp"
#include "test_support.hpp"

using namespace evhdr;
using namespace evhdr::net;
namespace fs = std::filesystem;

namespace {

TrainConfig small_config(int steps) {
  TrainConfig cfg = TrainConfig::desk();
  cfg.network = test_support::tiny_network();
  cfg.crop = 16;
  cfg.batch = 2;
  cfg.max_steps = steps;
  cfg.seed = 5;
  return cfg;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("evhdr_test_train_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Schedule, StepDecay) {
  TrainConfig cfg = TrainConfig::full_scale();
  const int epochs[5] = {0, 499, 500, 999, 1000};
  const double expected[5] = {1e-4, 1e-4, 1e-5, 1e-5, 1e-6};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(learning_rate(cfg, epochs[i]), expected[i], 1e-15);
}

TEST(TrainConfig, Presets) {
  auto desk = TrainConfig::desk();
  EXPECT_EQ(desk.crop, 64);
  EXPECT_EQ(desk.batch, 2);
  EXPECT_EQ(desk.max_steps, 500);
  EXPECT_DOUBLE_EQ(desk.lr, 1e-4);
  auto full = TrainConfig::full_scale();
  EXPECT_EQ(full.crop, 256);
  EXPECT_EQ(full.batch, 16);
  EXPECT_EQ(full.epochs, 2000);
  EXPECT_EQ(full.lr_decay_every, 500);
  EXPECT_DOUBLE_EQ(full.lr_decay_factor, 0.1);

  TrainConfig bad = desk;
  bad.crop = 30;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad.crop = 4;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = desk;
  bad.batch = 0;
  EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(Train, SameSeedSameCurve) {
  auto data = test_support::tiny_dataset(24, 3);
  auto cfg = small_config(6);
  auto a = train(data, cfg);
  auto b = train(data, cfg);
  ASSERT_EQ(a.curve.size(), 6u);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].loss.l_total, b.curve[i].loss.l_total) << i;
    EXPECT_EQ(a.curve[i].epoch, b.curve[i].epoch);
  }
  // 3 samples, batch 2: two steps per epoch.
  EXPECT_EQ(a.curve[5].epoch, 2);
  cfg.seed = 6;
  auto c = train(data, cfg);
  EXPECT_NE(a.curve[5].loss.l_total, c.curve[5].loss.l_total);
}

TEST(Train, SingleSampleLossDecreases) {
  auto data = std::vector<BracketSample>{test_support::tiny_sample(16)};
  auto cfg = small_config(200);
  cfg.batch = 1;
  cfg.lr = 1e-3;
  auto r = train(data, cfg);
  EXPECT_LT(r.curve.back().loss.l_total, r.curve.front().loss.l_total);
}

TEST(Train, DistillationPullsEventFeaturesTowardImageFeatures) {
  auto sample = test_support::tiny_sample(16);
  auto cfg = small_config(200);
  cfg.batch = 1;
  cfg.lr = 1e-3;
  cfg.augment = false;
  auto relative_gap = [&](HdrNet& net) {
    torch::NoGradGuard guard;
    auto out = net->forward(make_input(sample));
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
      const auto& fe = out.distill_event[i][0];
      const auto& fl = out.distill_image[i][0];
      worst = std::max(worst, ((fe - fl).norm() / fl.norm()).item<double>());
    }
    return worst;
  };
  torch::manual_seed(cfg.seed);
  HdrNet fresh(cfg.network, cfg.ablation);
  const double before = relative_gap(fresh);
  auto r = train({sample}, cfg);
  const double after = relative_gap(r.model);
  EXPECT_LT(after, before);
  EXPECT_LT(r.curve.back().loss.l_distill, 0.5 * r.curve.front().loss.l_distill);
}

TEST(Train, WritesCheckpointsCurveAndKeepsLastThree) {
  auto dir = temp_dir("ckpt");
  auto data = test_support::tiny_dataset(16, 2);
  auto cfg = small_config(0);
  cfg.max_steps = 0;
  cfg.epochs = 5;
  cfg.batch = 1;
  cfg.checkpoint_every = 1;
  cfg.output_dir = dir;
  auto r = train(data, cfg);
  EXPECT_EQ(r.curve.size(), 10u);
  std::vector<std::string> kept;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename().string().rfind("epoch_", 0) == 0) kept.push_back(e.path().filename().string());
  }
  std::sort(kept.begin(), kept.end());
  EXPECT_EQ(kept, (std::vector<std::string>{"epoch_000003.ckpt", "epoch_000004.ckpt", "epoch_000005.ckpt"}));
  ASSERT_TRUE(fs::exists(r.final_checkpoint));
  EXPECT_EQ(read_checkpoint_info(r.final_checkpoint).step, 10);
  const std::string csv = io::read_text(dir / "loss.csv");
  EXPECT_EQ(csv.rfind("step,l_hdr,l_distill,l_total,lr\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}

TEST(Train, NanAbortsWithBranchName) {
  auto data = test_support::tiny_dataset(16, 1);
  data[0].keyframe_voxels[0].values[5] = std::numeric_limits<float>::quiet_NaN();
  auto cfg = small_config(2);
  cfg.batch = 1;
  cfg.augment = false;
  try {
    train(data, cfg);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("event_"), std::string::npos) << e.what();
  }
}

TEST(Train, RejectsEmptyDataset) {
  EXPECT_THROW(train({}, small_config(1)), InvalidInput);
}

TEST(Evaluate, ReportRowsAndCap) {
  auto data = test_support::tiny_dataset(16, 3);
  HdrNet net(test_support::tiny_network(), AblationConfig::full());
  auto report = evaluate(net, data);
  EXPECT_EQ(report.rows.size(), data.size());
  EXPECT_EQ(report.label, "+ Event-to-image distill.");
  Image pred = data[0].gt;
  EXPECT_EQ(psnr(pred, data[0].gt, PsnrDomain::Mu), kPsnrCap);
}

TEST(Evaluate, PadsOddSizes) {
  SceneConfig sc;
  sc.width = 18;
  sc.height = 14;
  sc.frames = 4;
  auto sample = synthesize_samples(render_scene(sc), SynthConfig{}, "odd").at(0);
  HdrNet net(test_support::tiny_network(), AblationConfig::full());
  Image out = predict(net, sample);
  EXPECT_EQ(out.height, 14);
  EXPECT_EQ(out.width, 18);
  EXPECT_EQ(out.channels, 3);
  for (float v : out.data) EXPECT_GE(v, 0.0f);
}

TEST(Evaluate, PadsTinyImagesToMinimumSize) {
  SceneConfig sc;
  sc.width = 5;
  sc.height = 6;
  sc.frames = 4;
  auto sample = synthesize_samples(render_scene(sc), SynthConfig{}, "tiny").at(0);
  HdrNet net(test_support::tiny_network(), AblationConfig::full());
  Image out = predict(net, sample);
  EXPECT_EQ(out.height, 6);
  EXPECT_EQ(out.width, 5);
}

TEST(Evaluate, CheckpointAblationMismatch) {
  auto dir = temp_dir("mismatch");
  fs::create_directories(dir);
  auto data = test_support::tiny_dataset(16, 1);
  HdrNet net(test_support::tiny_network(), AblationConfig::event_alignment());
  save_checkpoint(dir / "m.ckpt", net, 0);
  EXPECT_NO_THROW(evaluate(dir / "m.ckpt", data, AblationConfig::event_alignment()));
  EXPECT_THROW(evaluate(dir / "m.ckpt", data, AblationConfig::full()), InvalidInput);
}

TEST(Ablation, FourRowsSameDataOrder) {
  auto data = test_support::tiny_dataset(16, 2);
  auto cfg = small_config(2);
  auto rows = run_ablation(data, cfg);
  ASSERT_EQ(rows.size(), 4u);
  const auto labels = AblationConfig::table_rows();
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(rows[i].ablation, labels[i]);
    EXPECT_EQ(rows[i].report.rows.size(), data.size());
    EXPECT_EQ(rows[i].curve.size(), 2u);
    if (i > 0) EXPECT_GT(rows[i].parameters, rows[i - 1].parameters);
  }
  const std::string table = ablation_table(rows);
  for (const auto& ab : labels) EXPECT_NE(table.find(ab.label()), std::string::npos);
}
