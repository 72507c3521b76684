#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evhdr/losses.hpp"
#include "evhdr/metrics.hpp"
#include "evhdr/network.hpp"
#include "evhdr/sample.hpp"

namespace evhdr::net {

struct TrainConfig {
  int crop = 64;
  int batch = 2;
  double lr = 1e-4;
  int epochs = 0;        // used when max_steps == 0
  int max_steps = 500;
  int lr_decay_every = 500;  // epochs
  double lr_decay_factor = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool augment = true;
  AblationConfig ablation;
  NetworkConfig network;
  int checkpoint_every = 100;  // epochs
  int keep_checkpoints = 3;
  std::filesystem::path output_dir;  // empty: keep everything in memory
  int log_every = 0;                 // 0: silent

  void validate() const;
  /// Small budget used by the tests: 64px crops, batch 2, 500 steps.
  static TrainConfig desk();
  /// 256px crops, batch 16, 2000 epochs.
  static TrainConfig full_scale();
};

/// Stepped schedule: lr * factor^floor(epoch / decay_every).
double learning_rate(const TrainConfig& cfg, int epoch);

struct LossRecord {
  int step = 0;
  int epoch = 0;
  LossReport loss;
  double lr = 0.0;
};

struct TrainResult {
  HdrNet model{nullptr};
  std::vector<LossRecord> curve;
  std::filesystem::path final_checkpoint;
};

/// Adam optimization of the total loss. Deterministic for a given seed.
/// Throws TrainingDiverged naming the first non-finite branch.
TrainResult train(const std::vector<BracketSample>& dataset, const TrainConfig& cfg);

std::string loss_curve_csv(const std::vector<LossRecord>& curve);

/// Full-resolution inference; inputs are reflect-padded to a multiple of 4
/// and the prediction is cropped back.
Image predict(HdrNet& model, const BracketSample& sample);

MetricReport evaluate(HdrNet& model, const std::vector<BracketSample>& dataset,
                      const std::string& label = "");
/// Throws InvalidInput when `expected` differs from the recorded ablation.
MetricReport evaluate(const std::filesystem::path& checkpoint,
                      const std::vector<BracketSample>& dataset,
                      const std::optional<AblationConfig>& expected = std::nullopt);

struct AblationRow {
  AblationConfig ablation;
  int64_t parameters = 0;
  MetricReport report;
  std::vector<LossRecord> curve;
};

/// Trains and evaluates the four ablation settings with identical seeds and
/// budgets.
std::vector<AblationRow> run_ablation(const std::vector<BracketSample>& dataset,
                                      const TrainConfig& base);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace evhdr::net
