#include "evhdr/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "evhdr/checkpoint.hpp"
#include "evhdr/io.hpp"

namespace evhdr::net {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (a + 1)) ^ (0xc2b2ae3d27d4eb4fULL * (b + 7));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool finite(const torch::Tensor& t) { return torch::isfinite(t).all().item<bool>(); }

[[noreturn]] void report_divergence(const ForwardResult& r, const LossTerms& terms, int step) {
  std::string where;
  for (const auto& [name, feat] : r.branches) {
    if (!finite(feat)) {
      where = "branch " + name;
      break;
    }
  }
  if (where.empty() && !finite(r.hdr)) where = "fusion";
  if (where.empty()) {
    for (std::size_t i = 0; i < r.distill_event.size() && where.empty(); ++i) {
      for (const auto& lvl : r.distill_event[i]) {
        if (!finite(lvl)) {
          where = "distill_E keyframe " + std::to_string(i);
          break;
        }
      }
    }
  }
  if (where.empty()) {
    where = finite(terms.l_hdr) ? "distillation loss" : "hdr loss";
  }
  throw TrainingDiverged("non-finite loss at step " + std::to_string(step) +
                         "; first offending component: " + where);
}

torch::Tensor gt_batch(const std::vector<BracketSample>& batch) {
  std::vector<torch::Tensor> gts;
  for (const auto& s : batch) gts.push_back(image_to_tensor(s.gt));
  return torch::stack(gts);
}

}  // namespace

void TrainConfig::validate() const {
  if (crop < 8 || crop % 4 != 0) throw InvalidInput("TrainConfig: crop must be a multiple of 4, at least 8");
  if (batch < 1) throw InvalidInput("TrainConfig: batch must be >= 1");
  if (!(lr > 0.0)) throw InvalidInput("TrainConfig: lr must be > 0");
  if (max_steps <= 0 && epochs <= 0) throw InvalidInput("TrainConfig: no training budget");
  if (lr_decay_every < 1) throw InvalidInput("TrainConfig: lr_decay_every must be >= 1");
  ablation.validate();
  network.validate();
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.crop = 256;
  c.batch = 16;
  c.lr = 1e-4;
  c.epochs = 2000;
  c.max_steps = 0;
  c.lr_decay_every = 500;
  c.lr_decay_factor = 0.1;
  return c;
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  return cfg.lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every);
}

TrainResult train(const std::vector<BracketSample>& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw InvalidInput("train: empty dataset");
  const int n = static_cast<int>(dataset.size());
  const int steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
  const int total_steps = cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * steps_per_epoch;

  torch::manual_seed(cfg.seed);
  TrainResult result;
  result.model = HdrNet(cfg.network, cfg.ablation);
  auto& model = result.model;
  model->train();
  torch::optim::Adam opt(model->parameters(),
                         torch::optim::AdamOptions(cfg.lr)
                             .betas({cfg.adam_beta1, cfg.adam_beta2})
                             .eps(cfg.adam_eps));
  if (!cfg.output_dir.empty()) fs::create_directories(cfg.output_dir);
  std::deque<fs::path> kept;

  std::vector<int> order(n);
  for (int step = 0; step < total_steps; ++step) {
    const int epoch = step / steps_per_epoch;
    const int pos = step % steps_per_epoch;
    if (pos == 0) {
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(mix(cfg.seed, 0xe90c, static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), rng);
    }
    const double lr = learning_rate(cfg, epoch);
    for (auto& group : opt.param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }

    std::vector<BracketSample> batch;
    for (int j = 0; j < cfg.batch; ++j) {
      const BracketSample& src = dataset[order[(pos * cfg.batch + j) % n]];
      BracketSample s = (cfg.crop < src.height() || cfg.crop < src.width())
                            ? sample_crop(src, cfg.crop, mix(cfg.seed, step, 2 * j))
                            : src;
      if (cfg.augment) s = augment(s, mix(cfg.seed, step, 2 * j + 1), s.height() == s.width());
      batch.push_back(std::move(s));
    }
    std::vector<const BracketSample*> ptrs;
    for (const auto& s : batch) ptrs.push_back(&s);

    const auto input = make_input(ptrs);
    const auto fwd = model->forward(input);
    const auto terms = compute_losses(fwd, gt_batch(batch));
    if (!finite(terms.l_total)) report_divergence(fwd, terms, step);

    opt.zero_grad();
    terms.l_total.backward();
    opt.step();

    LossRecord rec{step, epoch, terms.report(), lr};
    result.curve.push_back(rec);
    if (cfg.log_every > 0 && step % cfg.log_every == 0) {
      std::cerr << "step " << step << " epoch " << epoch << " lr " << lr << " l_hdr "
                << rec.loss.l_hdr << " l_distill " << rec.loss.l_distill << " l_total "
                << rec.loss.l_total << "\n";
    }

    const bool epoch_end = pos == steps_per_epoch - 1;
    if (!cfg.output_dir.empty() && epoch_end && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0) {
      char name[48];
      std::snprintf(name, sizeof(name), "epoch_%06d.ckpt", epoch + 1);
      const fs::path p = cfg.output_dir / name;
      save_checkpoint(p, model, step + 1);
      kept.push_back(p);
      while (static_cast<int>(kept.size()) > cfg.keep_checkpoints) {
        fs::remove(kept.front());
        kept.pop_front();
      }
    }
  }

  if (!cfg.output_dir.empty()) {
    result.final_checkpoint = cfg.output_dir / "final.ckpt";
    save_checkpoint(result.final_checkpoint, model, total_steps);
    io::write_text(cfg.output_dir / "loss.csv", loss_curve_csv(result.curve));
  }
  model->eval();
  return result;
}

std::string loss_curve_csv(const std::vector<LossRecord>& curve) {
  std::ostringstream os;
  os.precision(9);
  os << "step,l_hdr,l_distill,l_total,lr\n";
  for (const auto& r : curve) {
    os << r.step << "," << r.loss.l_hdr << "," << r.loss.l_distill << "," << r.loss.l_total
       << "," << r.lr << "\n";
  }
  return os.str();
}

Image predict(HdrNet& model, const BracketSample& sample) {
  torch::NoGradGuard guard;
  auto input = make_input(sample);
  const int64_t h = input.height();
  const int64_t w = input.width();
  const int64_t ph = std::max<int64_t>(8, (h + 3) / 4 * 4) - h;
  const int64_t pw = std::max<int64_t>(8, (w + 3) / 4 * 4) - w;
  if (ph != 0 || pw != 0) {
    namespace F = torch::nn::functional;
    auto pad = [&](const torch::Tensor& t) {
      const auto flat = t.flatten(0, 1);
      auto padded = F::pad(flat, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReplicate));
      return padded.view({t.size(0), t.size(1), t.size(2), h + ph, w + pw});
    };
    input.ldr = pad(input.ldr);
    input.linear = pad(input.linear);
    input.keyframe_events = pad(input.keyframe_events);
    input.windows = pad(input.windows);
  }
  const auto dtype = model->parameters().front().scalar_type();
  auto out = model->forward(input.to(dtype)).hdr[0];
  out = out.slice(1, 0, h).slice(2, 0, w);
  return tensor_to_image(out);
}

MetricReport evaluate(HdrNet& model, const std::vector<BracketSample>& dataset,
                      const std::string& label) {
  model->eval();
  MetricReport report;
  report.label = label.empty() ? model->ablation().label() : label;
  for (const auto& s : dataset) {
    if (s.windows.windows.size() != static_cast<std::size_t>(model->config().windows) &&
        model->ablation().use_event_subsampling) {
      throw InvalidInput("evaluate: sample window count does not match the network");
    }
    const Image pred = predict(model, s);
    report.add({s.scene_id, psnr(pred, s.gt, PsnrDomain::Linear), psnr(pred, s.gt, PsnrDomain::Mu)});
  }
  return report;
}

MetricReport evaluate(const fs::path& checkpoint, const std::vector<BracketSample>& dataset,
                      const std::optional<AblationConfig>& expected) {
  CheckpointInfo info;
  HdrNet model = load_checkpoint(checkpoint, &info);
  if (expected && !(*expected == info.ablation)) {
    throw InvalidInput("evaluate: checkpoint was trained as '" + info.ablation.label() +
                       "' but '" + expected->label() + "' was requested");
  }
  return evaluate(model, dataset);
}

std::vector<AblationRow> run_ablation(const std::vector<BracketSample>& dataset,
                                      const TrainConfig& base) {
  std::vector<AblationRow> rows;
  for (const auto& ab : AblationConfig::table_rows()) {
    TrainConfig cfg = base;
    cfg.ablation = ab;
    if (!base.output_dir.empty()) {
      std::string dir = ab.label();
      std::replace_if(dir.begin(), dir.end(), [](char ch) { return !std::isalnum(static_cast<unsigned char>(ch)); }, '_');
      cfg.output_dir = base.output_dir / dir;
    }
    auto trained = train(dataset, cfg);
    AblationRow row;
    row.ablation = ab;
    row.parameters = trained.model->parameter_count();
    row.report = evaluate(trained.model, dataset, ab.label());
    row.curve = std::move(trained.curve);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "| Method | Parameters | PSNR-L | PSNR-mu |\n|---|---:|---:|---:|\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "| %s | %lld | %.2f | %.2f |\n", r.ablation.label().c_str(),
                  static_cast<long long>(r.parameters), r.report.mean_psnr_l, r.report.mean_psnr_mu);
    os << buf;
  }
  return os.str();
}

}  // namespace evhdr::net
