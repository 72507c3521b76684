// evhdr: synthesize bracketed LDR + event datasets, train, evaluate and run
// the HDR fusion network.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "evhdr/checkpoint.hpp"
#include "evhdr/errors.hpp"
#include "evhdr/io.hpp"
#include "evhdr/metrics.hpp"
#include "evhdr/scene.hpp"
#include "evhdr/synth.hpp"
#include "evhdr/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace evhdr;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  SceneConfig scene;
  SynthConfig synth;
  net::TrainConfig train = net::TrainConfig::desk();
};

template <typename T>
void take(const json& obj, const char* key, T& dst) {
  if (obj.contains(key)) dst = obj.at(key).get<T>();
}

void check_keys(const json& obj, const std::string& section, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw UsageError("config: '" + section + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw UsageError("config: unknown key '" + section + "." + k + "'");
  }
}

net::AblationConfig parse_ablation(const std::string& name) {
  if (name == "images-only") return net::AblationConfig::images_only();
  if (name == "event-alignment") return net::AblationConfig::event_alignment();
  if (name == "event-subsampling") return net::AblationConfig::event_subsampling();
  if (name == "full") return net::AblationConfig::full();
  throw UsageError("unknown ablation '" + name + "'");
}

const std::vector<std::string> kAblationNames = {"images-only", "event-alignment",
                                                 "event-subsampling", "full"};

/// Structured-text config: a JSON object with optional sections "scene",
/// "simulator", "exposure", "voxels", "synth", "train" and "network".
void apply_config(Settings& s, const fs::path& path) {
  json root;
  try {
    std::ifstream in(path);
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  try {
    check_keys(root, "config", {"scene", "simulator", "exposure", "voxels", "synth", "train", "network"});
    if (root.contains("scene")) {
      const auto& o = root["scene"];
      check_keys(o, "scene", {"width", "height", "frames", "fps", "motion_px", "highlight"});
      take(o, "width", s.scene.width);
      take(o, "height", s.scene.height);
      take(o, "frames", s.scene.frames);
      take(o, "fps", s.scene.fps);
      take(o, "motion_px", s.scene.motion_px);
      take(o, "highlight", s.scene.highlight);
    }
    if (root.contains("simulator")) {
      const auto& o = root["simulator"];
      check_keys(o, "simulator", {"contrast_threshold", "upsample_factor", "log_eps"});
      take(o, "contrast_threshold", s.synth.simulator.contrast_threshold);
      take(o, "upsample_factor", s.synth.simulator.upsample_factor);
      take(o, "log_eps", s.synth.simulator.log_eps);
    }
    if (root.contains("exposure")) {
      const auto& o = root["exposure"];
      check_keys(o, "exposure", {"exposure_times", "gain", "offset", "saturation", "read_noise",
                                 "adc_noise", "photon_noise", "full_well", "bit_depth", "gamma"});
      auto& e = s.synth.exposure;
      take(o, "exposure_times", e.exposure_times);
      take(o, "gain", e.gain);
      take(o, "offset", e.offset);
      take(o, "saturation", e.saturation);
      take(o, "read_noise", e.read_noise);
      take(o, "adc_noise", e.adc_noise);
      take(o, "photon_noise", e.photon_noise);
      take(o, "full_well", e.full_well);
      take(o, "bit_depth", e.bit_depth);
      take(o, "gamma", e.gamma);
    }
    if (root.contains("voxels")) {
      const auto& o = root["voxels"];
      check_keys(o, "voxels", {"bins", "stride", "normalize"});
      take(o, "bins", s.synth.voxels.bins);
      take(o, "stride", s.synth.voxels.stride);
      take(o, "normalize", s.synth.voxels.normalize);
    }
    if (root.contains("synth")) {
      const auto& o = root["synth"];
      check_keys(o, "synth", {"saturated_fraction", "sample_step"});
      take(o, "saturated_fraction", s.synth.saturated_fraction);
      take(o, "sample_step", s.synth.sample_step);
    }
    if (root.contains("train")) {
      const auto& o = root["train"];
      check_keys(o, "train", {"crop", "batch", "lr", "epochs", "max_steps", "lr_decay_every",
                              "lr_decay_factor", "augment", "checkpoint_every", "keep_checkpoints",
                              "log_every", "ablation"});
      auto& t = s.train;
      take(o, "crop", t.crop);
      take(o, "batch", t.batch);
      take(o, "lr", t.lr);
      take(o, "epochs", t.epochs);
      take(o, "max_steps", t.max_steps);
      take(o, "lr_decay_every", t.lr_decay_every);
      take(o, "lr_decay_factor", t.lr_decay_factor);
      take(o, "augment", t.augment);
      take(o, "checkpoint_every", t.checkpoint_every);
      take(o, "keep_checkpoints", t.keep_checkpoints);
      take(o, "log_every", t.log_every);
      if (o.contains("ablation")) t.ablation = parse_ablation(o["ablation"].get<std::string>());
    }
    if (root.contains("network")) {
      const auto& o = root["network"];
      check_keys(o, "network", {"channels", "offset_groups", "leaky_slope"});
      take(o, "channels", s.train.network.channels);
      take(o, "offset_groups", s.train.network.offset_groups);
      take(o, "leaky_slope", s.train.network.leaky_slope);
    }
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
}

template <typename T>
void override_with(const std::optional<T>& v, T& dst) {
  if (v) dst = *v;
}

/// Network input sizes follow the voxel settings of the data.
void match_network(net::NetworkConfig& n, const VoxelSettings& v) {
  if (v.bins < 1 || v.stride < 1) throw UsageError("voxel bins and stride must be >= 1");
  n.bins = v.bins;
  n.windows = 2 * v.bins / v.stride + 1;
}

VoxelSettings voxels_for(const net::NetworkConfig& n, bool normalize) {
  VoxelSettings v;
  v.bins = n.bins;
  v.stride = n.windows > 1 ? 2 * n.bins / (n.windows - 1) : 1;
  v.normalize = normalize;
  return v;
}

void print_json_report(const MetricReport& report, const std::optional<fs::path>& out) {
  const std::string text = report.to_json();
  std::cout << text << "\n";
  if (out) io::write_text(*out, text);
}

Image preview(const Image& hdr) {
  float peak = 0.0f;
  for (float v : hdr.data) peak = std::max(peak, v);
  Image scaled = hdr;
  if (peak > 0.0f) {
    for (float& v : scaled.data) v /= peak;
  }
  return tonemap(scaled);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HDR reconstruction from bracketed LDR images and events"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON config overriding defaults")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Random seed");

  // scene
  auto* scene = app.add_subcommand("scene", "Render a procedural HDR video as PFM frames");
  std::string scene_out;
  std::optional<int> sc_w, sc_h, sc_frames;
  std::optional<double> sc_fps, sc_motion, sc_highlight;
  scene->add_option("--out", scene_out, "Output directory")->required();
  scene->add_option("--width", sc_w);
  scene->add_option("--height", sc_h);
  scene->add_option("--frames", sc_frames);
  scene->add_option("--fps", sc_fps);
  scene->add_option("--motion", sc_motion, "Displacement per frame in pixels");
  scene->add_option("--highlight", sc_highlight, "Peak emitter radiance");

  // synth
  auto* synth = app.add_subcommand("synth", "HDR frames -> bracketed samples with events");
  std::string synth_in, synth_out, scene_id = "scene";
  std::optional<double> contrast, fps_in, saturated;
  std::optional<int> bins, stride;
  synth->add_option("--in", synth_in, "Directory of PFM frames")->required()->check(CLI::ExistingDirectory);
  synth->add_option("--out", synth_out, "Dataset directory")->required();
  synth->add_option("--contrast", contrast, "Event contrast threshold");
  synth->add_option("--fps", fps_in, "Frame rate of the input frames")->default_str("25");
  synth->add_option("--saturated", saturated, "Fraction of saturated medium-exposure values");
  synth->add_option("--bins", bins, "Temporal bins per voxel grid");
  synth->add_option("--stride", stride, "Sliding-window stride in bins");
  synth->add_option("--scene-id", scene_id);

  // train
  auto* train = app.add_subcommand("train", "Train the network on a dataset");
  std::string train_data, train_out;
  std::optional<int> steps, epochs, batch, crop, channels, log_every;
  std::optional<double> lr;
  std::optional<std::string> ablation;
  bool no_augment = false;
  train->add_option("--data", train_data, "manifest.json")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Run directory")->required();
  train->add_option("--steps", steps);
  train->add_option("--epochs", epochs);
  train->add_option("--batch", batch);
  train->add_option("--crop", crop);
  train->add_option("--lr", lr);
  train->add_option("--channels", channels);
  train->add_option("--log-every", log_every);
  train->add_option("--ablation", ablation)->check(CLI::IsMember(kAblationNames));
  train->add_flag("--no-augment", no_augment);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data;
  std::optional<std::string> eval_out, eval_ablation;
  eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "manifest.json")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Write the JSON report here");
  eval->add_option("--ablation", eval_ablation, "Expected ablation of the checkpoint")
      ->check(CLI::IsMember(kAblationNames));

  // infer
  auto* infer = app.add_subcommand("infer", "3 LDRs + events -> HDR PFM and tonemapped preview");
  std::string infer_ckpt, infer_out;
  std::optional<std::string> infer_data, infer_preview, infer_events;
  std::optional<int> infer_sample;
  std::vector<std::string> infer_ldr;
  std::vector<double> infer_ts, infer_exp;
  std::optional<double> infer_gamma;
  infer->add_option("--checkpoint", infer_ckpt)->required()->check(CLI::ExistingFile);
  infer->add_option("--out", infer_out, "Output PFM")->required();
  infer->add_option("--preview", infer_preview, "Tonemapped PNG (default: next to --out)");
  auto* opt_data = infer->add_option("--data", infer_data, "manifest.json")->check(CLI::ExistingFile);
  infer->add_option("--sample", infer_sample, "Sample index in --data")->needs(opt_data);
  auto* opt_ldr = infer->add_option("--ldr", infer_ldr, "Short, medium, long LDR PNGs")
                      ->expected(3)
                      ->check(CLI::ExistingFile)
                      ->excludes(opt_data);
  infer->add_option("--events", infer_events, "EVT1 stream")->check(CLI::ExistingFile)->needs(opt_ldr);
  infer->add_option("--timestamps", infer_ts, "t0 t1 t2 t3 in seconds")->expected(4)->needs(opt_ldr);
  infer->add_option("--exposures", infer_exp, "Relative exposure times")->expected(3)->needs(opt_ldr);
  infer->add_option("--gamma", infer_gamma)->needs(opt_ldr);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate all four ablation settings");
  std::string ablate_data, ablate_out;
  std::optional<int> ab_steps, ab_batch, ab_crop, ab_channels;
  ablate->add_option("--data", ablate_data, "manifest.json")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", ablate_out, "Output directory")->required();
  ablate->add_option("--steps", ab_steps);
  ablate->add_option("--batch", ab_batch);
  ablate->add_option("--crop", ab_crop);
  ablate->add_option("--channels", ab_channels);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    Settings s;
    if (config_path) apply_config(s, *config_path);
    if (seed) {
      s.scene.seed = *seed;
      s.synth.seed = *seed;
      s.train.seed = *seed;
    }

    if (*scene) {
      override_with(sc_w, s.scene.width);
      override_with(sc_h, s.scene.height);
      override_with(sc_frames, s.scene.frames);
      override_with(sc_fps, s.scene.fps);
      override_with(sc_motion, s.scene.motion_px);
      override_with(sc_highlight, s.scene.highlight);
      if (s.scene.width < 1 || s.scene.height < 1 || s.scene.frames < 4 || !(s.scene.fps > 0.0)) {
        throw UsageError("scene: need width, height >= 1, frames >= 4 and fps > 0");
      }
      const auto seq = render_scene(s.scene);
      fs::create_directories(scene_out);
      for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04zu.pfm", i);
        io::write_pfm(fs::path(scene_out) / name, seq.frames[i]);
      }
      std::cout << "wrote " << seq.frames.size() << " frames to " << scene_out << "\n";
    } else if (*synth) {
      override_with(contrast, s.synth.simulator.contrast_threshold);
      override_with(saturated, s.synth.saturated_fraction);
      override_with(bins, s.synth.voxels.bins);
      override_with(stride, s.synth.voxels.stride);
      const double fps = fps_in.value_or(s.scene.fps);
      if (!(fps > 0.0)) throw UsageError("synth: --fps must be > 0");
      try {
        s.synth.simulator.validate();
        s.synth.exposure.validate();
      } catch (const InvalidInput& e) {
        throw UsageError(e.what());
      }
      if (s.synth.exposure.bit_depth > 8) throw UsageError("synth: LDR PNGs are 8-bit; bit_depth must be <= 8");
      const auto seq = load_frame_directory(synth_in, fps);
      const auto samples = synthesize_samples(seq, s.synth, scene_id);
      const auto manifest = save_dataset(samples, s.synth, synth_out);
      std::cout << "wrote " << manifest.samples.size() << " samples to "
                << (fs::path(synth_out) / "manifest.json").string() << "\n";
    } else if (*train) {
      auto& t = s.train;
      if (steps) {
        t.max_steps = *steps;
        if (!epochs) t.epochs = 0;
      }
      if (epochs) {
        t.epochs = *epochs;
        if (!steps) t.max_steps = 0;
      }
      override_with(batch, t.batch);
      override_with(crop, t.crop);
      override_with(lr, t.lr);
      override_with(channels, t.network.channels);
      override_with(log_every, t.log_every);
      if (ablation) t.ablation = parse_ablation(*ablation);
      if (no_augment) t.augment = false;
      match_network(t.network, s.synth.voxels);
      try {
        t.validate();
      } catch (const InvalidInput& e) {
        throw UsageError(e.what());
      }
      const auto data = load_dataset(train_data, s.synth.voxels);
      t.output_dir = train_out;
      const auto result = net::train(data, t);
      const auto& last = result.curve.back().loss;
      std::cout << "trained " << result.curve.size() << " steps, final l_total " << last.l_total
                << "; checkpoint " << result.final_checkpoint.string() << "\n";
    } else if (*eval) {
      const auto info = net::read_checkpoint_info(eval_ckpt);
      const auto data = load_dataset(eval_data, voxels_for(info.network, s.synth.voxels.normalize));
      std::optional<net::AblationConfig> expected;
      if (eval_ablation) expected = parse_ablation(*eval_ablation);
      const auto report = net::evaluate(eval_ckpt, data, expected);
      std::optional<fs::path> out;
      if (eval_out) out = fs::path(*eval_out);
      print_json_report(report, out);
    } else if (*infer) {
      if (!infer_data && infer_ldr.empty()) throw UsageError("infer: give --data/--sample or --ldr/--events/--timestamps");
      if (!infer_ldr.empty() && (!infer_events || infer_ts.size() != 4)) {
        throw UsageError("infer: --ldr needs --events and --timestamps");
      }
      net::CheckpointInfo info;
      auto model = net::load_checkpoint(infer_ckpt, &info);
      const auto vox = voxels_for(info.network, s.synth.voxels.normalize);
      BracketSample sample;
      if (infer_data) {
        const auto manifest = io::DatasetManifest::load(*infer_data);
        const int k = infer_sample.value_or(0);
        if (k < 0 || k >= static_cast<int>(manifest.samples.size())) {
          throw UsageError("infer: --sample out of range");
        }
        sample = load_sample(manifest.samples[k], fs::path(*infer_data).parent_path(), manifest.gamma, vox);
      } else {
        io::ManifestSample ms;
        ms.scene_id = "input";
        for (int i = 0; i < 3; ++i) ms.ldr[i] = fs::absolute(infer_ldr[i]).string();
        ms.events = fs::absolute(*infer_events).string();
        for (int i = 0; i < 4; ++i) ms.timestamps[i] = infer_ts[i];
        ms.exposure_times = s.synth.exposure.exposure_times;
        if (infer_exp.size() == 3) {
          for (int i = 0; i < 3; ++i) ms.exposure_times[i] = infer_exp[i];
        }
        sample = load_sample(ms, fs::path(), infer_gamma.value_or(s.synth.exposure.gamma), vox);
      }
      const Image hdr = net::predict(model, sample);
      const fs::path out_pfm = infer_out;
      const fs::path out_png = infer_preview ? fs::path(*infer_preview)
                                             : fs::path(out_pfm).replace_extension(".png");
      if (out_pfm.has_parent_path()) fs::create_directories(out_pfm.parent_path());
      io::write_pfm(out_pfm, hdr);
      io::write_png(out_png, preview(hdr));
      std::cout << "wrote " << out_pfm.string() << " and " << out_png.string() << "\n";
    } else if (*ablate) {
      auto& t = s.train;
      if (ab_steps) {
        t.max_steps = *ab_steps;
        t.epochs = 0;
      }
      override_with(ab_batch, t.batch);
      override_with(ab_crop, t.crop);
      override_with(ab_channels, t.network.channels);
      match_network(t.network, s.synth.voxels);
      try {
        t.validate();
      } catch (const InvalidInput& e) {
        throw UsageError(e.what());
      }
      const auto data = load_dataset(ablate_data, s.synth.voxels);
      t.output_dir = ablate_out;
      const auto rows = net::run_ablation(data, t);
      const std::string table = net::ablation_table(rows);
      json j = json::array();
      for (const auto& r : rows) {
        j.push_back({{"method", r.ablation.label()},
                     {"parameters", r.parameters},
                     {"report", json::parse(r.report.to_json())}});
      }
      io::write_text(fs::path(ablate_out) / "ablation.md", table);
      io::write_text(fs::path(ablate_out) / "ablation.json", j.dump(2));
      std::cout << table;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const CorruptFile& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
