#include "evhdr/synth.hpp"

#include <algorithm>
#include <cstdio>

namespace evhdr {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a * 4 + b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<BracketSample> synthesize_samples(const HDRFrameSequence& seq,
                                              const SynthConfig& cfg,
                                              const std::string& scene_id) {
  seq.validate();
  cfg.exposure.validate();
  cfg.simulator.validate();
  if (seq.frames.size() < 4) {
    throw InvalidInput("synthesize_samples: need at least 4 frames");
  }
  if (cfg.sample_step < 1) throw InvalidInput("synthesize_samples: sample_step must be >= 1");

  std::vector<float> all;
  for (const auto& f : seq.frames) all.insert(all.end(), f.data.begin(), f.data.end());
  const double scale = saturation_scale(all, cfg.exposure.exposure_times[1], cfg.exposure,
                                        cfg.saturated_fraction);

  HDRFrameSequence scaled = seq;
  for (auto& f : scaled.frames) {
    for (float& v : f.data) v = static_cast<float>(v * scale);
  }
  const EventStream events = simulate_events(
      interpolate_frames(scaled, cfg.simulator.upsample_factor, cfg.simulator.log_eps),
      cfg.simulator);

  std::vector<BracketSample> out;
  for (std::size_t k = 1; k + 2 < scaled.frames.size(); k += cfg.sample_step) {
    BracketSample s;
    s.scene_id = scene_id + "_" + std::to_string(k);
    s.hdr_scale = scale;
    s.timestamps = {scaled.timestamps[k - 1], scaled.timestamps[k],
                    scaled.timestamps[k + 1], scaled.timestamps[k + 2]};
    for (int i = 0; i < 3; ++i) {
      s.ldr[i] = synthesize_ldr(scaled.frames[k + i], cfg.exposure.exposure_times[i],
                                cfg.exposure, mix_seed(cfg.seed, k, i));
      s.ldr[i].is_reference = (i == 1);
      s.linear[i] = linearize(s.ldr[i], cfg.exposure.gamma);
    }
    s.gt = scaled.frames[k + 1];
    s.events = partition_stream(slice_events(events, s.timestamps[0], s.timestamps[3]),
                                s.timestamps[0], s.timestamps[1], s.timestamps[2],
                                s.timestamps[3]);
    attach_voxels(s, cfg.voxels);
    out.push_back(std::move(s));
  }
  return out;
}

io::DatasetManifest save_dataset(const std::vector<BracketSample>& samples,
                                 const SynthConfig& cfg, const fs::path& out_dir) {
  if (cfg.exposure.bit_depth > 8) {
    throw InvalidInput("save_dataset: LDRs are stored as 8-bit PNG; bit_depth must be <= 8");
  }
  fs::create_directories(out_dir);
  io::DatasetManifest m;
  m.gain = cfg.exposure.gain;
  m.gamma = cfg.exposure.gamma;
  if (!samples.empty()) {
    m.width = samples.front().width();
    m.height = samples.front().height();
  }
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& s = samples[n];
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04zu", n);
    const fs::path dir = out_dir / name;
    fs::create_directories(dir);
    io::ManifestSample ms;
    ms.scene_id = s.scene_id;
    ms.timestamps = s.timestamps;
    ms.hdr_scale = s.hdr_scale;
    for (int i = 0; i < 3; ++i) {
      const std::string f = "ldr_" + std::to_string(i) + ".png";
      io::write_png(dir / f, s.ldr[i].pixels);
      ms.ldr[i] = (fs::path(name) / f).string();
      ms.exposure_times[i] = s.ldr[i].exposure_time;
    }
    io::write_pfm(dir / "gt.pfm", s.gt);
    ms.gt = (fs::path(name) / "gt.pfm").string();

    EventStream merged;
    merged.width = s.width();
    merged.height = s.height();
    merged.t_start = s.timestamps[0];
    merged.t_end = s.timestamps[3];
    for (const auto& part : s.events.parts) {
      merged.records.insert(merged.records.end(), part.records.begin(), part.records.end());
    }
    io::write_events(dir / "events.evt", merged);
    ms.events = (fs::path(name) / "events.evt").string();
    m.samples.push_back(std::move(ms));
  }
  m.save(out_dir / "manifest.json");
  return m;
}

BracketSample load_sample(const io::ManifestSample& ms, const fs::path& root, double gamma,
                          const VoxelSettings& voxels) {
  BracketSample s;
  s.scene_id = ms.scene_id;
  s.timestamps = ms.timestamps;
  s.hdr_scale = ms.hdr_scale;
  for (int i = 0; i < 3; ++i) {
    s.ldr[i].pixels = io::read_png(root / ms.ldr[i]);
    s.ldr[i].exposure_time = ms.exposure_times[i];
    s.ldr[i].is_reference = (i == 1);
    if (!s.ldr[i].pixels.same_shape(s.ldr[0].pixels)) {
      throw CorruptFile("sample " + ms.scene_id + ": LDR shapes differ");
    }
    s.linear[i] = linearize(s.ldr[i], gamma);
  }
  if (ms.gt.empty()) {
    const Image& ref = s.ldr[1].pixels;
    s.gt = Image(ref.height, ref.width, ref.channels);
  } else {
    s.gt = io::read_pfm(root / ms.gt);
    if (!s.gt.same_shape(s.ldr[0].pixels)) {
      throw CorruptFile("sample " + ms.scene_id + ": ground truth and LDR shapes differ");
    }
  }
  const EventStream ev = io::read_events(root / ms.events);
  if (ev.width != s.width() || ev.height != s.height()) {
    throw CorruptFile("sample " + ms.scene_id + ": event sensor size differs");
  }
  try {
    s.events = partition_stream(ev, ms.timestamps[0], ms.timestamps[1], ms.timestamps[2],
                                ms.timestamps[3]);
  } catch (const InvalidInput& e) {
    throw CorruptFile("sample " + ms.scene_id + ": " + e.what());
  }
  attach_voxels(s, voxels);
  return s;
}

std::vector<BracketSample> load_dataset(const fs::path& manifest,
                                        const VoxelSettings& voxels) {
  const auto m = io::DatasetManifest::load(manifest);
  const fs::path root = manifest.parent_path();
  std::vector<BracketSample> out;
  for (const auto& ms : m.samples) out.push_back(load_sample(ms, root, m.gamma, voxels));
  return out;
}

HDRFrameSequence load_frame_directory(const fs::path& dir, double fps) {
  if (!(fps > 0.0)) throw InvalidInput("load_frame_directory: fps must be > 0");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pfm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  HDRFrameSequence seq;
  for (std::size_t i = 0; i < files.size(); ++i) {
    Image img = io::read_pfm(files[i]);
    if (img.channels != 3) throw CorruptFile("frame " + files[i].string() + " is not RGB");
    seq.frames.push_back(std::move(img));
    seq.timestamps.push_back(static_cast<double>(i) / fps);
  }
  seq.validate();
  return seq;
}

}  // namespace evhdr
