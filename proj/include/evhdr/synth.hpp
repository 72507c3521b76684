#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evhdr/event_sim.hpp"
#include "evhdr/io.hpp"
#include "evhdr/ldr_sim.hpp"
#include "evhdr/sample.hpp"

namespace evhdr {

struct SynthConfig {
  SimulatorConfig simulator;
  ExposureConfig exposure;
  VoxelSettings voxels;
  double saturated_fraction = 0.01;
  int sample_step = 1;  // frame stride between consecutive samples
  std::uint64_t seed = 0;
};

/// Builds bracketed samples from an HDR video. Sample k uses frames
/// k-1 .. k+2: LDRs from k, k+1, k+2 (short, medium, long), ground truth
/// frame k+1 and events over [t_{k-1}, t_{k+2}]. The sequence is first
/// rescaled so the medium exposure saturates `saturated_fraction` of values.
std::vector<BracketSample> synthesize_samples(const HDRFrameSequence& seq,
                                              const SynthConfig& cfg,
                                              const std::string& scene_id);

/// Writes LDR PNGs, ground-truth PFM and EVT1 per sample plus manifest.json.
io::DatasetManifest save_dataset(const std::vector<BracketSample>& samples,
                                 const SynthConfig& cfg,
                                 const std::filesystem::path& out_dir);

/// Reads one sample's files relative to `root`. An empty `gt` path yields a
/// zero ground truth (inference inputs).
BracketSample load_sample(const io::ManifestSample& ms, const std::filesystem::path& root,
                          double gamma, const VoxelSettings& voxels);

/// Loads a manifest written by save_dataset and rebuilds voxel inputs.
std::vector<BracketSample> load_dataset(const std::filesystem::path& manifest,
                                        const VoxelSettings& voxels);

/// Reads every *.pfm in `dir` (sorted by name) as a sequence at `fps`.
HDRFrameSequence load_frame_directory(const std::filesystem::path& dir,
                                      double fps);

}  // namespace evhdr
