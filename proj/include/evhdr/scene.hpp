#pragma once

#include <cstdint>

#include "evhdr/event_sim.hpp"

namespace evhdr {

/// Procedural HDR video: a textured, colored background under a soft
/// illumination gradient, with bright emitters and a dark occluder that
/// translate over time.
struct SceneConfig {
  int width = 64;
  int height = 64;
  int frames = 8;
  double fps = 25.0;
  double motion_px = 1.5;     // per-frame displacement of moving objects
  double highlight = 12.0;    // peak radiance of the emitters
  std::uint64_t seed = 0;
};

HDRFrameSequence render_scene(const SceneConfig& cfg);

}  // namespace evhdr
