#include "evhdr/scene.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace evhdr {

namespace {

struct Blob {
  double y, x, vy, vx, radius, peak;
  std::array<double, 3> color;
};

}  // namespace

HDRFrameSequence render_scene(const SceneConfig& cfg) {
  if (cfg.width <= 0 || cfg.height <= 0 || cfg.frames < 1 || !(cfg.fps > 0.0)) {
    throw InvalidInput("render_scene: invalid scene configuration");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double W = cfg.width;
  const double H = cfg.height;
  const double two_pi = 2.0 * std::numbers::pi;

  // Background texture: a few oriented sinusoids per channel.
  struct Wave {
    double ky, kx, phase, amp;
  };
  std::array<std::array<Wave, 3>, 3> waves{};
  for (auto& ch : waves) {
    for (auto& wv : ch) {
      const double period = 8.0 + 24.0 * u(rng);
      const double angle = two_pi * u(rng);
      wv = {std::sin(angle) / period, std::cos(angle) / period, two_pi * u(rng),
            0.15 + 0.2 * u(rng)};
    }
  }
  const double pan_y = (u(rng) - 0.5) * 0.5 * cfg.motion_px;
  const double pan_x = (u(rng) - 0.5) * 0.5 * cfg.motion_px;
  const double light_angle = two_pi * u(rng);

  std::vector<Blob> blobs;
  for (int i = 0; i < 2; ++i) {
    const double a = two_pi * u(rng);
    blobs.push_back({H * (0.2 + 0.6 * u(rng)), W * (0.2 + 0.6 * u(rng)),
                     cfg.motion_px * std::sin(a), cfg.motion_px * std::cos(a),
                     std::max(1.5, 0.04 * std::min(W, H) * (1.0 + u(rng))),
                     cfg.highlight * (0.5 + 0.5 * u(rng)),
                     {0.7 + 0.3 * u(rng), 0.7 + 0.3 * u(rng), 0.7 + 0.3 * u(rng)}});
  }
  const double occ_a = two_pi * u(rng);
  Blob occluder{H * (0.3 + 0.4 * u(rng)), W * (0.3 + 0.4 * u(rng)),
                cfg.motion_px * std::sin(occ_a), cfg.motion_px * std::cos(occ_a),
                0.12 * std::min(W, H), 0.0, {0.08, 0.08, 0.1}};

  HDRFrameSequence seq;
  for (int f = 0; f < cfg.frames; ++f) {
    Image img(cfg.height, cfg.width, 3);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const double sy = y + pan_y * f;
        const double sx = x + pan_x * f;
        // Illumination falloff spanning roughly a factor of 4.
        const double ramp = (std::cos(light_angle) * (x / W - 0.5) +
                             std::sin(light_angle) * (y / H - 0.5));
        const double illum = std::exp2(2.0 * ramp);
        std::array<double, 3> v{};
        for (int c = 0; c < 3; ++c) {
          double t = 0.35;
          for (const auto& wv : waves[c]) {
            t += wv.amp * std::sin(two_pi * (wv.ky * sy + wv.kx * sx) + wv.phase);
          }
          v[c] = std::max(0.1, t) * 0.4 * illum;
        }
        const double oy = y - (occluder.y + occluder.vy * f);
        const double ox = x - (occluder.x + occluder.vx * f);
        const double od = std::sqrt(oy * oy + ox * ox) - occluder.radius;
        const double cover = std::clamp(0.5 - od, 0.0, 1.0);
        for (int c = 0; c < 3; ++c) v[c] = (1.0 - cover) * v[c] + cover * occluder.color[c];
        for (const auto& b : blobs) {
          const double by = y - (b.y + b.vy * f);
          const double bx = x - (b.x + b.vx * f);
          const double g = std::exp(-(by * by + bx * bx) / (2.0 * b.radius * b.radius));
          for (int c = 0; c < 3; ++c) v[c] += b.peak * b.color[c] * g;
        }
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(v[c]);
      }
    }
    seq.frames.push_back(std::move(img));
    seq.timestamps.push_back(f / cfg.fps);
  }
  return seq;
}

}  // namespace evhdr
