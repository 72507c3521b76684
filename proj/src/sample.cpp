#include "evhdr/sample.hpp"

#include <algorithm>
#include <random>
#include <utility>

namespace evhdr {

namespace {

struct Dims {
  int h;
  int w;
};

// Destination of source pixel (y, x) in an h x w raster under t.
std::pair<int, int> map_coords(int y, int x, int h, int w,
                               const GeometricTransform& t) {
  if (t.flip_h) x = w - 1 - x;
  if (t.flip_v) y = h - 1 - y;
  const int turns = ((t.rot90 % 4) + 4) % 4;
  for (int i = 0; i < turns; ++i) {
    const int ny = w - 1 - x;
    const int nx = y;
    std::swap(h, w);
    y = ny;
    x = nx;
  }
  return {y, x};
}

Dims output_dims(int h, int w, const GeometricTransform& t) {
  return (((t.rot90 % 4) + 4) % 2 == 1) ? Dims{w, h} : Dims{h, w};
}

}  // namespace

void attach_voxels(BracketSample& sample, const VoxelSettings& settings) {
  const auto& ev = sample.events;
  const int w = sample.width();
  const int h = sample.height();
  for (int i = 0; i < 3; ++i) {
    VoxelGrid g = voxelize(ev.parts[i], settings.bins, ev.bounds[i],
                           ev.bounds[i + 1], w, h);
    sample.keyframe_voxels[i] = settings.normalize ? normalize_voxels(g) : std::move(g);
  }
  sample.windows = sliding_windows(ev, settings.bins, settings.stride);
  if (settings.normalize) {
    for (auto& win : sample.windows.windows) win = normalize_voxels(win);
  }
}

CropWindow draw_crop(int height, int width, int crop, std::uint64_t seed) {
  if (crop <= 0 || crop > height || crop > width) {
    throw InvalidInput("sample_crop: crop larger than sample");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dy(0, height - crop);
  std::uniform_int_distribution<int> dx(0, width - crop);
  const int y0 = dy(rng);
  const int x0 = dx(rng);
  return {y0, x0, crop};
}

BracketSample crop_sample(const BracketSample& sample, const CropWindow& win) {
  BracketSample out;
  out.scene_id = sample.scene_id;
  out.timestamps = sample.timestamps;
  out.hdr_scale = sample.hdr_scale;
  const int s = win.size;
  for (int i = 0; i < 3; ++i) {
    out.ldr[i] = sample.ldr[i];
    out.ldr[i].pixels = crop_image(sample.ldr[i].pixels, win.y0, win.x0, s, s);
    out.linear[i] = sample.linear[i];
    out.linear[i].pixels = crop_image(sample.linear[i].pixels, win.y0, win.x0, s, s);
    if (sample.has_voxels()) {
      out.keyframe_voxels[i] =
          crop_voxels(sample.keyframe_voxels[i], win.y0, win.x0, s, s);
    }
  }
  out.gt = crop_image(sample.gt, win.y0, win.x0, s, s);
  out.windows.keyframe_indices = sample.windows.keyframe_indices;
  for (const auto& g : sample.windows.windows) {
    out.windows.windows.push_back(crop_voxels(g, win.y0, win.x0, s, s));
  }
  out.events.bounds = sample.events.bounds;
  for (int i = 0; i < 3; ++i) {
    const auto& src = sample.events.parts[i];
    auto& dst = out.events.parts[i];
    dst.t_start = src.t_start;
    dst.t_end = src.t_end;
    dst.width = s;
    dst.height = s;
    for (const auto& e : src.records) {
      if (e.x >= win.x0 && e.x < win.x0 + s && e.y >= win.y0 && e.y < win.y0 + s) {
        dst.records.push_back({static_cast<std::uint16_t>(e.x - win.x0),
                               static_cast<std::uint16_t>(e.y - win.y0), e.t, e.p});
      }
    }
  }
  return out;
}

BracketSample sample_crop(const BracketSample& sample, int crop,
                          std::uint64_t seed) {
  return crop_sample(sample, draw_crop(sample.height(), sample.width(), crop, seed));
}

GeometricTransform draw_transform(std::uint64_t seed, bool allow_rotation) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> quarter(0, 3);
  GeometricTransform t;
  t.flip_h = coin(rng) == 1;
  t.flip_v = coin(rng) == 1;
  t.rot90 = allow_rotation ? quarter(rng) : 0;
  return t;
}

Image transform_image(const Image& img, const GeometricTransform& t) {
  if (t.identity()) return img;
  const Dims d = output_dims(img.height, img.width, t);
  Image out(d.h, d.w, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto [ny, nx] = map_coords(y, x, img.height, img.width, t);
      for (int c = 0; c < img.channels; ++c) out.at(ny, nx, c) = img.at(y, x, c);
    }
  }
  return out;
}

VoxelGrid transform_voxels(const VoxelGrid& grid, const GeometricTransform& t) {
  if (t.identity()) return grid;
  const Dims d = output_dims(grid.height, grid.width, t);
  VoxelGrid out(grid.bins, d.h, d.w, grid.t_start, grid.t_end);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const auto [ny, nx] = map_coords(y, x, grid.height, grid.width, t);
      for (int b = 0; b < grid.bins; ++b) out.at(b, ny, nx) = grid.at(b, y, x);
    }
  }
  return out;
}

EventStream transform_events(const EventStream& events,
                             const GeometricTransform& t) {
  if (t.identity()) return events;
  const Dims d = output_dims(events.height, events.width, t);
  EventStream out = events;
  out.height = d.h;
  out.width = d.w;
  for (auto& e : out.records) {
    const auto [ny, nx] = map_coords(e.y, e.x, events.height, events.width, t);
    e.y = static_cast<std::uint16_t>(ny);
    e.x = static_cast<std::uint16_t>(nx);
  }
  std::stable_sort(out.records.begin(), out.records.end(), event_before);
  return out;
}

BracketSample apply_transform(const BracketSample& sample,
                              const GeometricTransform& t) {
  if (t.identity()) return sample;
  BracketSample out = sample;
  for (int i = 0; i < 3; ++i) {
    out.ldr[i].pixels = transform_image(sample.ldr[i].pixels, t);
    out.linear[i].pixels = transform_image(sample.linear[i].pixels, t);
    out.events.parts[i] = transform_events(sample.events.parts[i], t);
    if (sample.has_voxels()) {
      out.keyframe_voxels[i] = transform_voxels(sample.keyframe_voxels[i], t);
    }
  }
  out.gt = transform_image(sample.gt, t);
  for (auto& w : out.windows.windows) w = transform_voxels(w, t);
  return out;
}

BracketSample augment(const BracketSample& sample, std::uint64_t seed,
                      bool allow_rotation) {
  if (allow_rotation && sample.height() != sample.width()) {
    throw InvalidInput("augment: rotations require a square sample");
  }
  return apply_transform(sample, draw_transform(seed, allow_rotation));
}

}  // namespace evhdr
