#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "evhdr/event_repr.hpp"
#include "evhdr/event_sim.hpp"
#include "evhdr/ldr_sim.hpp"

namespace evhdr {

struct VoxelSettings {
  int bins = 5;
  int stride = 1;
  bool normalize = true;
};

/// One training unit: three bracketed LDRs (index 1 is the reference), their
/// linearized versions, the partitioned event stream and the ground truth
/// aligned to the reference. The voxel fields are derived from `events`.
struct BracketSample {
  std::string scene_id;
  std::array<LDRImage, 3> ldr;
  std::array<LinearImage, 3> linear;
  PartitionedEvents events;
  Image gt;
  std::array<double, 4> timestamps{};
  double hdr_scale = 1.0;  // factor applied to the source radiance

  std::array<VoxelGrid, 3> keyframe_voxels;
  WindowSet windows;

  int height() const { return gt.height; }
  int width() const { return gt.width; }
  bool has_voxels() const { return keyframe_voxels[0].bins > 0; }
};

/// Voxelizes each partition (B bins over its own interval) and builds the
/// sliding-window set; normalizes every grid when requested.
void attach_voxels(BracketSample& sample, const VoxelSettings& settings);

struct CropWindow {
  int y0 = 0;
  int x0 = 0;
  int size = 0;
};

CropWindow draw_crop(int height, int width, int crop, std::uint64_t seed);

/// Applies the same window to images, voxel grids and ground truth. Raw
/// events are filtered and shifted alongside; the grids are cropped, not
/// recomputed.
BracketSample crop_sample(const BracketSample& sample, const CropWindow& win);
BracketSample sample_crop(const BracketSample& sample, int crop,
                          std::uint64_t seed);

/// Horizontal flip, then vertical flip, then `rot90` counter-clockwise
/// quarter turns.
struct GeometricTransform {
  bool flip_h = false;
  bool flip_v = false;
  int rot90 = 0;

  bool identity() const { return !flip_h && !flip_v && rot90 % 4 == 0; }
};

GeometricTransform draw_transform(std::uint64_t seed, bool allow_rotation);

Image transform_image(const Image& img, const GeometricTransform& t);
VoxelGrid transform_voxels(const VoxelGrid& grid, const GeometricTransform& t);
EventStream transform_events(const EventStream& events,
                             const GeometricTransform& t);
BracketSample apply_transform(const BracketSample& sample,
                              const GeometricTransform& t);

/// Random flips and 90 degree rotations. Rotations require square samples.
BracketSample augment(const BracketSample& sample, std::uint64_t seed,
                      bool allow_rotation = true);

}  // namespace evhdr
