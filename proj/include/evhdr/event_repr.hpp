#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "evhdr/event_sim.hpp"

namespace evhdr {

/// B x H x W event tensor, bin-major.
struct VoxelGrid {
  int bins = 0;
  int height = 0;
  int width = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<float> values;

  VoxelGrid() = default;
  VoxelGrid(int b, int h, int w, double t0 = 0.0, double t1 = 0.0)
      : bins(b), height(h), width(w), t_start(t0), t_end(t1),
        values(static_cast<std::size_t>(b) * h * w, 0.0f) {}

  std::size_t index(int b, int y, int x) const {
    return (static_cast<std::size_t>(b) * height + y) * width + x;
  }
  float& at(int b, int y, int x) { return values[index(b, y, x)]; }
  float at(int b, int y, int x) const { return values[index(b, y, x)]; }
  double sum() const;
};

struct PartitionedEvents {
  std::array<EventStream, 3> parts;
  std::array<double, 4> bounds{};  // t0..t3

  const EventStream& reference() const { return parts[1]; }
};

struct WindowSet {
  std::vector<VoxelGrid> windows;
  std::vector<int> keyframe_indices;  // windows starting at bin 0, B, 2B

  std::vector<int> intermediate_indices() const;
};

/// Splits by [t0,t1), [t1,t2), [t2,t3]; an event at t_k goes to the later part.
PartitionedEvents partition_stream(const EventStream& stream, double t0,
                                   double t1, double t2, double t3);

/// Temporal bilinear voxelization: t* = (B-1)(t - t_start)/(t_end - t_start)
/// and the polarity is split between floor(t*) and floor(t*) + 1.
VoxelGrid voxelize(const EventStream& events, int bins, double t_start,
                   double t_end, int width, int height);

/// Bilinear weights (lower bin, weight on lower bin, weight on upper bin) for
/// one normalized timestamp.
struct BinSplit {
  int lower;
  double w_lower;
  double w_upper;
};
BinSplit split_timestamp(double t_norm);

/// Zero-mean, unit-variance over nonzero entries; zeros stay zero.
VoxelGrid normalize_voxels(const VoxelGrid& grid);

/// Re-voxelizes the union of the partitions over [t0,t3] into 3B uniform bins
/// and slides a B-bin window with the given stride.
WindowSet sliding_windows(const PartitionedEvents& partitions, int bins,
                          int stride);

/// Copies the spatial window [y0, y0+h) x [x0, x0+w) of every bin.
VoxelGrid crop_voxels(const VoxelGrid& grid, int y0, int x0, int h, int w);

}  // namespace evhdr
