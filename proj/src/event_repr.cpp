#include "evhdr/event_repr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evhdr {

double VoxelGrid::sum() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

std::vector<int> WindowSet::intermediate_indices() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(windows.size()); ++i) {
    if (std::find(keyframe_indices.begin(), keyframe_indices.end(), i) ==
        keyframe_indices.end()) {
      out.push_back(i);
    }
  }
  return out;
}

PartitionedEvents partition_stream(const EventStream& stream, double t0,
                                   double t1, double t2, double t3) {
  if (!(t0 < t1 && t1 < t2 && t2 < t3)) {
    throw InvalidInput("partition_stream: bounds must satisfy t0 < t1 < t2 < t3");
  }
  PartitionedEvents out;
  out.bounds = {t0, t1, t2, t3};
  for (int i = 0; i < 3; ++i) {
    out.parts[i].width = stream.width;
    out.parts[i].height = stream.height;
    out.parts[i].t_start = out.bounds[i];
    out.parts[i].t_end = out.bounds[i + 1];
  }
  for (const auto& e : stream.records) {
    if (e.t < t0 || e.t > t3) {
      throw InvalidInput("partition_stream: event outside [t0, t3]");
    }
  }
  for (const auto& e : stream.records) {
    const int part = e.t >= t2 ? 2 : (e.t >= t1 ? 1 : 0);
    out.parts[part].records.push_back(e);
  }
  return out;
}

BinSplit split_timestamp(double t_norm) {
  const double lower = std::floor(t_norm);
  const double frac = t_norm - lower;
  return {static_cast<int>(lower), 1.0 - frac, frac};
}

VoxelGrid voxelize(const EventStream& events, int bins, double t_start,
                   double t_end, int width, int height) {
  if (bins < 1) throw InvalidInput("voxelize: bins must be >= 1");
  if (!(t_end > t_start)) throw InvalidInput("voxelize: t_end must exceed t_start");
  if (width <= 0 || height <= 0) throw InvalidInput("voxelize: empty sensor");
  VoxelGrid grid(bins, height, width, t_start, t_end);
  const double scale = static_cast<double>(bins - 1) / (t_end - t_start);
  for (const auto& e : events.records) {
    if (e.t < t_start || e.t > t_end) {
      throw InvalidInput("voxelize: event outside [t_start, t_end]");
    }
    if (e.x >= width || e.y >= height) {
      throw InvalidInput("voxelize: event outside sensor");
    }
  }
  std::vector<double> acc(grid.values.size(), 0.0);
  for (const auto& e : events.records) {
    const double t_norm = std::clamp(scale * (e.t - t_start), 0.0,
                                     static_cast<double>(bins - 1));
    const BinSplit s = split_timestamp(t_norm);
    acc[grid.index(s.lower, e.y, e.x)] += e.p * s.w_lower;
    if (s.w_upper > 0.0 && s.lower + 1 < bins) {
      acc[grid.index(s.lower + 1, e.y, e.x)] += e.p * s.w_upper;
    }
  }
  std::transform(acc.begin(), acc.end(), grid.values.begin(),
                 [](double v) { return static_cast<float>(v); });
  return grid;
}

VoxelGrid normalize_voxels(const VoxelGrid& grid) {
  VoxelGrid out = grid;
  double sum = 0.0;
  std::size_t count = 0;
  for (float v : grid.values) {
    if (v != 0.0f) {
      sum += v;
      ++count;
    }
  }
  if (count == 0) return out;
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (float v : grid.values) {
    if (v != 0.0f) var += (v - mean) * (v - mean);
  }
  var /= static_cast<double>(count);
  const double stddev = std::sqrt(var);
  for (float& v : out.values) {
    if (v == 0.0f) continue;
    double z = v - mean;
    if (stddev > 0.0) z /= stddev;
    v = static_cast<float>(z);
  }
  return out;
}

WindowSet sliding_windows(const PartitionedEvents& partitions, int bins,
                          int stride) {
  if (bins < 1) throw InvalidInput("sliding_windows: bins must be >= 1");
  if (stride < 1) throw InvalidInput("sliding_windows: stride must be >= 1");
  const auto& b = partitions.bounds;
  EventStream merged;
  merged.width = partitions.parts[0].width;
  merged.height = partitions.parts[0].height;
  merged.t_start = b[0];
  merged.t_end = b[3];
  for (const auto& part : partitions.parts) {
    merged.records.insert(merged.records.end(), part.records.begin(),
                          part.records.end());
  }
  const int total = 3 * bins;
  const VoxelGrid timeline =
      voxelize(merged, total, b[0], b[3], merged.width, merged.height);
  const double bin_dt = total > 1 ? (b[3] - b[0]) / (total - 1) : 0.0;
  const std::size_t plane = static_cast<std::size_t>(merged.width) * merged.height;

  WindowSet out;
  for (int start = 0; start + bins <= total; start += stride) {
    VoxelGrid w(bins, merged.height, merged.width, b[0] + start * bin_dt,
                b[0] + (start + bins - 1) * bin_dt);
    std::copy_n(timeline.values.begin() + static_cast<std::ptrdiff_t>(start * plane),
                bins * plane, w.values.begin());
    if (start % bins == 0) {
      out.keyframe_indices.push_back(static_cast<int>(out.windows.size()));
    }
    out.windows.push_back(std::move(w));
  }
  return out;
}

VoxelGrid crop_voxels(const VoxelGrid& grid, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > grid.height ||
      x0 + w > grid.width) {
    throw InvalidInput("crop_voxels: window outside grid");
  }
  VoxelGrid out(grid.bins, h, w, grid.t_start, grid.t_end);
  for (int b = 0; b < grid.bins; ++b) {
    for (int y = 0; y < h; ++y) {
      std::copy_n(grid.values.begin() + static_cast<std::ptrdiff_t>(grid.index(b, y0 + y, x0)), w,
                  out.values.begin() + static_cast<std::ptrdiff_t>(out.index(b, y, 0)));
    }
  }
  return out;
}

}  // namespace evhdr
