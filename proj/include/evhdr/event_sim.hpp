#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evhdr/image.hpp"

namespace evhdr {

/// Linear-radiance RGB frames with strictly increasing timestamps (seconds).
struct HDRFrameSequence {
  std::vector<Image> frames;
  std::vector<double> timestamps;

  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }

  /// Throws InvalidInput unless shapes agree, pixels are >= 0 and
  /// timestamps strictly increase.
  void validate() const;
};

struct EventRecord {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  double t = 0.0;
  std::int8_t p = 1;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Orders events by (t, y, x).
bool event_before(const EventRecord& a, const EventRecord& b);

struct EventStream {
  std::vector<EventRecord> records;
  double t_start = 0.0;
  double t_end = 0.0;
  int width = 0;
  int height = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  /// Throws InvalidInput on unsorted records, out-of-range coordinates,
  /// timestamps outside [t_start, t_end] or polarity not in {+1, -1}.
  void validate() const;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

struct SimulatorConfig {
  double contrast_threshold = 0.5;
  int upsample_factor = 10;
  double log_eps = 1e-4;

  void validate() const;
};

/// BT.709 luminance of a linear RGB pixel.
inline double luminance(double r, double g, double b) {
  return 0.2126 * r + 0.7152 * g + 0.0722 * b;
}

/// Inserts factor-1 frames between each consecutive pair, interpolating every
/// channel linearly in log(v + log_eps). Original frames are copied verbatim.
HDRFrameSequence interpolate_frames(const HDRFrameSequence& seq, int factor,
                                    double log_eps = 1e-4);

/// Threshold-crossing events for one pixel whose log luminance is piecewise
/// linear through (times[k], log_levels[k]). Appends to `out` in time order.
void simulate_pixel(std::span<const double> times,
                    std::span<const double> log_levels, double contrast,
                    std::uint16_t x, std::uint16_t y,
                    std::vector<EventRecord>& out);

/// ESIM-style event generation over the whole sequence. The reference log
/// level of each pixel starts at frame 0 and moves by +-C per emitted event.
EventStream simulate_events(const HDRFrameSequence& seq,
                            const SimulatorConfig& cfg);

/// Records with t in [t_begin, t_end], re-labelled with that interval.
EventStream slice_events(const EventStream& stream, double t_begin,
                         double t_end);

}  // namespace evhdr
