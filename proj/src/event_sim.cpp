#include "evhdr/event_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace evhdr {

namespace {

// Crossing tolerance in log units: a level reached to within this margin
// counts as crossed, so exact multiples of C emit their final event.
constexpr double kCrossTol = 1e-9;

}  // namespace

bool event_before(const EventRecord& a, const EventRecord& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

void HDRFrameSequence::validate() const {
  if (frames.size() != timestamps.size()) {
    throw InvalidInput("HDRFrameSequence: frame/timestamp count mismatch");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].same_shape(frames.front()) || frames[i].channels != 3) {
      throw InvalidInput("HDRFrameSequence: frames must share an HxWx3 shape");
    }
    for (float v : frames[i].data) {
      if (!(v >= 0.0f) || !std::isfinite(v)) {
        throw InvalidInput("HDRFrameSequence: pixel values must be finite and >= 0");
      }
    }
    if (i > 0 && !(timestamps[i] > timestamps[i - 1])) {
      throw InvalidInput("HDRFrameSequence: timestamps must strictly increase");
    }
  }
}

void EventStream::validate() const {
  if (t_end < t_start) throw InvalidInput("EventStream: t_end < t_start");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& e = records[i];
    if (e.x >= width || e.y >= height) {
      throw InvalidInput("EventStream: coordinate outside sensor");
    }
    if (e.p != 1 && e.p != -1) throw InvalidInput("EventStream: bad polarity");
    if (e.t < t_start || e.t > t_end) {
      throw InvalidInput("EventStream: timestamp outside [t_start, t_end]");
    }
    if (i > 0 && event_before(e, records[i - 1])) {
      throw InvalidInput("EventStream: records not sorted by (t, y, x)");
    }
  }
}

void SimulatorConfig::validate() const {
  if (!(contrast_threshold > 0.0)) throw InvalidInput("contrast threshold must be > 0");
  if (upsample_factor < 1) throw InvalidInput("upsample factor must be >= 1");
  if (!(log_eps > 0.0)) throw InvalidInput("log_eps must be > 0");
}

HDRFrameSequence interpolate_frames(const HDRFrameSequence& seq, int factor,
                                    double log_eps) {
  if (seq.frames.size() < 2) {
    throw InvalidInput("interpolate_frames: need at least 2 frames");
  }
  if (factor < 1) throw InvalidInput("interpolate_frames: factor must be >= 1");
  seq.validate();
  if (factor == 1) return seq;

  HDRFrameSequence out;
  const std::size_t n = seq.frames.size();
  out.frames.reserve((n - 1) * factor + 1);
  out.timestamps.reserve((n - 1) * factor + 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Image& a = seq.frames[k];
    const Image& b = seq.frames[k + 1];
    const double ta = seq.timestamps[k];
    const double tb = seq.timestamps[k + 1];
    out.frames.push_back(a);
    out.timestamps.push_back(ta);
    for (int j = 1; j < factor; ++j) {
      const double w = static_cast<double>(j) / factor;
      Image mid(a.height, a.width, a.channels);
      for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double la = std::log(a.data[i] + log_eps);
        const double lb = std::log(b.data[i] + log_eps);
        const double v = std::exp((1.0 - w) * la + w * lb) - log_eps;
        mid.data[i] = static_cast<float>(std::max(v, 0.0));
      }
      out.frames.push_back(std::move(mid));
      out.timestamps.push_back(ta + w * (tb - ta));
    }
  }
  out.frames.push_back(seq.frames.back());
  out.timestamps.push_back(seq.timestamps.back());
  return out;
}

void simulate_pixel(std::span<const double> times,
                    std::span<const double> log_levels, double contrast,
                    std::uint16_t x, std::uint16_t y,
                    std::vector<EventRecord>& out) {
  if (times.size() != log_levels.size()) {
    throw InvalidInput("simulate_pixel: times/levels size mismatch");
  }
  if (times.size() < 2) return;
  double ref = log_levels[0];
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double la = log_levels[k];
    const double lb = log_levels[k + 1];
    const double ta = times[k];
    const double tb = times[k + 1];
    if (lb == la) continue;
    const double slope_t = (tb - ta) / (lb - la);
    if (lb > la) {
      while (lb - (ref + contrast) >= -kCrossTol) {
        ref += contrast;
        const double t = std::clamp(ta + (ref - la) * slope_t, ta, tb);
        out.push_back({x, y, t, 1});
      }
    } else {
      while ((ref - contrast) - lb >= -kCrossTol) {
        ref -= contrast;
        const double t = std::clamp(ta + (ref - la) * slope_t, ta, tb);
        out.push_back({x, y, t, -1});
      }
    }
  }
}

EventStream simulate_events(const HDRFrameSequence& seq,
                            const SimulatorConfig& cfg) {
  cfg.validate();
  if (seq.frames.size() < 2) {
    throw InvalidInput("simulate_events: need at least 2 frames");
  }
  seq.validate();
  const int w = seq.width();
  const int h = seq.height();
  if (w > std::numeric_limits<std::uint16_t>::max() + 1 ||
      h > std::numeric_limits<std::uint16_t>::max() + 1) {
    throw InvalidInput("simulate_events: sensor too large for u16 coordinates");
  }
  const std::size_t n = seq.frames.size();

  EventStream stream;
  stream.width = w;
  stream.height = h;
  stream.t_start = seq.timestamps.front();
  stream.t_end = seq.timestamps.back();

  std::vector<double> levels(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < n; ++k) {
        const Image& f = seq.frames[k];
        const double lum = luminance(f.at(y, x, 0), f.at(y, x, 1), f.at(y, x, 2));
        levels[k] = std::log(lum + cfg.log_eps);
      }
      simulate_pixel(seq.timestamps, levels, cfg.contrast_threshold,
                     static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                     stream.records);
    }
  }
  std::stable_sort(stream.records.begin(), stream.records.end(), event_before);
  return stream;
}

EventStream slice_events(const EventStream& stream, double t_begin,
                         double t_end) {
  if (t_end < t_begin) throw InvalidInput("slice_events: t_end < t_begin");
  EventStream out;
  out.width = stream.width;
  out.height = stream.height;
  out.t_start = t_begin;
  out.t_end = t_end;
  auto lo = std::lower_bound(stream.records.begin(), stream.records.end(), t_begin,
                             [](const EventRecord& e, double t) { return e.t < t; });
  auto hi = std::upper_bound(lo, stream.records.end(), t_end,
                             [](double t, const EventRecord& e) { return t < e.t; });
  out.records.assign(lo, hi);
  return out;
}

}  // namespace evhdr
