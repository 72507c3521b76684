#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evhdr/event_sim.hpp"
#include "evhdr/image.hpp"
#include "evhdr/metrics.hpp"

namespace evhdr::io {

namespace fs = std::filesystem;

// EVT1 layout (little-endian): "EVT1", u32 version, u32 width, u32 height,
// u64 count, f64 t_start, f64 t_end, then count x {u16 x, u16 y, f64 t, i8 p}.
inline constexpr std::uint32_t kEventVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 40;
inline constexpr std::size_t kEventRecordBytes = 13;

std::vector<std::uint8_t> encode_events(const EventStream& stream);
EventStream decode_events(const std::vector<std::uint8_t>& bytes);
void write_events(const fs::path& path, const EventStream& stream);
EventStream read_events(const fs::path& path);

/// Writes a little-endian PFM ("PF" for 3 channels, "Pf" for 1).
void write_pfm(const fs::path& path, const Image& img);
/// Reads either endianness; rows are returned top-down.
Image read_pfm(const fs::path& path);

/// 8-bit PNG, values clamped to [0,1] and rounded to k/255.
void write_png(const fs::path& path, const Image& img);
Image read_png(const fs::path& path);

struct ManifestSample {
  std::string scene_id;
  std::array<std::string, 3> ldr;
  std::string gt;
  std::string events;
  std::array<double, 4> timestamps{};  // t0..t3, absolute seconds
  std::array<double, 3> exposure_times{};
  double hdr_scale = 1.0;
};

struct DatasetManifest {
  std::vector<ManifestSample> samples;
  double gain = 1.0;
  double gamma = 2.2;
  int width = 0;
  int height = 0;

  /// Paths are stored relative to the manifest directory.
  void save(const fs::path& path) const;
  static DatasetManifest load(const fs::path& path);
  /// Throws CorruptFile if a referenced file is missing or timestamps are
  /// not ascending.
  void validate(const fs::path& root) const;
};

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace evhdr::io
