#include "evhdr/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace evhdr::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& buf, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw CorruptFile("EVT1: truncated payload");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptFile("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_events(const EventStream& stream) {
  stream.validate();
  std::vector<std::uint8_t> buf;
  buf.reserve(kEventHeaderBytes + kEventRecordBytes * stream.records.size());
  buf.insert(buf.end(), {'E', 'V', 'T', '1'});
  put<std::uint32_t>(buf, kEventVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(stream.width));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(stream.height));
  put<std::uint64_t>(buf, stream.records.size());
  put<double>(buf, stream.t_start);
  put<double>(buf, stream.t_end);
  for (const auto& e : stream.records) {
    put<std::uint16_t>(buf, e.x);
    put<std::uint16_t>(buf, e.y);
    put<double>(buf, e.t);
    put<std::int8_t>(buf, e.p);
  }
  return buf;
}

EventStream decode_events(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kEventHeaderBytes) throw CorruptFile("EVT1: truncated header");
  if (std::memcmp(bytes.data(), "EVT1", 4) != 0) throw CorruptFile("EVT1: bad magic");
  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kEventVersion) throw CorruptFile("EVT1: unsupported version");
  EventStream s;
  s.width = static_cast<int>(get<std::uint32_t>(bytes, pos));
  s.height = static_cast<int>(get<std::uint32_t>(bytes, pos));
  const auto count = get<std::uint64_t>(bytes, pos);
  s.t_start = get<double>(bytes, pos);
  s.t_end = get<double>(bytes, pos);
  if ((bytes.size() - kEventHeaderBytes) != count * kEventRecordBytes) {
    throw CorruptFile("EVT1: payload length does not match record count");
  }
  s.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    EventRecord e;
    e.x = get<std::uint16_t>(bytes, pos);
    e.y = get<std::uint16_t>(bytes, pos);
    e.t = get<double>(bytes, pos);
    e.p = get<std::int8_t>(bytes, pos);
    if (e.p != 1 && e.p != -1) throw CorruptFile("EVT1: polarity not in {+1, -1}");
    s.records.push_back(e);
  }
  try {
    s.validate();
  } catch (const InvalidInput& err) {
    throw CorruptFile(std::string("EVT1: ") + err.what());
  }
  return s;
}

void write_events(const fs::path& path, const EventStream& stream) {
  const auto buf = encode_events(stream);
  write_bytes(path, buf.data(), buf.size());
}

EventStream read_events(const fs::path& path) { return decode_events(read_bytes(path)); }

void write_pfm(const fs::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw InvalidInput("write_pfm: image must have 1 or 3 channels");
  }
  for (float v : img.data) {
    if (!std::isfinite(v)) throw InvalidInput("write_pfm: non-finite pixel");
  }
  std::ostringstream head;
  head << (img.channels == 3 ? "PF" : "Pf") << "\n"
       << img.width << " " << img.height << "\n-1.0\n";
  std::string out = head.str();
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  const std::size_t header_len = out.size();
  out.resize(header_len + img.data.size() * sizeof(float));
  for (int y = 0; y < img.height; ++y) {
    const int src_row = img.height - 1 - y;
    std::memcpy(out.data() + header_len + y * row * sizeof(float),
                img.data.data() + src_row * row, row * sizeof(float));
  }
  write_bytes(path, out.data(), out.size());
}

Image read_pfm(const fs::path& path) {
  const auto bytes = read_bytes(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    if (t.empty()) throw CorruptFile("PFM: malformed header");
    return t;
  };
  const std::string magic = token();
  int channels = 0;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else throw CorruptFile("PFM: bad magic");
  int w = 0;
  int h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::logic_error&) {
    throw CorruptFile("PFM: malformed header");
  }
  if (w <= 0 || h <= 0 || scale == 0.0) throw CorruptFile("PFM: malformed header");
  ++pos;  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() < pos + n * sizeof(float)) throw CorruptFile("PFM: truncated raster");
  Image img(h, w, channels);
  const std::size_t row = static_cast<std::size_t>(w) * channels;
  for (int y = 0; y < h; ++y) {
    std::memcpy(img.data.data() + (h - 1 - y) * row, bytes.data() + pos + y * row * sizeof(float),
                row * sizeof(float));
  }
  if (scale > 0.0) {
    for (float& v : img.data) {
      v = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(v)));
    }
  }
  return img;
}

void write_png(const fs::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw InvalidInput("write_png: image must have 1 or 3 channels");
  }
  std::vector<std::uint8_t> px(img.data.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const float v = std::isfinite(img.data[i]) ? std::clamp(img.data[i], 0.0f, 1.0f) : 0.0f;
    px[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, px.data(), 0, nullptr)) {
    throw std::runtime_error("write_png: " + std::string(image.message));
  }
}

Image read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw CorruptFile("read_png: " + std::string(image.message));
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    throw CorruptFile("read_png: " + std::string(image.message));
  }
  Image img(static_cast<int>(image.height), static_cast<int>(image.width), 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = px[i] / 255.0f;
  return img;
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, text.data(), text.size());
}

std::string read_text(const fs::path& path) {
  const auto b = read_bytes(path);
  return {b.begin(), b.end()};
}

void DatasetManifest::save(const fs::path& path) const {
  nlohmann::json j;
  j["format"] = "evhdr-dataset";
  j["version"] = 1;
  j["gain"] = gain;
  j["gamma"] = gamma;
  j["width"] = width;
  j["height"] = height;
  j["samples"] = nlohmann::json::array();
  for (const auto& s : samples) {
    j["samples"].push_back({{"scene_id", s.scene_id},
                            {"ldr", s.ldr},
                            {"gt", s.gt},
                            {"events", s.events},
                            {"timestamps", s.timestamps},
                            {"exposure_times", s.exposure_times},
                            {"hdr_scale", s.hdr_scale}});
  }
  write_text(path, j.dump(2));
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    m.gain = j.value("gain", 1.0);
    m.gamma = j.value("gamma", 2.2);
    m.width = j.value("width", 0);
    m.height = j.value("height", 0);
    for (const auto& s : j.at("samples")) {
      ManifestSample ms;
      ms.scene_id = s.at("scene_id").get<std::string>();
      ms.ldr = s.at("ldr").get<std::array<std::string, 3>>();
      ms.gt = s.at("gt").get<std::string>();
      ms.events = s.at("events").get<std::string>();
      ms.timestamps = s.at("timestamps").get<std::array<double, 4>>();
      ms.exposure_times = s.at("exposure_times").get<std::array<double, 3>>();
      ms.hdr_scale = s.value("hdr_scale", 1.0);
      m.samples.push_back(std::move(ms));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFile("manifest " + path.string() + ": " + e.what());
  }
  m.validate(path.parent_path());
  return m;
}

void DatasetManifest::validate(const fs::path& root) const {
  for (const auto& s : samples) {
    for (const auto& rel : {s.ldr[0], s.ldr[1], s.ldr[2], s.gt, s.events}) {
      if (!fs::exists(root / rel)) throw CorruptFile("manifest: missing file " + rel);
    }
    for (int i = 0; i < 3; ++i) {
      if (!(s.timestamps[i] < s.timestamps[i + 1])) {
        throw CorruptFile("manifest: timestamps not ascending for " + s.scene_id);
      }
    }
  }
}

}  // namespace evhdr::io
