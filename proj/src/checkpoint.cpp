#include "evhdr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace evhdr::net {

namespace {

using nlohmann::json;
constexpr std::uint32_t kVersion = 1;

json to_json(const NetworkConfig& c) {
  return {{"channels", c.channels},         {"image_channels", c.image_channels},
          {"bins", c.bins},                 {"offset_groups", c.offset_groups},
          {"windows", c.windows},           {"leaky_slope", c.leaky_slope}};
}

NetworkConfig network_from(const json& j) {
  NetworkConfig c;
  c.channels = j.at("channels").get<int>();
  c.image_channels = j.at("image_channels").get<int>();
  c.bins = j.at("bins").get<int>();
  c.offset_groups = j.at("offset_groups").get<int>();
  c.windows = j.at("windows").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  return c;
}

struct Archive {
  json manifest;
  std::vector<char> payload;
};

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptFile("checkpoint: cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, "EVHC", 4) != 0) throw CorruptFile("checkpoint: bad magic");
  if (version != kVersion) throw CorruptFile("checkpoint: unsupported version");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw CorruptFile("checkpoint: truncated manifest");
  Archive a;
  try {
    a.manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptFile(std::string("checkpoint: bad manifest: ") + e.what());
  }
  a.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return a;
}

CheckpointInfo info_from(const json& m) {
  CheckpointInfo info;
  try {
    info.network = network_from(m.at("network"));
    const auto& a = m.at("ablation");
    info.ablation = {a.at("use_event_alignment").get<bool>(),
                     a.at("use_event_subsampling").get<bool>(),
                     a.at("use_distillation").get<bool>()};
    info.step = m.at("step").get<int64_t>();
  } catch (const json::exception& e) {
    throw CorruptFile(std::string("checkpoint: bad manifest: ") + e.what());
  }
  return info;
}

}  // namespace

std::string network_config_json(const NetworkConfig& cfg) { return to_json(cfg).dump(); }

NetworkConfig network_config_from_json(const std::string& text) {
  return network_from(json::parse(text));
}

void save_checkpoint(const std::filesystem::path& path, HdrNet& model, int64_t step) {
  json m;
  m["format"] = "evhdr-checkpoint";
  m["step"] = step;
  m["network"] = to_json(model->config());
  const auto& ab = model->ablation();
  m["ablation"] = {{"use_event_alignment", ab.use_event_alignment},
                   {"use_event_subsampling", ab.use_event_subsampling},
                   {"use_distillation", ab.use_distillation}};
  m["tensors"] = json::array();
  std::vector<char> payload;
  for (const auto& item : model->named_parameters(true)) {
    const auto t = item.value().detach().to(torch::kFloat32).contiguous();
    const auto bytes = static_cast<std::size_t>(t.numel()) * sizeof(float);
    m["tensors"].push_back({{"name", item.key()},
                            {"shape", t.sizes().vec()},
                            {"offset", payload.size()},
                            {"count", t.numel()}});
    const auto* src = reinterpret_cast<const char*>(t.data_ptr<float>());
    payload.insert(payload.end(), src, src + bytes);
  }
  const std::string text = m.dump();
  const std::uint64_t len = text.size();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
    out.write("EVHC", 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(len));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed");
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  return info_from(read_archive(path).manifest);
}

HdrNet load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info_out) {
  const Archive a = read_archive(path);
  const CheckpointInfo info = info_from(a.manifest);
  HdrNet model(info.network, info.ablation);
  auto params = model->named_parameters(true);
  const auto& tensors = a.manifest.at("tensors");
  if (tensors.size() != params.size()) {
    throw CorruptFile("checkpoint: tensor count does not match the recorded model");
  }
  torch::NoGradGuard guard;
  for (const auto& t : tensors) {
    const auto name = t.at("name").get<std::string>();
    auto* p = params.find(name);
    if (p == nullptr) throw CorruptFile("checkpoint: unknown tensor " + name);
    const auto shape = t.at("shape").get<std::vector<int64_t>>();
    if (p->sizes().vec() != shape) throw CorruptFile("checkpoint: shape mismatch for " + name);
    const auto offset = t.at("offset").get<std::size_t>();
    const auto count = t.at("count").get<std::size_t>();
    if (count != static_cast<std::size_t>(p->numel()) ||
        offset + count * sizeof(float) > a.payload.size()) {
      throw CorruptFile("checkpoint: truncated payload for " + name);
    }
    std::vector<float> values(count);
    std::memcpy(values.data(), a.payload.data() + offset, count * sizeof(float));
    p->copy_(torch::from_blob(values.data(), p->sizes(), torch::kFloat32));
  }
  if (info_out) *info_out = info;
  return model;
}

}  // namespace evhdr::net
