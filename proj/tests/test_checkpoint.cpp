#include <gtest/gtest.h>

#include <torch/torch.h>

#include <filesystem>
#include <fstream>

#include "evhdr/checkpoint.hpp"
#include "evhdr/errors.hpp"
#include "test_support.hpp"

using namespace evhdr;
using namespace evhdr::net;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("evhdr_test_ckpt_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  torch::manual_seed(0);
  auto dir = temp_dir("rt");
  for (const auto& ab : AblationConfig::table_rows()) {
    HdrNet net(test_support::tiny_network(), ab);
    save_checkpoint(dir / "m.ckpt", net, 123);
    CheckpointInfo info;
    HdrNet back = load_checkpoint(dir / "m.ckpt", &info);
    EXPECT_EQ(info.step, 123);
    EXPECT_EQ(info.ablation, ab);
    EXPECT_EQ(info.network, test_support::tiny_network());
    auto a = net->named_parameters();
    auto b = back->named_parameters();
    ASSERT_EQ(a.size(), b.size());
    for (const auto& kv : a) {
      const auto* other = b.find(kv.key());
      ASSERT_NE(other, nullptr) << kv.key();
      EXPECT_TRUE(torch::equal(kv.value(), *other)) << kv.key();
    }
  }
}

TEST(Checkpoint, ManifestNamesGroups) {
  auto dir = temp_dir("names");
  HdrNet net(test_support::tiny_network(), AblationConfig::full());
  save_checkpoint(dir / "m.ckpt", net, 1);
  std::ifstream in(dir / "m.ckpt", std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text.substr(0, 4), "EVHC");
  for (const char* g : kParameterGroups) EXPECT_NE(text.find(std::string("\"") + g), std::string::npos) << g;
}

TEST(Checkpoint, CorruptArchivesAreRejected) {
  auto dir = temp_dir("bad");
  HdrNet net(test_support::tiny_network(), AblationConfig::images_only());
  save_checkpoint(dir / "m.ckpt", net, 1);
  std::ifstream in(dir / "m.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir / "magic.ckpt", std::ios::binary) << bad;
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), CorruptFile);

  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), CorruptFile);

  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CorruptFile);
}

TEST(Checkpoint, NoTemporaryLeftBehind) {
  auto dir = temp_dir("tmp");
  HdrNet net(test_support::tiny_network(), AblationConfig::images_only());
  save_checkpoint(dir / "m.ckpt", net, 1);
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1);
}

TEST(Checkpoint, NetworkConfigJsonRoundTrip) {
  NetworkConfig cfg = test_support::tiny_network(16);
  cfg.windows = 7;
  cfg.leaky_slope = 0.2;
  EXPECT_EQ(network_config_from_json(network_config_json(cfg)), cfg);
}
