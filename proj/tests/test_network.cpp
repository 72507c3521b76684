#include <gtest/gtest.h>

#include <torch/torch.h>

#include "evhdr/errors.hpp"
#include "evhdr/network.hpp"
#include "test_support.hpp"

using namespace evhdr;
using namespace evhdr::net;
namespace F = torch::nn::functional;

TEST(Encoder, PyramidShapes) {
  torch::manual_seed(0);
  PyramidEncoder ev(5, 64, 0.1);
  auto p = ev(torch::randn({1, 5, 64, 64}));
  EXPECT_EQ(p[0].sizes(), (std::vector<int64_t>{1, 64, 64, 64}));
  EXPECT_EQ(p[1].sizes(), (std::vector<int64_t>{1, 64, 32, 32}));
  EXPECT_EQ(p[2].sizes(), (std::vector<int64_t>{1, 64, 16, 16}));

  torch::NoGradGuard guard;
  PyramidEncoder img(3, 64, 0.1);
  auto q = img(torch::rand({1, 3, 256, 256}));
  EXPECT_EQ(q[0].sizes(), (std::vector<int64_t>{1, 64, 256, 256}));
  EXPECT_EQ(q[1].sizes(), (std::vector<int64_t>{1, 64, 128, 128}));
  EXPECT_EQ(q[2].sizes(), (std::vector<int64_t>{1, 64, 64, 64}));
}

TEST(Encoder, RejectsBadInputs) {
  PyramidEncoder enc(5, 8, 0.1);
  EXPECT_THROW(enc(torch::randn({1, 5, 18, 16})), InvalidInput);
  EXPECT_THROW(enc(torch::randn({1, 3, 16, 16})), InvalidInput);
}

TEST(Encoder, ZeroParametersGiveZeroPyramid) {
  PyramidEncoder enc(3, 8, 0.1);
  {
    torch::NoGradGuard guard;
    for (auto& p : enc->parameters()) p.zero_();
  }
  auto p = enc(torch::rand({2, 3, 16, 16}));
  for (const auto& lvl : p) EXPECT_EQ(lvl.abs().max().item<float>(), 0.0f);
}

TEST(Attention, MapInOpenUnitIntervalAndShrinks) {
  torch::manual_seed(1);
  LdrAttention att(16, 0.1);
  for (int trial = 0; trial < 5; ++trial) {
    auto fi = torch::randn({2, 16, 12, 12}) * 3;
    auto fr = torch::randn({2, 16, 12, 12}) * 3;
    auto m = att->attention_map(fi, fr);
    EXPECT_GT(m.min().item<float>(), 0.0f);
    EXPECT_LT(m.max().item<float>(), 1.0f);
    auto out = att(fi, fr);
    EXPECT_TRUE((out.abs() <= fi.abs()).all().item<bool>());
  }
}

TEST(Attention, ZeroPreActivationHalves) {
  LdrAttention att(8, 0.1);
  {
    torch::NoGradGuard guard;
    att->conv_b->weight.zero_();
    att->conv_b->bias.zero_();
  }
  auto fi = torch::randn({1, 8, 6, 6});
  auto out = att(fi, torch::randn({1, 8, 6, 6}));
  EXPECT_TRUE(torch::allclose(out, 0.5 * fi, 0, 1e-7));
  EXPECT_THROW(att(fi, torch::randn({1, 8, 6, 5})), InvalidInput);
}

TEST(DeformConv, ZeroOffsetsMatchConvolution) {
  torch::manual_seed(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t c = 8, h = 5 + trial % 4, w = 6 + trial % 3;
    auto x = torch::randn({2, c, h, w});
    auto wt = torch::randn({6, c, 3, 3}) / std::sqrt(9.0 * c);
    auto b = torch::randn({6});
    auto off = torch::zeros({2, 2 * 4 * 9, h, w});
    auto got = deform_conv2d(x, off, wt, b, 4);
    auto ref = torch::conv2d(x, wt, b, 1, 1);
    EXPECT_LT((got - ref).abs().max().item<float>(), 1e-5f);
  }
}

TEST(DeformConv, IntegerOffsetIsShift) {
  // Every tap displaced by (dy, dx) = (+1, -1): output (y, x) is the standard
  // convolution centred at (y + 1, x - 1) of the zero-padded input.
  torch::manual_seed(3);
  const int64_t c = 4, h = 7, w = 6;
  auto x = torch::randn({1, c, h, w});
  auto wt = torch::randn({5, c, 3, 3}) / 6.0;
  auto b = torch::randn({5});
  auto off = torch::zeros({1, 2, 9, 2, h, w});
  off.select(3, 0).fill_(1.0);
  off.select(3, 1).fill_(-1.0);
  auto got = deform_conv2d(x, off.view({1, 36, h, w}), wt, b, 2);
  auto wide = torch::conv2d(x, wt, b, 1, 2);  // centre y sits at row y + 1
  auto ref = wide.slice(2, 2, 2 + h).slice(3, 0, w);
  EXPECT_LT((got - ref).abs().max().item<float>(), 1e-5f);
}

TEST(DeformConv, OutsideSamplesAreZero) {
  // 5x5 single-channel input, kernel selecting only the centre tap.
  auto x = torch::arange(1, 26, torch::kFloat).view({1, 1, 5, 5});
  auto wt = torch::zeros({1, 1, 3, 3});
  wt[0][0][1][1] = 1.0;
  auto off = torch::zeros({1, 18, 5, 5});
  // Centre tap (index 4): dy = +0.5, dx = -0.25 everywhere.
  off[0][8].fill_(0.5);
  off[0][9].fill_(-0.25);
  auto got = deform_conv2d(x, off, wt, torch::Tensor(), 1);
  auto sample = [&](double py, double px) {
    double acc = 0.0;
    const int y0 = static_cast<int>(std::floor(py));
    const int x0 = static_cast<int>(std::floor(px));
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const int yy = y0 + dy, xx = x0 + dx;
        const double wgt = (1.0 - std::abs(py - yy)) * (1.0 - std::abs(px - xx));
        if (yy >= 0 && yy < 5 && xx >= 0 && xx < 5) acc += wgt * (yy * 5 + xx + 1);
      }
    }
    return acc;
  };
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      EXPECT_NEAR(got[0][0][y][x].item<double>(), sample(y + 0.5, x - 0.25), 1e-5) << y << "," << x;
    }
  }
  // Bottom-left corner: half the weight falls below the image, a quarter left of it.
  EXPECT_NEAR(got[0][0][4][0].item<double>(), 0.5 * 0.75 * 21, 1e-5);
}

TEST(DeformConv, RejectsBadOffsets) {
  auto x = torch::randn({1, 8, 5, 5});
  auto wt = torch::randn({8, 8, 3, 3});
  EXPECT_THROW(deform_conv2d(x, torch::zeros({1, 17, 5, 5}), wt, torch::Tensor(), 1), InvalidInput);
  EXPECT_THROW(deform_conv2d(x, torch::zeros({1, 18, 5, 4}), wt, torch::Tensor(), 1), InvalidInput);
  EXPECT_THROW(deform_conv2d(x, torch::zeros({1, 54, 5, 5}), wt, torch::Tensor(), 3), InvalidInput);
}

TEST(Pcd, ShapesAndZeroInitialOffsets) {
  torch::manual_seed(4);
  PyramidEncoder enc(3, 16, 0.1);
  PcdAlign pcd(16, 4, 0.1);
  auto p = enc(torch::randn({2, 3, 16, 16}));
  auto q = enc(torch::randn({2, 3, 16, 16}));
  auto out = pcd(p, q);
  for (int l = 0; l < 3; ++l) {
    EXPECT_EQ(out[l].sizes(), p[l].sizes());
    EXPECT_EQ(pcd->last_offsets()[l].abs().max().item<float>(), 0.0f);
  }
}

TEST(Pcd, ZeroOffsetsReduceToConvolutionPathway) {
  torch::manual_seed(5);
  PcdAlign pcd(8, 2, 0.1);
  auto lvl = [](int64_t s) { return torch::randn({1, 8, s, s}); };
  Pyramid src{lvl(8), lvl(4), lvl(2)};
  auto a = pcd(src, src);
  auto b = pcd(src, Pyramid{lvl(8), lvl(4), lvl(2)});
  // With zero offsets the reference only enters through the offset branch,
  // so the aligned output does not depend on it.
  for (int l = 0; l < 3; ++l) EXPECT_TRUE(torch::allclose(a[l], b[l], 0, 1e-6));
}

TEST(Pcd, GradientReachesSourceAndReference) {
  torch::manual_seed(6);
  PcdAlign pcd(8, 2, 0.1);
  {
    torch::NoGradGuard guard;
    for (auto& kv : pcd->named_parameters()) {
      if (kv.key().find("offset_out") != std::string::npos) kv.value().normal_(0.0, 0.05);
    }
  }
  auto lvl = [](int64_t s) { return torch::randn({1, 8, s, s}, torch::requires_grad()); };
  Pyramid src{lvl(8), lvl(4), lvl(2)};
  Pyramid ref{lvl(8), lvl(4), lvl(2)};
  auto out = pcd(src, ref);
  (out[0].square().sum() + out[1].sum() + out[2].sum()).backward();
  for (int l = 0; l < 3; ++l) {
    EXPECT_GT(src[l].grad().abs().sum().item<float>(), 0.0f) << l;
    EXPECT_GT(ref[l].grad().abs().sum().item<float>(), 0.0f) << l;
  }
}

TEST(Fusion, NonnegativeOutputAndInputWidth) {
  torch::manual_seed(7);
  FusionNet fusion(17, 64, 3, 0.1);
  EXPECT_EQ(fusion->input_channels(), 64 * 17);
  torch::NoGradGuard guard;
  auto out = fusion(torch::randn({1, 64 * 17, 16, 16}), torch::randn({1, 64, 16, 16}));
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{1, 3, 16, 16}));
  EXPECT_GE(out.min().item<float>(), 0.0f);
  EXPECT_THROW(fusion(torch::randn({1, 64 * 17, 16, 16}), torch::randn({1, 64, 8, 16})), InvalidInput);
}

TEST(Ablation, Invariants) {
  EXPECT_NO_THROW(AblationConfig::images_only().validate());
  EXPECT_NO_THROW(AblationConfig::full().validate());
  EXPECT_THROW((AblationConfig{true, false, true}.validate()), InvalidInput);
  EXPECT_THROW((AblationConfig{false, true, false}.validate()), InvalidInput);
  const auto rows = AblationConfig::table_rows();
  EXPECT_EQ(rows[0].label(), "Images-only");
  EXPECT_EQ(rows[1].label(), "+ Event alignment");
  EXPECT_EQ(rows[2].label(), "+ Event sub-sampling");
  EXPECT_EQ(rows[3].label(), "+ Event-to-image distill.");
}

TEST(HdrNet, FusionWidthPerAblation) {
  NetworkConfig cfg;
  const int expected[4] = {6, 9, 17, 17};
  const auto rows = AblationConfig::table_rows();
  int64_t prev = 0;
  for (int i = 0; i < 4; ++i) {
    HdrNet net(cfg, rows[i]);
    EXPECT_EQ(net->fusion_branches(), expected[i]);
    EXPECT_EQ(net->fusion->input_channels(), 64 * expected[i]);
    EXPECT_GT(net->parameter_count(), prev);
    prev = net->parameter_count();
  }
}

TEST(HdrNet, ImagesOnlyIgnoresEvents) {
  torch::manual_seed(8);
  auto sample = test_support::tiny_sample(16);
  HdrNet net(test_support::tiny_network(), AblationConfig::images_only());
  torch::NoGradGuard guard;
  auto in = make_input(sample);
  auto a = net->forward(in).hdr;
  in.keyframe_events = torch::randn_like(in.keyframe_events);
  in.windows = torch::randn_like(in.windows);
  auto b = net->forward(in).hdr;
  EXPECT_TRUE(torch::equal(a, b));
  EXPECT_GE(a.min().item<float>(), 0.0f);
}

TEST(HdrNet, FullModelForwardBackwardIsFinite) {
  torch::manual_seed(9);
  auto sample = test_support::tiny_sample(64);
  HdrNet net(NetworkConfig{}, AblationConfig::full());
  auto r = net->forward(make_input(sample));
  EXPECT_EQ(r.hdr.sizes(), (std::vector<int64_t>{1, 3, 64, 64}));
  EXPECT_EQ(r.distill_event.size(), 3u);
  EXPECT_EQ(r.branches.size(), 17u);
  (r.hdr.mean() + r.distill_event[0][0].square().mean()).backward();
  for (const auto& p : net->parameters()) {
    ASSERT_TRUE(p.grad().defined());
    EXPECT_TRUE(torch::isfinite(p.grad()).all().item<bool>());
  }
}

TEST(HdrNet, FreshModelHasNoDeadOutputChannel) {
  auto sample = test_support::tiny_sample(32);
  for (int seed = 1; seed <= 6; ++seed) {
    torch::manual_seed(seed);
    HdrNet net(NetworkConfig{}, AblationConfig::full());
    torch::NoGradGuard guard;
    auto hdr = net->forward(make_input(sample)).hdr;
    for (int c = 0; c < 3; ++c) {
      EXPECT_GT((hdr.select(1, c) > 0).to(torch::kFloat).mean().item<double>(), 0.99)
          << "seed " << seed << " channel " << c;
    }
  }
}

TEST(HdrNet, DistillationGroupOnlyWhenEnabled) {
  for (const auto& ab : AblationConfig::table_rows()) {
    HdrNet net(test_support::tiny_network(), ab);
    const auto groups = net->parameter_groups();
    EXPECT_EQ(groups.at("distill_E").empty(), !ab.use_distillation) << ab.label();
    EXPECT_EQ(groups.at("encoder_E").empty(), !ab.use_event_alignment) << ab.label();
    EXPECT_FALSE(groups.at("fusion").empty());
    std::size_t total = 0;
    for (const auto& [name, params] : groups) total += params.size();
    EXPECT_EQ(total, net->parameters().size());
  }
}

TEST(HdrNet, DistillBranchIsUnusedWithoutDistillation) {
  torch::manual_seed(10);
  auto sample = test_support::tiny_sample(16);
  HdrNet net(test_support::tiny_network(), AblationConfig::event_subsampling());
  auto r = net->forward(make_input(sample));
  EXPECT_TRUE(r.distill_event.empty());
  r.hdr.sum().backward();
  const auto groups = net->parameter_groups();
  for (const auto& p : groups.at("pcd_E")) {
    ASSERT_TRUE(p.grad().defined());
  }
}

TEST(HdrNet, RejectsMismatchedInputs) {
  auto sample = test_support::tiny_sample(16);
  HdrNet net(test_support::tiny_network(), AblationConfig::full());
  auto in = make_input(sample);
  in.windows = in.windows.slice(1, 0, 9);
  EXPECT_THROW(net->forward(in), InvalidInput);
  auto in2 = make_input(sample);
  in2.keyframe_events = in2.keyframe_events.slice(2, 0, 4);
  EXPECT_THROW(net->forward(in2), InvalidInput);
}
