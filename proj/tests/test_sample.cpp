#include <gtest/gtest.h>

#include <random>

#include "evhdr/errors.hpp"
#include "evhdr/sample.hpp"
#include "evhdr/scene.hpp"
#include "evhdr/synth.hpp"

using namespace evhdr;

namespace {

BracketSample small_sample(int w, int h, bool normalize) {
  SceneConfig sc;
  sc.width = w;
  sc.height = h;
  sc.frames = 4;
  sc.motion_px = 2.0;
  SynthConfig cfg;
  cfg.voxels.normalize = normalize;
  auto samples = synthesize_samples(render_scene(sc), cfg, "t");
  return samples.at(0);
}

void expect_grid_eq(const VoxelGrid& a, const VoxelGrid& b, float tol = 0.0f) {
  ASSERT_EQ(a.bins, b.bins);
  ASSERT_EQ(a.height, b.height);
  ASSERT_EQ(a.width, b.width);
  for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_NEAR(a.values[i], b.values[i], tol) << i;
}

}  // namespace

TEST(DrawCrop, StaysInBoundsOverManyDraws) {
  const int h = 37, w = 52, crop = 16;
  int max_y = 0, max_x = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    auto c = draw_crop(h, w, crop, seed);
    ASSERT_GE(c.y0, 0);
    ASSERT_GE(c.x0, 0);
    ASSERT_LE(c.y0, h - crop);
    ASSERT_LE(c.x0, w - crop);
    max_y = std::max(max_y, c.y0);
    max_x = std::max(max_x, c.x0);
  }
  EXPECT_EQ(max_y, h - crop);
  EXPECT_EQ(max_x, w - crop);
}

TEST(DrawCrop, DeterministicAndRejectsLargeCrops) {
  auto a = draw_crop(40, 40, 8, 123);
  auto b = draw_crop(40, 40, 8, 123);
  EXPECT_EQ(a.y0, b.y0);
  EXPECT_EQ(a.x0, b.x0);
  EXPECT_THROW(draw_crop(40, 30, 32, 0), InvalidInput);
}

TEST(SampleCrop, FullSizeIsIdentity) {
  auto s = small_sample(16, 16, true);
  auto c = sample_crop(s, 16, 5);
  EXPECT_EQ(c.gt.data, s.gt.data);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(c.ldr[i].pixels.data, s.ldr[i].pixels.data);
    expect_grid_eq(c.keyframe_voxels[i], s.keyframe_voxels[i]);
  }
  EXPECT_EQ(c.events.parts[1], s.events.parts[1]);
}

TEST(SampleCrop, SameWindowOnEveryModality) {
  auto s = small_sample(24, 20, true);
  const CropWindow win{3, 5, 12};
  auto c = crop_sample(s, win);
  EXPECT_EQ(c.height(), 12);
  EXPECT_EQ(c.width(), 12);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) {
      EXPECT_EQ(c.gt.at(y, x, 1), s.gt.at(y + 3, x + 5, 1));
      EXPECT_EQ(c.ldr[2].pixels.at(y, x, 0), s.ldr[2].pixels.at(y + 3, x + 5, 0));
      EXPECT_EQ(c.linear[0].pixels.at(y, x, 2), s.linear[0].pixels.at(y + 3, x + 5, 2));
      EXPECT_EQ(c.keyframe_voxels[1].at(4, y, x), s.keyframe_voxels[1].at(4, y + 3, x + 5));
      EXPECT_EQ(c.windows.windows[7].at(2, y, x), s.windows.windows[7].at(2, y + 3, x + 5));
    }
  }
}

TEST(SampleCrop, GridCropEqualsRevoxelizedCrop) {
  auto s = small_sample(24, 24, false);
  ASSERT_GT(s.events.parts[0].size() + s.events.parts[1].size(), 0u);
  auto c = crop_sample(s, {4, 6, 16});
  BracketSample re = c;
  attach_voxels(re, VoxelSettings{5, 1, false});
  for (int i = 0; i < 3; ++i) expect_grid_eq(c.keyframe_voxels[i], re.keyframe_voxels[i], 1e-6f);
  ASSERT_EQ(c.windows.windows.size(), re.windows.windows.size());
  for (std::size_t k = 0; k < c.windows.windows.size(); ++k) {
    expect_grid_eq(c.windows.windows[k], re.windows.windows[k], 1e-6f);
  }
}

TEST(Transform, Involutions) {
  Image img(5, 5, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i);
  GeometricTransform h{true, false, 0};
  GeometricTransform v{false, true, 0};
  GeometricTransform r{false, false, 1};
  EXPECT_EQ(transform_image(transform_image(img, h), h).data, img.data);
  EXPECT_EQ(transform_image(transform_image(img, v), v).data, img.data);
  Image rot = img;
  for (int k = 0; k < 4; ++k) rot = transform_image(rot, r);
  EXPECT_EQ(rot.data, img.data);
  EXPECT_NE(transform_image(img, r).data, img.data);
}

TEST(Transform, RotationIsCounterClockwise) {
  Image img(2, 3, 1);
  img.data = {1, 2, 3, 4, 5, 6};  // rows [1 2 3] / [4 5 6]
  auto r = transform_image(img, {false, false, 1});
  ASSERT_EQ(r.height, 3);
  ASSERT_EQ(r.width, 2);
  EXPECT_EQ(r.data, (std::vector<float>{3, 6, 2, 5, 1, 4}));
}

TEST(Augment, IdentityDrawLeavesSampleUnchanged) {
  auto s = small_sample(16, 16, true);
  auto t = apply_transform(s, GeometricTransform{});
  EXPECT_EQ(t.gt.data, s.gt.data);
  expect_grid_eq(t.windows.windows[3], s.windows.windows[3]);
  EXPECT_EQ(t.events.parts[2], s.events.parts[2]);
}

TEST(Augment, EventsAndGridsTransformConsistently) {
  auto s = small_sample(16, 16, false);
  for (int code = 0; code < 16; ++code) {
    GeometricTransform t{(code & 1) != 0, (code & 2) != 0, code >> 2};
    auto a = apply_transform(s, t);
    BracketSample re = a;
    attach_voxels(re, VoxelSettings{5, 1, false});
    for (int i = 0; i < 3; ++i) {
      expect_grid_eq(a.keyframe_voxels[i], re.keyframe_voxels[i], 1e-6f);
      expect_grid_eq(a.keyframe_voxels[i], transform_voxels(s.keyframe_voxels[i], t));
    }
    for (std::size_t k = 0; k < a.windows.windows.size(); ++k) {
      expect_grid_eq(a.windows.windows[k], re.windows.windows[k], 1e-6f);
    }
  }
}

TEST(Augment, PolaritiesUnchanged) {
  auto s = small_sample(16, 16, false);
  auto a = apply_transform(s, {true, true, 3});
  for (int i = 0; i < 3; ++i) {
    ASSERT_EQ(a.events.parts[i].size(), s.events.parts[i].size());
    int sum_a = 0, sum_s = 0;
    for (const auto& e : a.events.parts[i].records) sum_a += e.p;
    for (const auto& e : s.events.parts[i].records) sum_s += e.p;
    EXPECT_EQ(sum_a, sum_s);
  }
}

TEST(Augment, RotationNeedsSquareInput) {
  auto s = small_sample(20, 16, true);
  EXPECT_THROW(augment(s, 1, true), InvalidInput);
  EXPECT_NO_THROW(augment(s, 1, false));
}

TEST(Augment, DeterministicPerSeed) {
  auto s = small_sample(16, 16, true);
  auto a = augment(s, 77);
  auto b = augment(s, 77);
  EXPECT_EQ(a.gt.data, b.gt.data);
  EXPECT_EQ(a.ldr[0].pixels.data, b.ldr[0].pixels.data);
}
