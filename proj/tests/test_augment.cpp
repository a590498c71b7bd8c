#include <gtest/gtest.h>

#include "essl/augment.hpp"

using namespace essl;

namespace {

Image random_image(RngStream& rng, int c = 3, int h = 32, int w = 32) {
  Image img(c, h, w);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform_int(256)) / 255.f;
  return img;
}

double pixel_sum(const Image& x) {
  double s = 0;
  for (float v : x.data) s += v;
  return s;
}

}  // namespace

TEST(Augment, LevelZeroIsIdentity) {
  auto rng = make_root_stream(1).derive("a");
  auto img = random_image(rng);
  auto stream = make_root_stream(2).derive("aug");
  auto out = augment(img, AugmentationPolicy::cifar(0), stream);
  EXPECT_TRUE(bitwise_equal(out, img));
}

TEST(Augment, LadderIsIncremental) {
  // Draws per level only add ops; every level yields a valid same-shape view.
  auto rng = make_root_stream(3).derive("a");
  auto img = random_image(rng);
  for (int level = 0; level <= 7; ++level) {
    auto stream = make_root_stream(40 + level).derive("aug");
    auto out = augment(img, AugmentationPolicy::cifar(level), stream);
    EXPECT_EQ(out.c, 3);
    EXPECT_EQ(out.h, 32);
    EXPECT_EQ(out.w, 32);
    for (float v : out.data) {
      ASSERT_GE(v, 0.f);
      ASSERT_LE(v, 1.f);
    }
  }
  EXPECT_THROW(AugmentationPolicy::cifar(8), std::invalid_argument);
}

TEST(Augment, TwoDrawsProduceDistinctViews) {
  auto rng = make_root_stream(4).derive("a");
  auto img = random_image(rng);
  auto stream = make_root_stream(5).derive("aug");
  int distinct = 0;
  for (int i = 0; i < 20; ++i) {
    auto v1 = augment(img, AugmentationPolicy::cifar(4), stream);
    auto v2 = augment(img, AugmentationPolicy::cifar(4), stream);
    if (std::abs(pixel_sum(v1) - pixel_sum(v2)) > 1e-6) ++distinct;
  }
  EXPECT_GE(distinct, 19);
}

TEST(Augment, DeterministicUnderSeeds) {
  auto rng = make_root_stream(6).derive("a");
  auto img = random_image(rng);
  for (int level : {1, 4, 7}) {
    auto s1 = make_root_stream(77).derive("aug");
    auto s2 = make_root_stream(77).derive("aug");
    auto v1 = augment(img, AugmentationPolicy::cifar(level), s1);
    auto v2 = augment(img, AugmentationPolicy::cifar(level), s2);
    EXPECT_TRUE(bitwise_equal(v1, v2));
  }
}

TEST(Augment, CropSizeControlsOutputShape) {
  auto rng = make_root_stream(8).derive("a");
  auto img = random_image(rng);
  auto policy = AugmentationPolicy::cifar(1, 16);
  auto stream = make_root_stream(9).derive("aug");
  auto out = augment(img, policy, stream);
  EXPECT_EQ(out.h, 16);
  EXPECT_EQ(out.w, 16);
}

TEST(Augment, PrependGroupAppliesWithProbabilityOne) {
  // With level 0, the output must be exactly one group transform of the input.
  auto rng = make_root_stream(10).derive("a");
  auto img = random_image(rng);
  AugmentationPolicy p = AugmentationPolicy::cifar(0);
  p.prepend_group = GroupName::kFourFoldRotations;
  auto rot = group(GroupName::kFourFoldRotations);
  int hits = 0;
  auto stream = make_root_stream(11).derive("aug");
  for (int i = 0; i < 40; ++i) {
    auto out = augment(img, p, stream);
    for (int k = 0; k < 4; ++k)
      if (bitwise_equal(out, apply(rot.element(k), img))) {
        ++hits;
        break;
      }
  }
  EXPECT_EQ(hits, 40);
}

TEST(Augment, SolarizeOffByDefaultAndBounded) {
  AugmentationPolicy p = AugmentationPolicy::cifar(0);
  EXPECT_FALSE(p.solarize);
  p.solarize = true;
  p.p_solarize = 1.0;
  auto rng = make_root_stream(12).derive("a");
  auto img = random_image(rng);
  auto stream = make_root_stream(13).derive("aug");
  auto out = augment(img, p, stream);
  for (size_t i = 0; i < img.size(); ++i) {
    float expect = img.data[i] >= 0.5f ? 1.f - img.data[i] : img.data[i];
    ASSERT_FLOAT_EQ(out.data[i], expect);
  }
}

TEST(Augment, CellAugmentPreservesValueSet) {
  // Rolls and square-symmetry ops permute pixels; the two-tone value set
  // survives.
  Image cell(1, 8, 8);
  for (int i = 0; i < 64; ++i) cell.data[i] = i % 3 == 0 ? 4.f : 9.f;
  CellAugmentOptions opts;
  opts.c4v = true;
  opts.rolls = true;
  auto stream = make_root_stream(14).derive("aug");
  for (int rep = 0; rep < 20; ++rep) {
    auto out = augment_cell(cell, opts, stream);
    double sum = 0;
    for (float v : out.data) {
      ASSERT_TRUE(v == 4.f || v == 9.f);
      sum += v;
    }
    EXPECT_DOUBLE_EQ(sum, pixel_sum(cell));
  }
}

TEST(Augment, CellScalingMultiplies) {
  Image cell(1, 4, 4, 2.0f);
  CellAugmentOptions opts;
  opts.scaling = true;
  opts.s_max = 10.0;
  auto stream = make_root_stream(15).derive("aug");
  auto out = augment_cell(cell, opts, stream);
  float ratio = out.data[0] / cell.data[0];
  for (size_t i = 0; i < cell.size(); ++i)
    ASSERT_NEAR(out.data[i], ratio * cell.data[i], 1e-6f);
  EXPECT_TRUE(ratio >= 0.1f && ratio <= 10.f);
}
