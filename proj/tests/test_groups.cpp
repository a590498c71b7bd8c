#include <gtest/gtest.h>

#include "essl/groups.hpp"

using namespace essl;

namespace {

const std::vector<GroupName> kFiniteGroups = {
    GroupName::kFourFoldRotations,    GroupName::kHorizontalFlips,
    GroupName::kVerticalFlips,        GroupName::kJigsaw2x2,
    GroupName::kFourFoldTranslations, GroupName::kColorInversions,
};

// Test images sit on the k/256 grid so that color inversion is an exact
// float involution.
Image random_quantized_image(RngStream& rng, int c = 3, int h = 8, int w = 8) {
  Image img(c, h, w);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform_int(256)) / 256.f;
  return img;
}

}  // namespace

TEST(Groups, OrdersMatchDefinitions) {
  EXPECT_EQ(group(GroupName::kFourFoldRotations).order, 4);
  EXPECT_EQ(group(GroupName::kHorizontalFlips).order, 2);
  EXPECT_EQ(group(GroupName::kVerticalFlips).order, 2);
  EXPECT_EQ(group(GroupName::kJigsaw2x2).order, 24);
  EXPECT_EQ(group(GroupName::kFourFoldTranslations).order, 4);
  EXPECT_EQ(group(GroupName::kColorInversions).order, 2);
  EXPECT_EQ(group(GroupName::kGaussianBlurLevels).order, 4);
  EXPECT_EQ(group(GroupName::kScaling).order, kInfiniteOrder);
}

TEST(Groups, BlurSetIsNotAGroup) {
  auto blur = group(GroupName::kGaussianBlurLevels);
  EXPECT_FALSE(blur.is_group);
  EXPECT_THROW(compose(blur.element(1), blur.element(2)), NotAGroupError);
  EXPECT_THROW(inverse(blur.element(1)), NotAGroupError);
  for (auto name : kFiniteGroups) EXPECT_TRUE(group(name).is_group);
}

// Exhaustive axiom suite: closure and associativity over all pairs/triples,
// identity and inverse laws for every element.
TEST(Groups, ExhaustiveAxiomsForAllFiniteGroups) {
  for (auto name : kFiniteGroups) {
    auto grp = group(name);
    const int n = grp.order;
    for (int a = 0; a < n; ++a) {
      auto ga = grp.element(a);
      auto prod = compose(grp.element(0), ga);
      EXPECT_EQ(prod.index, a) << to_string(name) << ": identity law";
      EXPECT_EQ(compose(ga, inverse(ga)).index, 0) << to_string(name) << ": inverse law";
      EXPECT_EQ(compose(inverse(ga), ga).index, 0) << to_string(name) << ": inverse law";
      for (int b = 0; b < n; ++b) {
        auto ab = compose(ga, grp.element(b));
        ASSERT_GE(ab.index, 0);
        ASSERT_LT(ab.index, n) << to_string(name) << ": closure";
        for (int c = 0; c < n; ++c) {
          auto gc = grp.element(c);
          auto left = compose(compose(ga, grp.element(b)), gc);
          auto right = compose(ga, compose(grp.element(b), gc));
          ASSERT_EQ(left.index, right.index)
              << to_string(name) << ": associativity at (" << a << "," << b << "," << c
              << ")";
        }
      }
    }
  }
}

TEST(Groups, IdentityActsAsBitwiseNoop) {
  auto rng = make_root_stream(11).derive("imgs");
  for (auto name : kFiniteGroups) {
    auto img = random_quantized_image(rng);
    EXPECT_TRUE(bitwise_equal(apply(group(name).identity(), img), img));
  }
  auto img = random_quantized_image(rng);
  EXPECT_TRUE(bitwise_equal(apply(group(GroupName::kScaling).scaling_element(1.0), img), img));
  EXPECT_TRUE(bitwise_equal(apply(group(GroupName::kGaussianBlurLevels).element(0), img), img));
}

// Action homomorphism: apply(compose(g,h), x) == apply(g, apply(h, x)),
// bitwise for the index-permutation groups and inversion.
TEST(Groups, ActionHomomorphismBitwise) {
  auto rng = make_root_stream(12).derive("imgs");
  for (auto name : kFiniteGroups) {
    auto grp = group(name);
    for (int rep = 0; rep < 100; ++rep) {
      auto img = random_quantized_image(rng);
      int a = rng.uniform_int(grp.order), b = rng.uniform_int(grp.order);
      auto lhs = apply(compose(grp.element(a), grp.element(b)), img);
      auto rhs = apply(grp.element(a), apply(grp.element(b), img));
      ASSERT_TRUE(bitwise_equal(lhs, rhs))
          << to_string(name) << " homomorphism failed at (" << a << "," << b << ")";
    }
  }
}

TEST(Groups, ScalingHomomorphismWithinTolerance) {
  auto rng = make_root_stream(13).derive("imgs");
  auto grp = group(GroupName::kScaling);
  for (int rep = 0; rep < 100; ++rep) {
    auto img = random_quantized_image(rng);
    double s1 = rng.uniform(0.1, 10.0), s2 = rng.uniform(0.1, 10.0);
    auto lhs = apply(compose(grp.scaling_element(s1), grp.scaling_element(s2)), img);
    auto rhs = apply(grp.scaling_element(s1), apply(grp.scaling_element(s2), img));
    for (size_t i = 0; i < lhs.size(); ++i)
      ASSERT_NEAR(lhs.data[i], rhs.data[i], 1e-6f * std::max(1.f, std::abs(rhs.data[i])));
  }
}

TEST(Groups, RotationCompositionOfQuarterTurns) {
  auto rng = make_root_stream(14).derive("imgs");
  auto img = random_quantized_image(rng);
  auto rot = group(GroupName::kFourFoldRotations);
  auto once = apply(rot.element(1), img);
  auto twice = apply(rot.element(1), once);
  EXPECT_TRUE(bitwise_equal(twice, apply(rot.element(2), img)));
  EXPECT_EQ(inverse(rot.element(1)).index, 3);
}

TEST(Groups, KleinFourGroupTable) {
  auto tr = group(GroupName::kFourFoldTranslations);
  // Elements: 0=e, 1=h, 2=v, 3=hv.
  EXPECT_EQ(compose(tr.element(1), tr.element(2)).index, 3);
  EXPECT_EQ(compose(tr.element(2), tr.element(1)).index, 3);
  EXPECT_EQ(compose(tr.element(1), tr.element(1)).index, 0);
  EXPECT_EQ(compose(tr.element(3), tr.element(1)).index, 2);
  // The action: half-cell shifts on each axis.
  auto rng = make_root_stream(15).derive("imgs");
  auto img = random_quantized_image(rng, 1, 6, 6);
  auto h_then_v = apply(tr.element(2), apply(tr.element(1), img));
  EXPECT_TRUE(bitwise_equal(h_then_v, apply(tr.element(3), img)));
}

TEST(Groups, BlurLevelsMatchKernelTable) {
  EXPECT_EQ(kBlurKernelSizes, (std::array<int, 4>{0, 5, 9, 15}));
  auto rng = make_root_stream(16).derive("imgs");
  auto img = random_quantized_image(rng, 3, 16, 16);
  auto blur = group(GroupName::kGaussianBlurLevels);
  EXPECT_TRUE(bitwise_equal(apply(blur.element(0), img), img));
  // Stronger levels blur more: variance decreases monotonically.
  auto variance = [](const Image& x) {
    double m = 0;
    for (float v : x.data) m += v;
    m /= x.size();
    double var = 0;
    for (float v : x.data) var += (v - m) * (v - m);
    return var / x.size();
  };
  double v0 = variance(img);
  double v1 = variance(apply(blur.element(1), img));
  double v2 = variance(apply(blur.element(2), img));
  double v3 = variance(apply(blur.element(3), img));
  EXPECT_GT(v0, v1);
  EXPECT_GT(v1, v2);
  EXPECT_GT(v2, v3);
}

TEST(Groups, InverseExamples) {
  auto sc = group(GroupName::kScaling);
  EXPECT_DOUBLE_EQ(inverse(sc.scaling_element(4.0)).scale, 0.25);
  EXPECT_EQ(inverse(group(GroupName::kHorizontalFlips).element(1)).index, 1);
  EXPECT_EQ(inverse(group(GroupName::kVerticalFlips).element(1)).index, 1);
  EXPECT_EQ(inverse(group(GroupName::kColorInversions).element(1)).index, 1);
}

TEST(Groups, SampleUniformOverFiniteGroups) {
  auto rot = group(GroupName::kFourFoldRotations);
  auto rng = make_root_stream(99).derive("sample");
  std::array<int, 4> counts{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[sample(rot, rng).index];
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(draws), 0.25, 0.01);

  // Identical seeds give identical streams.
  auto rng1 = make_root_stream(5).derive("sample");
  auto rng2 = make_root_stream(5).derive("sample");
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(sample(rot, rng1).index, sample(rot, rng2).index);
}

// Chi-square against the uniform law over all 24 jigsaw permutations.
TEST(Groups, SampleJigsawUniformChiSquare) {
  auto jig = group(GroupName::kJigsaw2x2);
  auto rng = make_root_stream(123).derive("sample");
  std::array<long, 24> counts{};
  const long draws = 240000;
  for (long i = 0; i < draws; ++i) ++counts[sample(jig, rng).index];
  double expected = draws / 24.0;
  double chi2 = 0;
  for (long c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 23 degrees of freedom; 99.9th percentile is ~49.7.
  EXPECT_LT(chi2, 49.7);
}

TEST(Groups, SampleScalingRange) {
  auto sc = group(GroupName::kScaling);
  auto rng = make_root_stream(7).derive("sample");
  int up = 0, down = 0;
  for (int i = 0; i < 20000; ++i) {
    auto g = sample(sc, rng, 10.0);
    if (g.scale > 1.0) {
      ++up;
      EXPECT_LE(g.scale, 10.0);
    } else {
      ++down;
      EXPECT_GE(g.scale, 0.1);
      EXPECT_LT(g.scale, 1.0);
    }
  }
  EXPECT_NEAR(up / 20000.0, 0.5, 0.02);
  EXPECT_THROW(sample(sc, rng, 1.0), std::invalid_argument);
  EXPECT_THROW(sample(sc, rng, 0.5), std::invalid_argument);
}

TEST(Groups, GpmRotationClasses) {
  auto rot = group(GroupName::kFourFoldRotations);
  EXPECT_EQ(gpm_rotation_class(rot.element(0)), 0);
  EXPECT_EQ(gpm_rotation_class(rot.element(1)), 1);
  EXPECT_EQ(gpm_rotation_class(rot.element(2)), 0);
  EXPECT_EQ(gpm_rotation_class(rot.element(3)), 1);
  EXPECT_THROW(gpm_rotation_class(group(GroupName::kHorizontalFlips).element(1)),
               std::invalid_argument);
}

TEST(Groups, ErrorsOnBadInputs) {
  auto jig = group(GroupName::kJigsaw2x2);
  Image odd(3, 7, 8, 0.5f);
  EXPECT_THROW(apply(jig.element(5), odd), std::invalid_argument);
  Image odd2(1, 8, 7, 0.5f);
  EXPECT_THROW(apply(group(GroupName::kFourFoldTranslations).element(1), odd2),
               std::invalid_argument);
  EXPECT_THROW(group(GroupName::kScaling).scaling_element(-2.0), std::invalid_argument);
  EXPECT_THROW(group(GroupName::kFourFoldRotations).element(4), std::invalid_argument);
  EXPECT_THROW(compose(group(GroupName::kFourFoldRotations).element(1),
                       group(GroupName::kHorizontalFlips).element(1)),
               std::invalid_argument);
}

TEST(Groups, JigsawOrderAndInverseLaw) {
  auto jig = group(GroupName::kJigsaw2x2);
  EXPECT_EQ(jig.order, 24);
  auto rng = make_root_stream(21).derive("imgs");
  auto img = random_quantized_image(rng, 3, 8, 8);
  for (int i = 0; i < 24; ++i) {
    auto g = jig.element(i);
    EXPECT_TRUE(bitwise_equal(apply(inverse(g), apply(g, img)), img));
  }
}
