#include <gtest/gtest.h>

#include "essl/objectives.hpp"
#include "gradcheck.hpp"

using namespace essl;
using namespace essl::loss;
using essl::testing::fd_rel_error;
using essl::testing::random_mat;
using essl::testing::random_mat_off_kinks;

namespace {

constexpr double kGradTol = 1e-4;  // against central differences, step 1e-5

MatD normalized_rows(std::initializer_list<std::initializer_list<double>> rows) {
  MatD m(static_cast<long>(rows.size()), static_cast<long>(rows.begin()->size()));
  long i = 0;
  for (auto& r : rows) {
    long j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

// --- unit values -------------------------------------------------------------

TEST(InfoNce, SinglePairIsZero) {
  MatD z = normalized_rows({{1.0, 0.0}});
  auto r = info_nce<double>(z, z, 0.5);
  EXPECT_NEAR(r.value, 0.0, 1e-12);
}

TEST(InfoNce, TwoOrthogonalPairsClosedForm) {
  // Both views equal to the standard basis: each anchor sees its positive at
  // similarity 1 and two negatives at 0, so the per-anchor loss is
  // log(1 + 2 e^{-1/tau}).
  MatD z = normalized_rows({{1.0, 0.0}, {0.0, 1.0}});
  auto r = info_nce<double>(z, z, 0.5);
  double expected = std::log(1.0 + 2.0 * std::exp(-2.0));
  EXPECT_NEAR(r.value, expected, 1e-6);
  EXPECT_NEAR(r.value, 0.2395, 2e-4);
}

TEST(InfoNce, InvariantUnderJointOrthogonalTransform) {
  auto rng = make_root_stream(31).derive("t");
  MatD z1 = random_mat(4, 3, rng), z2 = random_mat(4, 3, rng);
  double base = info_nce<double>(z1, z2, 0.5).value;
  // Householder reflection as an exactly orthogonal map.
  MatD v = random_mat(3, 1, rng);
  v /= v.norm();
  MatD q = MatD::Identity(3, 3) - 2.0 * v * v.transpose();
  double rotated = info_nce<double>((z1 * q).eval(), (z2 * q).eval(), 0.5).value;
  EXPECT_NEAR(base, rotated, 1e-6);
}

TEST(InfoNce, ZeroNormRowThrows) {
  MatD z1 = MatD::Zero(2, 3);
  z1(0, 0) = 1.0;
  MatD z2 = MatD::Ones(2, 3);
  EXPECT_THROW(info_nce<double>(z1, z2, 0.5), std::domain_error);
}

TEST(InfoNce, NonNegative) {
  auto rng = make_root_stream(32).derive("t");
  for (int i = 0; i < 20; ++i) {
    MatD z1 = random_mat(3, 4, rng), z2 = random_mat(3, 4, rng);
    EXPECT_GE(info_nce<double>(z1, z2, 0.5).value, 0.0);
  }
}

TEST(SimSiam, PerfectAlignmentGivesMinusOne) {
  auto rng = make_root_stream(33).derive("t");
  MatD p = random_mat(5, 4, rng);
  auto r = simsiam_negative_cosine<double>(p, p);
  EXPECT_NEAR(r.value, -1.0, 1e-12);
}

TEST(SimSiam, OrthogonalGivesZeroAndRangeHolds) {
  MatD p = normalized_rows({{1.0, 0.0}});
  MatD z = normalized_rows({{0.0, 1.0}});
  EXPECT_NEAR(simsiam_negative_cosine<double>(p, z).value, 0.0, 1e-12);
  auto rng = make_root_stream(34).derive("t");
  for (int i = 0; i < 20; ++i) {
    MatD a = random_mat(4, 5, rng), b = random_mat(4, 5, rng);
    double v = simsiam_negative_cosine<double>(a, b).value;
    EXPECT_GE(v, -1.0 - 1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

TEST(SimSiam, StopGradientBranchIsExactlyZero) {
  auto rng = make_root_stream(35).derive("t");
  MatD p = random_mat(4, 6, rng), z = random_mat(4, 6, rng);
  auto r = simsiam_negative_cosine<double>(p, z);
  EXPECT_EQ(r.d2.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BarlowTwins, IdentityCorrelationGivesZero) {
  auto rng = make_root_stream(36).derive("t");
  // Shared views with centered orthogonal columns: the empirical
  // cross-correlation matrix is the identity, so only the standardization
  // epsilon contributes.
  MatD z = random_mat(64, 4, rng);
  z.rowwise() -= z.colwise().mean();
  for (long j = 0; j < z.cols(); ++j) {
    for (long k = 0; k < j; ++k) z.col(j) -= z.col(k).dot(z.col(j)) * z.col(k);
    z.col(j) /= z.col(j).norm();
  }
  z *= std::sqrt(static_cast<double>(z.rows()));  // unit variance per column
  auto r = barlow_twins<double>(z, z, 5e-3);
  EXPECT_LT(r.value, 1e-6);
}

TEST(BarlowTwins, AntiCorrelationOnDiagonalTerm) {
  auto rng = make_root_stream(37).derive("t");
  const long d = 5;
  MatD z = random_mat(64, d, rng);
  auto r = barlow_twins<double>(z, (-z).eval(), 0.0);
  // C_ii = -1 so the on-diagonal term is (1-(-1))^2 * d = 4d.
  EXPECT_NEAR(r.value, 4.0 * d, 1e-3);
}

TEST(BarlowTwins, OffDiagonalWeightIsLinear) {
  auto rng = make_root_stream(38).derive("t");
  MatD z1 = random_mat(32, 4, rng), z2 = random_mat(32, 4, rng);
  double l0 = barlow_twins<double>(z1, z2, 0.0).value;
  double l1 = barlow_twins<double>(z1, z2, 1.0).value;
  double l2 = barlow_twins<double>(z1, z2, 2.0).value;
  EXPECT_NEAR(l2 - l0, 2.0 * (l1 - l0), 1e-9);
}

TEST(BarlowTwins, ZeroVarianceColumnThrows) {
  MatD z1 = MatD::Ones(8, 3);
  MatD z2 = MatD::Random(8, 3);
  EXPECT_THROW(barlow_twins<double>(z1, z2, 1e-2), std::domain_error);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  MatD logits = MatD::Zero(6, 4);
  std::vector<int> labels = {0, 1, 2, 3, 0, 1};
  auto r = cross_entropy<double>(logits, labels);
  EXPECT_NEAR(r.value, std::log(4.0), 1e-6);
}

TEST(CrossEntropy, ConfidentCorrectIsNearZero) {
  MatD logits = MatD::Zero(2, 4);
  logits(0, 2) = 10.0;
  logits(1, 0) = 10.0;
  auto r = cross_entropy<double>(logits, {2, 0});
  EXPECT_LT(r.value, 1e-3);
  logits(0, 2) = 25.0;
  logits(1, 0) = 25.0;
  EXPECT_LT(cross_entropy<double>(logits, {2, 0}).value, 1e-4);
}

TEST(CrossEntropy, LabelOutOfRangeThrows) {
  MatD logits = MatD::Zero(2, 3);
  EXPECT_THROW(cross_entropy<double>(logits, {0, 3}), std::invalid_argument);
  EXPECT_THROW(cross_entropy<double>(logits, {-1, 0}), std::invalid_argument);
}

TEST(Regression, L1AndMseZeroAtTarget) {
  auto rng = make_root_stream(39).derive("t");
  MatD t = random_mat(4, 1, rng);
  EXPECT_DOUBLE_EQ(l1_loss<double>(t, t).value, 0.0);
  EXPECT_DOUBLE_EQ(mse_loss<double>(t, t).value, 0.0);
  MatD p = t.array() + 0.5;
  EXPECT_NEAR(l1_loss<double>(p, t).value, 0.5, 1e-12);
}

TEST(RelativeOrientation, UniformLogitsGiveLogGroupOrder) {
  MatD logits = MatD::Zero(3, 4);
  auto r = relative_orientation_loss<double>(logits, {0, 1, 2});
  EXPECT_NEAR(r.value, std::log(4.0), 1e-9);
}

// --- permutation symmetry ------------------------------------------------------

TEST(Losses, InvariantUnderBatchPermutation) {
  auto rng = make_root_stream(40).derive("t");
  const long n = 6, d = 5;
  MatD z1 = random_mat(n, d, rng), z2 = random_mat(n, d, rng);
  std::vector<long> perm = {3, 1, 5, 0, 4, 2};
  MatD p1(n, d), p2(n, d);
  for (long i = 0; i < n; ++i) {
    p1.row(i) = z1.row(perm[i]);
    p2.row(i) = z2.row(perm[i]);
  }
  EXPECT_NEAR(info_nce<double>(z1, z2, 0.5).value, info_nce<double>(p1, p2, 0.5).value,
              1e-10);
  EXPECT_NEAR(simsiam_negative_cosine<double>(z1, z2).value,
              simsiam_negative_cosine<double>(p1, p2).value, 1e-10);
  EXPECT_NEAR(barlow_twins<double>(z1, z2, 0.01).value,
              barlow_twins<double>(p1, p2, 0.01).value, 1e-10);
  std::vector<int> labels = {0, 1, 2, 3, 0, 1}, plabels(n);
  for (long i = 0; i < n; ++i) plabels[i] = labels[perm[i]];
  MatD logits = random_mat(n, 4, rng), plogits(n, 4);
  for (long i = 0; i < n; ++i) plogits.row(i) = logits.row(perm[i]);
  EXPECT_NEAR(cross_entropy<double>(logits, labels).value,
              cross_entropy<double>(plogits, plabels).value, 1e-10);
}

// --- gradient checks: 20 random instances per loss ----------------------------

TEST(Gradients, InfoNce) {
  auto rng = make_root_stream(41).derive("t");
  for (int inst = 0; inst < 20; ++inst) {
    long n = 1 + rng.uniform_int(8), d = 2 + rng.uniform_int(15);
    MatD z1 = random_mat(n, d, rng), z2 = random_mat(n, d, rng);
    double tau = rng.uniform(0.2, 1.0);
    auto r = info_nce<double>(z1, z2, tau);
    auto eval = [&]() { return info_nce<double>(z1, z2, tau).value; };
    ASSERT_LT(fd_rel_error(z1, eval, r.d1), kGradTol) << "instance " << inst;
    ASSERT_LT(fd_rel_error(z2, eval, r.d2), kGradTol) << "instance " << inst;
  }
}

TEST(Gradients, SimSiam) {
  auto rng = make_root_stream(42).derive("t");
  for (int inst = 0; inst < 20; ++inst) {
    long n = 1 + rng.uniform_int(8), d = 2 + rng.uniform_int(15);
    MatD p = random_mat(n, d, rng), z = random_mat(n, d, rng);
    auto r = simsiam_negative_cosine<double>(p, z);
    auto eval = [&]() { return simsiam_negative_cosine<double>(p, z).value; };
    ASSERT_LT(fd_rel_error(p, eval, r.d1), kGradTol) << "instance " << inst;
    // Stop-gradient branch: differentiating by z must match the zero tensor
    // only through the loss definition, which treats z as a constant.
    ASSERT_EQ(r.d2.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Gradients, BarlowTwins) {
  auto rng = make_root_stream(43).derive("t");
  for (int inst = 0; inst < 20; ++inst) {
    long n = 4 + rng.uniform_int(5), d = 2 + rng.uniform_int(15);
    MatD z1 = random_mat(n, d, rng), z2 = random_mat(n, d, rng);
    double lam = rng.uniform(0.001, 0.1);
    auto r = barlow_twins<double>(z1, z2, lam);
    auto eval = [&]() { return barlow_twins<double>(z1, z2, lam).value; };
    ASSERT_LT(fd_rel_error(z1, eval, r.d1), kGradTol) << "instance " << inst;
    ASSERT_LT(fd_rel_error(z2, eval, r.d2), kGradTol) << "instance " << inst;
  }
}

TEST(Gradients, CrossEntropy) {
  auto rng = make_root_stream(44).derive("t");
  for (int inst = 0; inst < 20; ++inst) {
    long n = 1 + rng.uniform_int(8), k = 2 + rng.uniform_int(6);
    MatD logits = random_mat(n, k, rng);
    std::vector<int> labels(n);
    for (long i = 0; i < n; ++i) labels[i] = rng.uniform_int(static_cast<int>(k));
    auto r = cross_entropy<double>(logits, labels);
    auto eval = [&]() { return cross_entropy<double>(logits, labels).value; };
    ASSERT_LT(fd_rel_error(logits, eval, r.d1), kGradTol) << "instance " << inst;
  }
}

TEST(Gradients, L1AndMse) {
  auto rng = make_root_stream(45).derive("t");
  for (int inst = 0; inst < 20; ++inst) {
    long n = 1 + rng.uniform_int(8);
    MatD t = random_mat(n, 1, rng);
    MatD p = t + random_mat_off_kinks(n, 1, rng);  // keep |p-t| off the kink
    auto r1 = l1_loss<double>(p, t);
    auto eval1 = [&]() { return l1_loss<double>(p, t).value; };
    ASSERT_LT(fd_rel_error(p, eval1, r1.d1), kGradTol);
    auto r2 = mse_loss<double>(p, t);
    auto eval2 = [&]() { return mse_loss<double>(p, t).value; };
    ASSERT_LT(fd_rel_error(p, eval2, r2.d1), kGradTol);
  }
}

// --- objective container -------------------------------------------------------

TEST(Objective, ValidatesFields) {
  ESSLObjective obj;
  obj.temperature = 0.0;
  EXPECT_THROW(obj.validate(), std::invalid_argument);
  obj.temperature = 0.5;
  obj.lambda_equivariance = -0.1;
  EXPECT_THROW(obj.validate(), std::invalid_argument);
  obj.lambda_equivariance = 0.0;
  EXPECT_NO_THROW(obj.validate());
}
