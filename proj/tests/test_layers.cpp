#include <gtest/gtest.h>

#include "essl/layers.hpp"
#include "gradcheck.hpp"

using namespace essl;
using namespace essl::nn;
using essl::testing::fd_rel_error;
using essl::testing::random_mat;
using essl::testing::random_mat_off_kinks;

namespace {

constexpr double kTol = 1e-6;

// Weighted-sum loss drives every gradient check.
template <class Layer>
void check_dense_layer(Layer& layer, MatD x, RngStream& rng, double tol = kTol) {
  MatD w = random_mat(x.rows(), layer.out_dim(x.cols()), rng);
  auto eval = [&]() { return (layer.forward(x, true).array() * w.array()).sum(); };

  layer.forward(x, true);
  MatD dx = layer.backward(w);
  EXPECT_LT(fd_rel_error(x, eval, dx), tol) << "input gradient";

  std::vector<Param<double>*> params;
  layer.collect(params);
  for (auto* p : params) {
    p->zero_grad();
    layer.forward(x, true);
    layer.backward(w);
    MatD analytic = p->grad;
    EXPECT_LT(fd_rel_error(p->value, eval, analytic), tol) << p->name;
  }
}

}  // namespace

TEST(Layers, LinearForwardAndGradients) {
  auto rng = make_root_stream(1).derive("t");
  Linear<double> lin(5, 3, rng, true, "lin");
  MatD x = random_mat(4, 5, rng);
  check_dense_layer(lin, x, rng);
}

TEST(Layers, ReluGradient) {
  auto rng = make_root_stream(2).derive("t");
  Relu<double> relu;
  MatD x = random_mat_off_kinks(6, 7, rng);
  check_dense_layer(relu, x, rng);
}

TEST(Layers, BatchNorm1dTrainGradients) {
  auto rng = make_root_stream(3).derive("t");
  BatchNorm1d<double> bn(5, rng, true, "bn");
  MatD x = random_mat(8, 5, rng);
  check_dense_layer(bn, x, rng);
}

TEST(Layers, BatchNorm1dEvalUsesRunningStats) {
  auto rng = make_root_stream(4).derive("t");
  BatchNorm1d<double> bn(3, rng, true, "bn");
  MatD x = random_mat(16, 3, rng, 1.0, 3.0);
  for (int i = 0; i < 200; ++i) bn.forward(x, true);
  MatD y_eval = bn.forward(x, false);
  // Eval mode is deterministic and row-independent.
  MatD single = bn.forward(x.topRows(1), false);
  EXPECT_EQ((single - y_eval.topRows(1)).cwiseAbs().maxCoeff(), 0.0);
  // Running stats track batch stats up to the unbiased-variance correction.
  MatD y_train = bn.forward(x, true);
  EXPECT_LT((y_eval - y_train).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Layers, LayerNormGradients) {
  auto rng = make_root_stream(5).derive("t");
  LayerNorm<double> ln(6, rng, true, "ln");
  MatD x = random_mat(5, 6, rng);
  check_dense_layer(ln, x, rng);
}

TEST(Layers, SequentialComposesBackward) {
  auto rng = make_root_stream(6).derive("t");
  Sequential<double> net;
  net.add(std::make_unique<Linear<double>>(4, 8, rng, true, "fc1"));
  net.add(std::make_unique<BatchNorm1d<double>>(8, rng, true, "bn1"));
  net.add(std::make_unique<Relu<double>>());
  net.add(std::make_unique<Linear<double>>(8, 3, rng, true, "fc2"));
  MatD x = random_mat(6, 4, rng);
  MatD w = random_mat(6, 3, rng);
  auto eval = [&]() { return (net.forward(x, true).array() * w.array()).sum(); };
  net.forward(x, true);
  MatD dx = net.backward(w);
  EXPECT_LT(fd_rel_error(x, eval, dx), kTol);

  std::vector<Param<double>*> params;
  net.collect(params);
  ASSERT_EQ(params.size(), 6u);
  for (auto* p : params) {
    p->zero_grad();
    net.forward(x, true);
    net.backward(w);
    MatD analytic = p->grad;
    EXPECT_LT(fd_rel_error(p->value, eval, analytic), kTol) << p->name;
  }
}

namespace {

template <class Layer4>
void check_conv_layer(Layer4& layer, Batch4<double> x, RngStream& rng,
                      double tol = kTol) {
  Batch4<double> probe = layer.forward(x, true);
  MatD w = random_mat(probe.m.rows(), probe.m.cols(), rng);
  auto eval = [&]() {
    Batch4<double> y = layer.forward(x, true);
    return (y.m.array() * w.array()).sum();
  };
  layer.forward(x, true);
  Batch4<double> dyb = probe;
  dyb.m = w;
  Batch4<double> dx = layer.backward(dyb);
  EXPECT_LT(fd_rel_error(x.m, eval, dx.m), tol) << "conv input gradient";

  if constexpr (requires(std::vector<Param<double>*>& ps) { layer.collect(ps); }) {
    std::vector<Param<double>*> params;
    layer.collect(params);
    for (auto* p : params) {
      p->zero_grad();
      layer.forward(x, true);
      layer.backward(dyb);
      MatD analytic = p->grad;
      EXPECT_LT(fd_rel_error(p->value, eval, analytic), tol) << p->name;
    }
  }
}

}  // namespace

TEST(Layers, Conv2dGradientsStride1) {
  auto rng = make_root_stream(7).derive("t");
  Conv2d<double> conv(2, 3, 3, 1, 1, rng, true, "conv");
  Batch4<double> x(2, 2, 4, 4);
  x.m = random_mat(2, 2 * 16, rng);
  check_conv_layer(conv, x, rng);
}

TEST(Layers, Conv2dGradientsStride2) {
  auto rng = make_root_stream(8).derive("t");
  Conv2d<double> conv(1, 2, 3, 2, 1, rng, false, "conv");
  Batch4<double> x(2, 1, 6, 6);
  x.m = random_mat(2, 36, rng);
  check_conv_layer(conv, x, rng);
}

TEST(Layers, Conv2dOutputShape) {
  auto rng = make_root_stream(9).derive("t");
  Conv2d<double> conv(3, 8, 7, 1, 3, rng, false, "conv");
  Batch4<double> x(2, 3, 32, 32);
  x.m = random_mat(2, 3 * 32 * 32, rng);
  auto y = conv.forward(x, true);
  EXPECT_EQ(y.c, 8);
  EXPECT_EQ(y.h, 32);
  EXPECT_EQ(y.w, 32);
}

TEST(Layers, BatchNorm2dGradients) {
  auto rng = make_root_stream(10).derive("t");
  BatchNorm2d<double> bn(2, "bn2");
  Batch4<double> x(3, 2, 3, 3);
  x.m = random_mat(3, 2 * 9, rng);
  check_conv_layer(bn, x, rng);
}

TEST(Layers, MaxPoolGradients) {
  auto rng = make_root_stream(11).derive("t");
  MaxPool2d<double> pool(2, 2);
  Batch4<double> x(2, 2, 4, 4);
  x.m = random_mat(2, 32, rng);
  check_conv_layer(pool, x, rng);
}

TEST(Layers, MaxPoolWithPadding) {
  auto rng = make_root_stream(12).derive("t");
  MaxPool2d<double> pool(3, 2, 1);
  Batch4<double> x(1, 1, 8, 8);
  x.m = random_mat(1, 64, rng);
  auto y = pool.forward(x, true);
  EXPECT_EQ(y.h, 4);
  EXPECT_EQ(y.w, 4);
  check_conv_layer(pool, x, rng);
}

TEST(Layers, GlobalAvgPoolGradients) {
  auto rng = make_root_stream(13).derive("t");
  GlobalAvgPool<double> gap;
  Batch4<double> x(2, 3, 4, 4);
  x.m = random_mat(2, 48, rng);
  MatD w = random_mat(2, 3, rng);
  auto eval = [&]() { return (gap.forward(x, true).array() * w.array()).sum(); };
  gap.forward(x, true);
  Batch4<double> dx = gap.backward(w);
  EXPECT_LT(fd_rel_error(x.m, eval, dx.m), kTol);
}
