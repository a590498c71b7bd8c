#pragma once

#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <tuple>

#include "essl/layers.hpp"

namespace essl::nn {

enum class EncoderKind { kResnet18Cifar, kResnet18Standard, kMlpBackbone, kPhcCnn };
enum class NormKind { kLayerNorm, kBatchNorm, kNone };

std::string to_string(EncoderKind k);
std::string to_string(NormKind k);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::kResnet18Cifar;
  long feature_dim = 512;
  int input_channels = 3;

  // mlp_backbone only: fixed input resolution and hidden width.
  int mlp_input_hw = 32;
  long mlp_hidden = 2048;

  // conv backbones: channel width multiplier for desk-scale runs.
  double conv_width = 1.0;
  bool zero_init_residual = false;

  static EncoderSpec resnet18_cifar();
  static EncoderSpec resnet18_standard();
  static EncoderSpec mlp_backbone();
  static EncoderSpec phc_cnn();

  std::string describe() const;
};

struct ProjectorSpec {
  int depth = 2;
  long input_dim = 512;
  long hidden_dim = 2048;
  long output_dim = 2048;
  NormKind norm = NormKind::kBatchNorm;
  bool final_norm = true;          // normalization after the last linear
  bool final_norm_affine = false;  // its learnable affine parameters

  static ProjectorSpec cifar(long input_dim = 512);
  static ProjectorSpec phc(long input_dim = 1024);
  std::string describe() const;
};

struct PredictorSpec {
  int depth = 2;  // hidden MLP blocks before the linear head; 0 = linear head only
  long input_dim = 512;
  long hidden_dim = 2048;
  long num_outputs = 4;
  NormKind norm = NormKind::kLayerNorm;
  bool drop_last_relu = false;
  int input_dim_multiplier = 1;  // 2 for relative-orientation mode
  bool head_bias = true;

  static PredictorSpec cifar(long input_dim = 512, long num_outputs = 4);
  static PredictorSpec imagenet(long input_dim = 2048, long num_outputs = 4);
  static PredictorSpec phc(long input_dim = 1024, long num_outputs = 2);
  std::string describe() const;
};

// ---------------------------------------------------------------------------

template <class S>
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual Mat<S> forward(const Batch4<S>& x, bool train) = 0;
  virtual Batch4<S> backward(const Mat<S>& dfeat) = 0;
  virtual void collect(std::vector<Param<S>*>& out) = 0;
  virtual void collect_state(StateMap<S>& out) = 0;
  virtual long feature_dim() const = 0;
};

template <class S>
class MlpEncoder : public Encoder<S> {
 public:
  MlpEncoder(const EncoderSpec& spec, RngStream& rng) : spec_(spec) {
    in_dim_ = static_cast<long>(spec.input_channels) * spec.mlp_input_hw * spec.mlp_input_hw;
    long h = spec.mlp_hidden;
    net_.add(std::make_unique<Linear<S>>(in_dim_, h, rng, true, "f.fc1"));
    net_.add(std::make_unique<BatchNorm1d<S>>(h, rng, true, "f.bn1"));
    net_.add(std::make_unique<Relu<S>>());
    net_.add(std::make_unique<Linear<S>>(h, h, rng, true, "f.fc2"));
    net_.add(std::make_unique<BatchNorm1d<S>>(h, rng, true, "f.bn2"));
    net_.add(std::make_unique<Relu<S>>());
    net_.add(std::make_unique<Linear<S>>(h, spec.feature_dim, rng, true, "f.fc3"));
  }

  Mat<S> forward(const Batch4<S>& x, bool train) override {
    if (x.h != spec_.mlp_input_hw || x.w != spec_.mlp_input_hw ||
        x.c != spec_.input_channels)
      throw std::invalid_argument(
          "mlp_backbone is a fixed-input architecture: expected " +
          std::to_string(spec_.input_channels) + "x" +
          std::to_string(spec_.mlp_input_hw) + "x" + std::to_string(spec_.mlp_input_hw));
    shape_ = {x.n, x.c, x.h, x.w};
    return net_.forward(x.m, train);
  }

  Batch4<S> backward(const Mat<S>& dfeat) override {
    Batch4<S> dx;
    dx.n = shape_[0];
    dx.c = shape_[1];
    dx.h = shape_[2];
    dx.w = shape_[3];
    dx.m = net_.backward(dfeat);
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) override { net_.collect(out); }
  void collect_state(StateMap<S>& out) override { net_.collect_state(out); }
  long feature_dim() const override { return spec_.feature_dim; }

 private:
  EncoderSpec spec_;
  long in_dim_;
  Sequential<S> net_;
  std::array<int, 4> shape_{};
};

/// Two 3x3 convolutions with identity (or 1x1-projected) skip connection.
template <class S>
struct BasicBlock {
  BasicBlock(int in_c, int out_c, int stride, RngStream& rng, const std::string& name)
      : conv1(in_c, out_c, 3, stride, 1, rng, false, name + ".conv1"),
        bn1(out_c, name + ".bn1"),
        conv2(out_c, out_c, 3, 1, 1, rng, false, name + ".conv2"),
        bn2(out_c, name + ".bn2"),
        has_down(stride != 1 || in_c != out_c) {
    if (has_down) {
      down_conv = std::make_unique<Conv2d<S>>(in_c, out_c, 1, stride, 0, rng, false,
                                              name + ".down.conv");
      down_bn = std::make_unique<BatchNorm2d<S>>(out_c, name + ".down.bn");
    }
  }

  Batch4<S> forward(const Batch4<S>& x, bool train) {
    Batch4<S> main = relu1.forward(bn1.forward(conv1.forward(x, train), train), train);
    main = bn2.forward(conv2.forward(main, train), train);
    Batch4<S> skip = x;
    if (has_down) skip = down_bn->forward(down_conv->forward(x, train), train);
    Batch4<S> out = main;
    out.m += skip.m;
    mask_ = (out.m.array() > S(0)).template cast<S>();
    out.m = out.m.cwiseMax(S(0));
    return out;
  }

  Batch4<S> backward(const Batch4<S>& dy) {
    Batch4<S> d = dy;
    d.m = dy.m.cwiseProduct(mask_);
    Batch4<S> dmain = conv1.backward(bn1.backward(relu1.backward(
        conv2.backward(bn2.backward(d)))));
    Batch4<S> dskip = d;
    if (has_down) dskip = down_conv->backward(down_bn->backward(d));
    dmain.m += dskip.m;
    return dmain;
  }

  void collect(std::vector<Param<S>*>& out) {
    conv1.collect(out);
    bn1.collect(out);
    conv2.collect(out);
    bn2.collect(out);
    if (has_down) {
      down_conv->collect(out);
      down_bn->collect(out);
    }
  }
  void collect_state(StateMap<S>& out) {
    conv1.collect_state(out);
    bn1.collect_state(out);
    conv2.collect_state(out);
    bn2.collect_state(out);
    if (has_down) {
      down_conv->collect_state(out);
      down_bn->collect_state(out);
    }
  }

  Conv2d<S> conv1;
  BatchNorm2d<S> bn1;
  Relu4<S> relu1;
  Conv2d<S> conv2;
  BatchNorm2d<S> bn2;
  bool has_down;
  std::unique_ptr<Conv2d<S>> down_conv;
  std::unique_ptr<BatchNorm2d<S>> down_bn;
  Mat<S> mask_;
};

template <class S>
class ResNet18 : public Encoder<S> {
 public:
  ResNet18(const EncoderSpec& spec, RngStream& rng) : spec_(spec) {
    cifar_stem_ = spec.kind == EncoderKind::kResnet18Cifar;
    auto ch = [&](int base) {
      return std::max(1, static_cast<int>(std::lround(base * spec.conv_width)));
    };
    widths_ = {ch(64), ch(128), ch(256), ch(512)};
    if (spec.feature_dim != widths_[3])
      throw std::invalid_argument("resnet18: feature_dim must equal final width");
    if (cifar_stem_) {
      stem_conv_ = std::make_unique<Conv2d<S>>(spec.input_channels, widths_[0], 3, 1, 1,
                                               rng, false, "f.stem.conv");
    } else {
      stem_conv_ = std::make_unique<Conv2d<S>>(spec.input_channels, widths_[0], 7, 2, 3,
                                               rng, false, "f.stem.conv");
      stem_pool_ = std::make_unique<MaxPool2d<S>>(3, 2, 1);
    }
    stem_bn_ = std::make_unique<BatchNorm2d<S>>(widths_[0], "f.stem.bn");
    int in_c = widths_[0];
    for (int stage = 0; stage < 4; ++stage) {
      int out_c = widths_[stage];
      int stride = stage == 0 ? 1 : 2;
      for (int b = 0; b < 2; ++b) {
        std::string name = "f.layer" + std::to_string(stage + 1) + "." + std::to_string(b);
        blocks_.push_back(std::make_unique<BasicBlock<S>>(
            in_c, out_c, b == 0 ? stride : 1, rng, name));
        in_c = out_c;
      }
    }
    if (spec.zero_init_residual)
      for (auto& blk : blocks_) blk->bn2.gamma().value.setZero();
  }

  Mat<S> forward(const Batch4<S>& x, bool train) override {
    Batch4<S> h = stem_relu_.forward(stem_bn_->forward(stem_conv_->forward(x, train), train), train);
    if (stem_pool_) h = stem_pool_->forward(h, train);
    for (auto& blk : blocks_) h = blk->forward(h, train);
    return gap_.forward(h, train);
  }

  Batch4<S> backward(const Mat<S>& dfeat) override {
    Batch4<S> d = gap_.backward(dfeat);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = (*it)->backward(d);
    if (stem_pool_) d = stem_pool_->backward(d);
    return stem_conv_->backward(stem_bn_->backward(stem_relu_.backward(d)));
  }

  void collect(std::vector<Param<S>*>& out) override {
    stem_conv_->collect(out);
    stem_bn_->collect(out);
    for (auto& blk : blocks_) blk->collect(out);
  }
  void collect_state(StateMap<S>& out) override {
    stem_conv_->collect_state(out);
    stem_bn_->collect_state(out);
    for (auto& blk : blocks_) blk->collect_state(out);
  }
  long feature_dim() const override { return spec_.feature_dim; }

 private:
  EncoderSpec spec_;
  bool cifar_stem_;
  std::array<int, 4> widths_{};
  std::unique_ptr<Conv2d<S>> stem_conv_;
  std::unique_ptr<BatchNorm2d<S>> stem_bn_;
  Relu4<S> stem_relu_;
  std::unique_ptr<MaxPool2d<S>> stem_pool_;
  std::vector<std::unique_ptr<BasicBlock<S>>> blocks_;
  GlobalAvgPool<S> gap_;
};

/// Three 7x7 conv blocks with pooling, then two fully connected layers
/// (ReLU after the first only).
template <class S>
class PhcCnn : public Encoder<S> {
 public:
  PhcCnn(const EncoderSpec& spec, RngStream& rng) : spec_(spec) {
    auto ch = [&](int base) {
      return std::max(1, static_cast<int>(std::lround(base * spec.conv_width)));
    };
    c1_ = ch(64);
    c2_ = ch(256);
    c3_ = ch(256);
    conv1_ = std::make_unique<Conv2d<S>>(spec.input_channels, c1_, 7, 1, 3, rng, false, "f.conv1");
    bn1_ = std::make_unique<BatchNorm2d<S>>(c1_, "f.bn1");
    conv2_ = std::make_unique<Conv2d<S>>(c1_, c2_, 7, 1, 3, rng, false, "f.conv2");
    bn2_ = std::make_unique<BatchNorm2d<S>>(c2_, "f.bn2");
    conv3_ = std::make_unique<Conv2d<S>>(c2_, c3_, 7, 1, 3, rng, false, "f.conv3");
    bn3_ = std::make_unique<BatchNorm2d<S>>(c3_, "f.bn3");
    // 32x32 cells pooled three times leave a 4x4 map.
    flat_dim_ = static_cast<long>(c3_) * 4 * 4;
    fc_.add(std::make_unique<Linear<S>>(flat_dim_, spec.feature_dim, rng, true, "f.fc1"));
    fc_.add(std::make_unique<Relu<S>>());
    fc_.add(std::make_unique<Linear<S>>(spec.feature_dim, spec.feature_dim, rng, true, "f.fc2"));
  }

  Mat<S> forward(const Batch4<S>& x, bool train) override {
    Batch4<S> h = pool1_.forward(relu1_.forward(bn1_->forward(conv1_->forward(x, train), train), train), train);
    h = pool2_.forward(relu2_.forward(bn2_->forward(conv2_->forward(h, train), train), train), train);
    h = pool3_.forward(relu3_.forward(bn3_->forward(conv3_->forward(h, train), train), train), train);
    conv_out_shape_ = {h.n, h.c, h.h, h.w};
    if (h.feat() != flat_dim_)
      throw std::invalid_argument("phc_cnn: unexpected input resolution");
    return fc_.forward(h.m, train);
  }

  Batch4<S> backward(const Mat<S>& dfeat) override {
    Batch4<S> d;
    d.n = conv_out_shape_[0];
    d.c = conv_out_shape_[1];
    d.h = conv_out_shape_[2];
    d.w = conv_out_shape_[3];
    d.m = fc_.backward(dfeat);
    d = conv3_->backward(bn3_->backward(relu3_.backward(pool3_.backward(d))));
    d = conv2_->backward(bn2_->backward(relu2_.backward(pool2_.backward(d))));
    return conv1_->backward(bn1_->backward(relu1_.backward(pool1_.backward(d))));
  }

  void collect(std::vector<Param<S>*>& out) override {
    conv1_->collect(out);
    bn1_->collect(out);
    conv2_->collect(out);
    bn2_->collect(out);
    conv3_->collect(out);
    bn3_->collect(out);
    fc_.collect(out);
  }
  void collect_state(StateMap<S>& out) override {
    conv1_->collect_state(out);
    bn1_->collect_state(out);
    conv2_->collect_state(out);
    bn2_->collect_state(out);
    conv3_->collect_state(out);
    bn3_->collect_state(out);
    fc_.collect_state(out);
  }
  long feature_dim() const override { return spec_.feature_dim; }

 private:
  EncoderSpec spec_;
  int c1_, c2_, c3_;
  long flat_dim_;
  std::unique_ptr<Conv2d<S>> conv1_, conv2_, conv3_;
  std::unique_ptr<BatchNorm2d<S>> bn1_, bn2_, bn3_;
  Relu4<S> relu1_, relu2_, relu3_;
  MaxPool2d<S> pool1_, pool2_, pool3_;
  Sequential<S> fc_;
  std::array<int, 4> conv_out_shape_{};
};

template <class S>
std::unique_ptr<Encoder<S>> make_encoder(const EncoderSpec& spec, RngStream& rng) {
  switch (spec.kind) {
    case EncoderKind::kMlpBackbone:
      return std::make_unique<MlpEncoder<S>>(spec, rng);
    case EncoderKind::kResnet18Cifar:
    case EncoderKind::kResnet18Standard:
      return std::make_unique<ResNet18<S>>(spec, rng);
    case EncoderKind::kPhcCnn:
      return std::make_unique<PhcCnn<S>>(spec, rng);
  }
  throw std::invalid_argument("make_encoder: unknown kind");
}

inline std::unique_ptr<DenseLayer<float>> make_norm_f(NormKind, long, RngStream&, bool,
                                                      const std::string&);

template <class S>
std::unique_ptr<DenseLayer<S>> make_norm(NormKind kind, long dim, RngStream& rng,
                                         bool affine, const std::string& name) {
  switch (kind) {
    case NormKind::kBatchNorm:
      return std::make_unique<BatchNorm1d<S>>(dim, rng, affine, name);
    case NormKind::kLayerNorm:
      return std::make_unique<LayerNorm<S>>(dim, rng, affine, name);
    case NormKind::kNone:
      return nullptr;
  }
  return nullptr;
}

template <class S>
Sequential<S> build_projector(const ProjectorSpec& spec, RngStream& rng) {
  Sequential<S> net;
  long in = spec.input_dim;
  for (int i = 0; i < spec.depth - 1; ++i) {
    std::string base = "p1.fc" + std::to_string(i + 1);
    net.add(std::make_unique<Linear<S>>(in, spec.hidden_dim, rng, true, base));
    if (auto n = make_norm<S>(spec.norm, spec.hidden_dim, rng, true,
                              "p1.norm" + std::to_string(i + 1)))
      net.add(std::move(n));
    net.add(std::make_unique<Relu<S>>());
    in = spec.hidden_dim;
  }
  net.add(std::make_unique<Linear<S>>(in, spec.output_dim, rng, true,
                                      "p1.fc" + std::to_string(spec.depth)));
  if (spec.final_norm)
    if (auto n = make_norm<S>(spec.norm, spec.output_dim, rng, spec.final_norm_affine,
                              "p1.norm" + std::to_string(spec.depth)))
      net.add(std::move(n));
  return net;
}

template <class S>
Sequential<S> build_predictor(const PredictorSpec& spec, RngStream& rng) {
  Sequential<S> net;
  long in = spec.input_dim * spec.input_dim_multiplier;
  for (int i = 0; i < spec.depth; ++i) {
    std::string base = "p2.fc" + std::to_string(i + 1);
    net.add(std::make_unique<Linear<S>>(in, spec.hidden_dim, rng, true, base));
    if (auto n = make_norm<S>(spec.norm, spec.hidden_dim, rng, true,
                              "p2.norm" + std::to_string(i + 1)))
      net.add(std::move(n));
    bool last_block = i == spec.depth - 1;
    if (!(last_block && spec.drop_last_relu)) net.add(std::make_unique<Relu<S>>());
    in = spec.hidden_dim;
  }
  net.add(std::make_unique<Linear<S>>(in, spec.num_outputs, rng, spec.head_bias, "p2.head"));
  return net;
}

/// SimSiam's bottleneck prediction head over projector outputs; its
/// parameters keep a constant learning rate.
template <class S>
Sequential<S> build_simsiam_head(long dim, long bottleneck, RngStream& rng) {
  Sequential<S> net;
  net.add(std::make_unique<Linear<S>>(dim, bottleneck, rng, true, "h.fc1"));
  net.add(std::make_unique<BatchNorm1d<S>>(bottleneck, rng, true, "h.bn1"));
  net.add(std::make_unique<Relu<S>>());
  net.add(std::make_unique<Linear<S>>(bottleneck, dim, rng, true, "h.fc2"));
  std::vector<Param<S>*> ps;
  net.collect(ps);
  for (auto* p : ps) p->fixed_lr = true;
  return net;
}

/// Dense head mapping representations to the 400-bin regression target.
template <class S>
Sequential<S> build_regression_head(long input_dim, long h1, long h2, long out,
                                    RngStream& rng) {
  Sequential<S> net;
  net.add(std::make_unique<Linear<S>>(input_dim, h1, rng, true, "dos.fc1"));
  net.add(std::make_unique<Relu<S>>());
  net.add(std::make_unique<Linear<S>>(h1, h1, rng, true, "dos.fc2"));
  net.add(std::make_unique<Relu<S>>());
  net.add(std::make_unique<Linear<S>>(h1, h2, rng, true, "dos.fc3"));
  net.add(std::make_unique<Relu<S>>());
  net.add(std::make_unique<Linear<S>>(h2, out, rng, true, "dos.fc4"));
  return net;
}

/// Splits a representation batch into equal halves; concatenation restores it.
template <class S>
std::pair<Mat<S>, Mat<S>> split_representation(const Mat<S>& r) {
  if (r.cols() % 2 != 0)
    throw std::invalid_argument("split_representation: feature dim must be even");
  long half = r.cols() / 2;
  return {r.leftCols(half), r.rightCols(half)};
}

struct BundleSpec {
  EncoderSpec encoder;
  ProjectorSpec projector;
  PredictorSpec predictor;
  /// Disentangled routing: the first feature half feeds the invariance
  /// projector, the second half feeds the equivariance predictor. The head
  /// input dims must be set to feature_dim/2 accordingly.
  bool disentangled = false;
  bool simsiam_head = false;
  long simsiam_bottleneck = 512;
  bool regression_head = false;
  long reg_h1 = 1024, reg_h2 = 512, reg_out = 400;

  std::string describe() const;
};

/// Encoder f, invariance projector p1, equivariance predictor p2 and the
/// optional extra heads, built together from one init stream.
template <class S>
struct ModelBundle {
  BundleSpec spec;
  std::unique_ptr<Encoder<S>> f;
  Sequential<S> p1;
  Sequential<S> p2;
  std::optional<Sequential<S>> simsiam_head;
  std::optional<Sequential<S>> dos_head;

  static ModelBundle build(const BundleSpec& spec, RngStream& rng) {
    ModelBundle b;
    b.spec = spec;
    b.f = make_encoder<S>(spec.encoder, rng);
    b.p1 = build_projector<S>(spec.projector, rng);
    b.p2 = build_predictor<S>(spec.predictor, rng);
    if (spec.simsiam_head)
      b.simsiam_head =
          build_simsiam_head<S>(spec.projector.output_dim, spec.simsiam_bottleneck, rng);
    if (spec.regression_head)
      b.dos_head = build_regression_head<S>(spec.encoder.feature_dim, spec.reg_h1,
                                            spec.reg_h2, spec.reg_out, rng);
    return b;
  }

  /// Logits (or scalar estimates) for the transformation applied to the
  /// views behind r; r2 must be present exactly in relative mode.
  Mat<S> predict_transform(const Mat<S>& r, const Mat<S>* r2, bool train) {
    if (spec.predictor.input_dim_multiplier == 2) {
      if (!r2)
        throw std::invalid_argument("predict_transform: relative mode needs a second batch");
      Mat<S> cat(r.rows(), r.cols() + r2->cols());
      cat << r, *r2;
      return p2.forward(cat, train);
    }
    if (r2) throw std::invalid_argument("predict_transform: unexpected second batch");
    return p2.forward(r, train);
  }

  void collect(std::vector<Param<S>*>& out) {
    f->collect(out);
    p1.collect(out);
    p2.collect(out);
    if (simsiam_head) simsiam_head->collect(out);
    if (dos_head) dos_head->collect(out);
  }

  /// Parameters optimized during self-supervised pretraining (the unused
  /// regression head is excluded so it sees neither updates nor decay).
  void collect_pretrain(std::vector<Param<S>*>& out) {
    f->collect(out);
    p1.collect(out);
    p2.collect(out);
    if (simsiam_head) simsiam_head->collect(out);
  }

  /// Parameters optimized during regression fine-tuning.
  void collect_finetune(std::vector<Param<S>*>& out, bool frozen_backbone) {
    if (!dos_head)
      throw std::invalid_argument("collect_finetune: bundle has no regression head");
    if (!frozen_backbone) f->collect(out);
    dos_head->collect(out);
  }
  void collect_state(StateMap<S>& out) {
    f->collect_state(out);
    p1.collect_state(out);
    p2.collect_state(out);
    if (simsiam_head) simsiam_head->collect_state(out);
    if (dos_head) dos_head->collect_state(out);
  }

  long param_count() {
    std::vector<Param<S>*> ps;
    collect(ps);
    long n = 0;
    for (auto* p : ps) n += p->count();
    return n;
  }
  long encoder_param_count() {
    std::vector<Param<S>*> ps;
    f->collect(ps);
    long n = 0;
    for (auto* p : ps) n += p->count();
    return n;
  }
  void zero_grad() {
    std::vector<Param<S>*> ps;
    collect(ps);
    for (auto* p : ps) p->zero_grad();
  }
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary container of named tensors plus the spec
// text that produced them; loading refuses on any spec mismatch.
// ---------------------------------------------------------------------------

namespace detail {
void write_checkpoint_raw(const std::string& path, const std::string& spec_text,
                          int scalar_bytes,
                          const std::vector<std::tuple<std::string, long, long, const void*>>& tensors);
void read_checkpoint_raw(const std::string& path, const std::string& expected_spec,
                         int scalar_bytes,
                         const std::function<void(const std::string&, long, long, const void*)>& sink);
}  // namespace detail

template <class S>
void save_checkpoint(const std::string& path, ModelBundle<S>& bundle) {
  StateMap<S> state;
  bundle.collect_state(state);
  std::vector<std::tuple<std::string, long, long, const void*>> tensors;
  tensors.reserve(state.size());
  for (auto& [name, mat] : state)
    tensors.emplace_back(name, mat->rows(), mat->cols(), mat->data());
  detail::write_checkpoint_raw(path, bundle.spec.describe(), sizeof(S), tensors);
}

template <class S>
void load_checkpoint(const std::string& path, ModelBundle<S>& bundle) {
  StateMap<S> state;
  bundle.collect_state(state);
  std::map<std::string, Mat<S>*> by_name;
  for (auto& [name, mat] : state) by_name[name] = mat;
  size_t loaded = 0;
  detail::read_checkpoint_raw(
      path, bundle.spec.describe(), sizeof(S),
      [&](const std::string& name, long rows, long cols, const void* data) {
        auto it = by_name.find(name);
        if (it == by_name.end())
          throw std::runtime_error("checkpoint: unknown tensor " + name);
        if (it->second->rows() != rows || it->second->cols() != cols)
          throw std::runtime_error("checkpoint: shape mismatch for " + name);
        std::memcpy(it->second->data(), data, sizeof(S) * rows * cols);
        ++loaded;
      });
  if (loaded != by_name.size())
    throw std::runtime_error("checkpoint: tensor count mismatch");
}

}  // namespace essl::nn
