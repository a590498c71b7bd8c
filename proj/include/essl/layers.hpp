#pragma once

#include <memory>
#include <string>
#include <vector>

#include "essl/core.hpp"

namespace essl::nn {

template <class S>
struct Param {
  Mat<S> value;
  Mat<S> grad;
  std::string name;
  bool fixed_lr = false;  // exempt from cosine decay (SimSiam head)

  void zero_grad() { grad.setZero(); }
  long count() const { return value.size(); }
};

/// 4-D activation batch stored as one row per sample, CHW flattened.
template <class S>
struct Batch4 {
  int n = 0, c = 0, h = 0, w = 0;
  Mat<S> m;

  Batch4() = default;
  Batch4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), m(Mat<S>::Zero(n_, static_cast<long>(c_) * h_ * w_)) {}
  long feat() const { return static_cast<long>(c) * h * w; }
};

inline void he_fill(auto& mat, double fan_in, RngStream& rng) {
  double stddev = std::sqrt(2.0 / fan_in);
  for (long i = 0; i < mat.rows(); ++i)
    for (long j = 0; j < mat.cols(); ++j)
      mat(i, j) = static_cast<std::decay_t<decltype(mat(0, 0))>>(rng.normal(0.0, stddev));
}

// ---------------------------------------------------------------------------
// Dense layers operating on (N, D) matrices.
// ---------------------------------------------------------------------------

/// Named tensors that belong in a checkpoint: parameters plus
/// non-trainable state such as normalization running statistics.
template <class S>
using StateMap = std::vector<std::pair<std::string, Mat<S>*>>;

template <class S>
class DenseLayer {
 public:
  virtual ~DenseLayer() = default;
  virtual Mat<S> forward(const Mat<S>& x, bool train) = 0;
  virtual Mat<S> backward(const Mat<S>& dy) = 0;
  virtual void collect(std::vector<Param<S>*>& out) {}
  virtual void collect_state(StateMap<S>& out) {
    std::vector<Param<S>*> ps;
    collect(ps);
    for (auto* p : ps) out.emplace_back(p->name, &p->value);
  }
  virtual long out_dim(long in_dim) const { return in_dim; }
};

template <class S>
class Linear : public DenseLayer<S> {
 public:
  Linear(long in, long out, RngStream& rng, bool bias = true,
         const std::string& name = "linear")
      : in_(in), out_(out), has_bias_(bias) {
    weight_.value.resize(out, in);
    he_fill(weight_.value, static_cast<double>(in), rng);
    weight_.grad = Mat<S>::Zero(out, in);
    weight_.name = name + ".weight";
    if (has_bias_) {
      bias_.value = Mat<S>::Zero(1, out);
      bias_.grad = Mat<S>::Zero(1, out);
      bias_.name = name + ".bias";
    }
  }

  Mat<S> forward(const Mat<S>& x, bool) override {
    if (x.cols() != in_)
      throw std::invalid_argument("Linear: input dim " + std::to_string(x.cols()) +
                                  " != " + std::to_string(in_));
    x_ = x;
    Mat<S> y = x * weight_.value.transpose();
    if (has_bias_) y.rowwise() += bias_.value.row(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) override {
    weight_.grad.noalias() += dy.transpose() * x_;
    if (has_bias_) bias_.grad.row(0) += dy.colwise().sum();
    return dy * weight_.value;
  }

  void collect(std::vector<Param<S>*>& out) override {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }
  long out_dim(long) const override { return out_; }

  Param<S>& weight() { return weight_; }
  Param<S>& bias() { return bias_; }

 private:
  long in_, out_;
  bool has_bias_;
  Param<S> weight_, bias_;
  Mat<S> x_;
};

template <class S>
class Relu : public DenseLayer<S> {
 public:
  Mat<S> forward(const Mat<S>& x, bool) override {
    mask_ = (x.array() > S(0)).template cast<S>();
    return x.cwiseMax(S(0));
  }
  Mat<S> backward(const Mat<S>& dy) override { return dy.cwiseProduct(mask_); }

 private:
  Mat<S> mask_;
};

template <class S>
class BatchNorm1d : public DenseLayer<S> {
 public:
  BatchNorm1d(long dim, RngStream&, bool affine = true,
              const std::string& name = "bn", double momentum = 0.1,
              double eps = 1e-5)
      : dim_(dim), affine_(affine), name_(name), momentum_(S(momentum)), eps_(S(eps)) {
    running_mean_ = Mat<S>::Zero(1, dim);
    running_var_ = Mat<S>::Ones(1, dim);
    if (affine_) {
      gamma_.value = Mat<S>::Ones(1, dim);
      gamma_.grad = Mat<S>::Zero(1, dim);
      gamma_.name = name + ".weight";
      beta_.value = Mat<S>::Zero(1, dim);
      beta_.grad = Mat<S>::Zero(1, dim);
      beta_.name = name + ".bias";
    }
  }

  Mat<S> forward(const Mat<S>& x, bool train) override {
    if (x.cols() != dim_) throw std::invalid_argument("BatchNorm1d: dim mismatch");
    const long n = x.rows();
    if (train) {
      if (n < 2) throw std::invalid_argument("BatchNorm1d: batch too small");
      mean_ = x.colwise().mean();
      Mat<S> centered = x.rowwise() - mean_.row(0);
      var_ = centered.array().square().colwise().mean();
      inv_std_ = (var_.array() + eps_).rsqrt();
      xhat_ = centered.array().rowwise() * inv_std_.row(0).array();
      running_mean_ = (S(1) - momentum_) * running_mean_ + momentum_ * mean_;
      // Unbiased variance for the running estimate.
      Mat<S> unbiased = var_ * (static_cast<S>(n) / static_cast<S>(n - 1));
      running_var_ = (S(1) - momentum_) * running_var_ + momentum_ * unbiased;
    } else {
      inv_std_ = (running_var_.array() + eps_).rsqrt();
      xhat_ = (x.rowwise() - running_mean_.row(0)).array().rowwise() *
              inv_std_.row(0).array();
    }
    train_ = train;
    if (!affine_) return xhat_;
    Mat<S> y = xhat_.array().rowwise() * gamma_.value.row(0).array();
    y.rowwise() += beta_.value.row(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) override {
    Mat<S> dxhat = dy;
    if (affine_) {
      gamma_.grad.row(0) += (dy.array() * xhat_.array()).colwise().sum().matrix();
      beta_.grad.row(0) += dy.colwise().sum();
      dxhat = dy.array().rowwise() * gamma_.value.row(0).array();
    }
    if (!train_)
      return dxhat.array().rowwise() * inv_std_.row(0).array();
    const S n = static_cast<S>(dy.rows());
    Mat<S> sum_dxhat = dxhat.colwise().sum();
    Mat<S> sum_dxhat_xhat = (dxhat.array() * xhat_.array()).colwise().sum().matrix();
    Mat<S> dx = dxhat * n;
    dx.rowwise() -= sum_dxhat.row(0);
    dx -= (xhat_.array().rowwise() * sum_dxhat_xhat.row(0).array()).matrix();
    dx = dx.array().rowwise() * inv_std_.row(0).array() / n;
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) override {
    if (affine_) {
      out.push_back(&gamma_);
      out.push_back(&beta_);
    }
  }

  void collect_state(StateMap<S>& out) override {
    DenseLayer<S>::collect_state(out);
    out.emplace_back(name_ + ".running_mean", &running_mean_);
    out.emplace_back(name_ + ".running_var", &running_var_);
  }

  Mat<S>& running_mean() { return running_mean_; }
  Mat<S>& running_var() { return running_var_; }

 private:
  long dim_;
  bool affine_, train_ = true;
  std::string name_;
  S momentum_, eps_;
  Param<S> gamma_, beta_;
  Mat<S> running_mean_, running_var_;
  Mat<S> mean_, var_, inv_std_, xhat_;
};

template <class S>
class LayerNorm : public DenseLayer<S> {
 public:
  LayerNorm(long dim, RngStream&, bool affine = true,
            const std::string& name = "ln", double eps = 1e-5)
      : dim_(dim), affine_(affine), eps_(S(eps)) {
    if (affine_) {
      gamma_.value = Mat<S>::Ones(1, dim);
      gamma_.grad = Mat<S>::Zero(1, dim);
      gamma_.name = name + ".weight";
      beta_.value = Mat<S>::Zero(1, dim);
      beta_.grad = Mat<S>::Zero(1, dim);
      beta_.name = name + ".bias";
    }
  }

  Mat<S> forward(const Mat<S>& x, bool) override {
    if (x.cols() != dim_) throw std::invalid_argument("LayerNorm: dim mismatch");
    Vec<S> mean = x.rowwise().mean();
    Mat<S> centered = x.colwise() - mean;
    Vec<S> var = centered.array().square().rowwise().mean();
    inv_std_ = (var.array() + eps_).rsqrt();
    xhat_ = centered.array().colwise() * inv_std_.array();
    if (!affine_) return xhat_;
    Mat<S> y = xhat_.array().rowwise() * gamma_.value.row(0).array();
    y.rowwise() += beta_.value.row(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) override {
    Mat<S> dxhat = dy;
    if (affine_) {
      gamma_.grad.row(0) += (dy.array() * xhat_.array()).colwise().sum().matrix();
      beta_.grad.row(0) += dy.colwise().sum();
      dxhat = dy.array().rowwise() * gamma_.value.row(0).array();
    }
    const S d = static_cast<S>(dim_);
    Vec<S> mean_dxhat = dxhat.rowwise().mean();
    Vec<S> mean_dxhat_xhat = (dxhat.array() * xhat_.array()).rowwise().mean();
    Mat<S> dx = dxhat.colwise() - mean_dxhat;
    dx -= (xhat_.array().colwise() * mean_dxhat_xhat.array()).matrix();
    dx = dx.array().colwise() * inv_std_.array();
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) override {
    if (affine_) {
      out.push_back(&gamma_);
      out.push_back(&beta_);
    }
  }

 private:
  long dim_;
  bool affine_;
  S eps_;
  Param<S> gamma_, beta_;
  Vec<S> inv_std_;
  Mat<S> xhat_;
};

template <class S>
class Sequential {
 public:
  void add(std::unique_ptr<DenseLayer<S>> layer) { layers_.push_back(std::move(layer)); }

  Mat<S> forward(const Mat<S>& x, bool train) {
    Mat<S> y = x;
    for (auto& l : layers_) y = l->forward(y, train);
    return y;
  }
  Mat<S> backward(const Mat<S>& dy) {
    Mat<S> g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }
  void collect(std::vector<Param<S>*>& out) {
    for (auto& l : layers_) l->collect(out);
  }
  void collect_state(StateMap<S>& out) {
    for (auto& l : layers_) l->collect_state(out);
  }
  size_t size() const { return layers_.size(); }
  DenseLayer<S>* at(size_t i) { return layers_[i].get(); }

 private:
  std::vector<std::unique_ptr<DenseLayer<S>>> layers_;
};

// ---------------------------------------------------------------------------
// Convolutional layers operating on Batch4.
// ---------------------------------------------------------------------------

template <class S>
class Conv2d {
 public:
  Conv2d(int in_c, int out_c, int k, int stride, int pad, RngStream& rng,
         bool bias = false, const std::string& name = "conv")
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad),
        has_bias_(bias) {
    weight_.value.resize(out_c, static_cast<long>(in_c) * k * k);
    he_fill(weight_.value, static_cast<double>(in_c) * k * k, rng);
    weight_.grad = Mat<S>::Zero(weight_.value.rows(), weight_.value.cols());
    weight_.name = name + ".weight";
    if (has_bias_) {
      bias_.value = Mat<S>::Zero(1, out_c);
      bias_.grad = Mat<S>::Zero(1, out_c);
      bias_.name = name + ".bias";
    }
  }

  int out_h(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }
  int out_w(int w) const { return (w + 2 * pad_ - k_) / stride_ + 1; }

  Batch4<S> forward(const Batch4<S>& x, bool) {
    if (x.c != in_c_) throw std::invalid_argument("Conv2d: channel mismatch");
    x_ = x;
    const int oh = out_h(x.h), ow = out_w(x.w);
    Batch4<S> y(x.n, out_c_, oh, ow);
    const long cols = static_cast<long>(oh) * ow;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < x.n; ++s) {
      Mat<S> col = im2col(x, s, oh, ow);
      Mat<S> out = weight_.value * col;  // (out_c, oh*ow)
      if (has_bias_) out.colwise() += bias_.value.row(0).transpose();
      for (int c = 0; c < out_c_; ++c)
        y.m.block(s, static_cast<long>(c) * cols, 1, cols) = out.row(c);
    }
    return y;
  }

  Batch4<S> backward(const Batch4<S>& dy) {
    const int oh = dy.h, ow = dy.w;
    const long cols = static_cast<long>(oh) * ow;
    Batch4<S> dx(x_.n, x_.c, x_.h, x_.w);
#pragma omp parallel
    {
      Mat<S> dw_local = Mat<S>::Zero(weight_.value.rows(), weight_.value.cols());
      Mat<S> db_local = has_bias_ ? Mat<S>::Zero(1, out_c_) : Mat<S>();
#pragma omp for schedule(static)
      for (int s = 0; s < x_.n; ++s) {
        Mat<S> dout(out_c_, cols);
        for (int c = 0; c < out_c_; ++c)
          dout.row(c) = dy.m.block(s, static_cast<long>(c) * cols, 1, cols);
        Mat<S> col = im2col(x_, s, oh, ow);
        dw_local.noalias() += dout * col.transpose();
        if (has_bias_) db_local.row(0) += dout.rowwise().sum().transpose();
        Mat<S> dcol = weight_.value.transpose() * dout;
        col2im(dcol, dx, s, oh, ow);
      }
#pragma omp critical
      {
        weight_.grad += dw_local;
        if (has_bias_) bias_.grad += db_local;
      }
    }
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }
  void collect_state(StateMap<S>& out) {
    out.emplace_back(weight_.name, &weight_.value);
    if (has_bias_) out.emplace_back(bias_.name, &bias_.value);
  }

  Param<S>& weight() { return weight_; }

 private:
  Mat<S> im2col(const Batch4<S>& x, int s, int oh, int ow) const {
    Mat<S> col(static_cast<long>(in_c_) * k_ * k_, static_cast<long>(oh) * ow);
    const S* base = x.m.row(s).data();
    for (int c = 0; c < in_c_; ++c)
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          long r = (static_cast<long>(c) * k_ + ki) * k_ + kj;
          for (int i = 0; i < oh; ++i) {
            int yy = i * stride_ + ki - pad_;
            for (int j = 0; j < ow; ++j) {
              int xx = j * stride_ + kj - pad_;
              S v = (yy < 0 || yy >= x.h || xx < 0 || xx >= x.w)
                        ? S(0)
                        : base[(static_cast<long>(c) * x.h + yy) * x.w + xx];
              col(r, static_cast<long>(i) * ow + j) = v;
            }
          }
        }
    return col;
  }

  void col2im(const Mat<S>& dcol, Batch4<S>& dx, int s, int oh, int ow) const {
    S* base = dx.m.row(s).data();
    for (int c = 0; c < in_c_; ++c)
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          long r = (static_cast<long>(c) * k_ + ki) * k_ + kj;
          for (int i = 0; i < oh; ++i) {
            int yy = i * stride_ + ki - pad_;
            if (yy < 0 || yy >= dx.h) continue;
            for (int j = 0; j < ow; ++j) {
              int xx = j * stride_ + kj - pad_;
              if (xx < 0 || xx >= dx.w) continue;
              base[(static_cast<long>(c) * dx.h + yy) * dx.w + xx] +=
                  dcol(r, static_cast<long>(i) * ow + j);
            }
          }
        }
  }

  int in_c_, out_c_, k_, stride_, pad_;
  bool has_bias_;
  Param<S> weight_, bias_;
  Batch4<S> x_;
};

template <class S>
class BatchNorm2d {
 public:
  BatchNorm2d(int channels, const std::string& name = "bn2d",
              double momentum = 0.1, double eps = 1e-5)
      : c_(channels), name_(name), momentum_(S(momentum)), eps_(S(eps)) {
    gamma_.value = Mat<S>::Ones(1, channels);
    gamma_.grad = Mat<S>::Zero(1, channels);
    gamma_.name = name + ".weight";
    beta_.value = Mat<S>::Zero(1, channels);
    beta_.grad = Mat<S>::Zero(1, channels);
    beta_.name = name + ".bias";
    running_mean_ = Mat<S>::Zero(1, channels);
    running_var_ = Mat<S>::Ones(1, channels);
  }

  Batch4<S> forward(const Batch4<S>& x, bool train) {
    if (x.c != c_) throw std::invalid_argument("BatchNorm2d: channel mismatch");
    const long plane = static_cast<long>(x.h) * x.w;
    const long count = static_cast<long>(x.n) * plane;
    train_ = train;
    x_ = x;
    mean_.resize(c_);
    inv_std_.resize(c_);
    Batch4<S> y(x.n, x.c, x.h, x.w);
    for (int c = 0; c < c_; ++c) {
      S mean, var;
      if (train) {
        if (count < 2) throw std::invalid_argument("BatchNorm2d: batch too small");
        double acc = 0.0;
        for (int s = 0; s < x.n; ++s)
          acc += x.m.row(s).segment(c * plane, plane).template cast<double>().sum();
        mean = static_cast<S>(acc / count);
        double vacc = 0.0;
        for (int s = 0; s < x.n; ++s)
          vacc += (x.m.row(s).segment(c * plane, plane).array() - mean)
                      .square()
                      .template cast<double>()
                      .sum();
        var = static_cast<S>(vacc / count);
        running_mean_(0, c) = (S(1) - momentum_) * running_mean_(0, c) + momentum_ * mean;
        S unbiased = var * static_cast<S>(count) / static_cast<S>(count - 1);
        running_var_(0, c) = (S(1) - momentum_) * running_var_(0, c) + momentum_ * unbiased;
      } else {
        mean = running_mean_(0, c);
        var = running_var_(0, c);
      }
      S istd = S(1) / std::sqrt(var + eps_);
      mean_[c] = mean;
      inv_std_[c] = istd;
      S g = gamma_.value(0, c), b = beta_.value(0, c);
      for (int s = 0; s < x.n; ++s)
        y.m.row(s).segment(c * plane, plane) =
            ((x.m.row(s).segment(c * plane, plane).array() - mean) * istd * g + b);
    }
    return y;
  }

  Batch4<S> backward(const Batch4<S>& dy) {
    const long plane = static_cast<long>(x_.h) * x_.w;
    const long count = static_cast<long>(x_.n) * plane;
    Batch4<S> dx(x_.n, x_.c, x_.h, x_.w);
    for (int c = 0; c < c_; ++c) {
      S istd = inv_std_[c], mean = mean_[c], g = gamma_.value(0, c);
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int s = 0; s < x_.n; ++s) {
        auto dyseg = dy.m.row(s).segment(c * plane, plane).array();
        auto xhat = (x_.m.row(s).segment(c * plane, plane).array() - mean) * istd;
        sum_dy += dyseg.template cast<double>().sum();
        sum_dy_xhat += (dyseg * xhat).template cast<double>().sum();
      }
      gamma_.grad(0, c) += static_cast<S>(sum_dy_xhat);
      beta_.grad(0, c) += static_cast<S>(sum_dy);
      if (!train_) {
        for (int s = 0; s < x_.n; ++s)
          dx.m.row(s).segment(c * plane, plane) =
              dy.m.row(s).segment(c * plane, plane) * (g * istd);
        continue;
      }
      S mdy = static_cast<S>(sum_dy / count);
      S mdyx = static_cast<S>(sum_dy_xhat / count);
      for (int s = 0; s < x_.n; ++s) {
        auto dyseg = dy.m.row(s).segment(c * plane, plane).array();
        auto xhat = (x_.m.row(s).segment(c * plane, plane).array() - mean) * istd;
        dx.m.row(s).segment(c * plane, plane) =
            ((dyseg - mdy - xhat * mdyx) * g * istd).matrix();
      }
    }
    return dx;
  }

  void collect(std::vector<Param<S>*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void collect_state(StateMap<S>& out) {
    out.emplace_back(gamma_.name, &gamma_.value);
    out.emplace_back(beta_.name, &beta_.value);
    out.emplace_back(name_ + ".running_mean", &running_mean_);
    out.emplace_back(name_ + ".running_var", &running_var_);
  }

  Param<S>& gamma() { return gamma_; }

 private:
  int c_;
  std::string name_;
  S momentum_, eps_;
  bool train_ = true;
  Param<S> gamma_, beta_;
  Mat<S> running_mean_, running_var_;
  std::vector<S> mean_, inv_std_;
  Batch4<S> x_;
};

template <class S>
class Relu4 {
 public:
  Batch4<S> forward(const Batch4<S>& x, bool) {
    mask_ = (x.m.array() > S(0)).template cast<S>();
    Batch4<S> y = x;
    y.m = x.m.cwiseMax(S(0));
    return y;
  }
  Batch4<S> backward(const Batch4<S>& dy) {
    Batch4<S> dx = dy;
    dx.m = dy.m.cwiseProduct(mask_);
    return dx;
  }

 private:
  Mat<S> mask_;
};

template <class S>
class MaxPool2d {
 public:
  explicit MaxPool2d(int k = 2, int stride = 2, int pad = 0)
      : k_(k), stride_(stride), pad_(pad) {}

  Batch4<S> forward(const Batch4<S>& x, bool) {
    in_h_ = x.h;
    in_w_ = x.w;
    const int oh = (x.h + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (x.w + 2 * pad_ - k_) / stride_ + 1;
    Batch4<S> y(x.n, x.c, oh, ow);
    argmax_.resize(static_cast<size_t>(x.n) * x.c * oh * ow);
    const long plane_in = static_cast<long>(x.h) * x.w;
    const long plane_out = static_cast<long>(oh) * ow;
    for (int s = 0; s < x.n; ++s)
      for (int c = 0; c < x.c; ++c)
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) {
            S best = std::numeric_limits<S>::lowest();
            long best_idx = -1;
            for (int ki = 0; ki < k_; ++ki) {
              int yy = i * stride_ + ki - pad_;
              if (yy < 0 || yy >= x.h) continue;
              for (int kj = 0; kj < k_; ++kj) {
                int xx = j * stride_ + kj - pad_;
                if (xx < 0 || xx >= x.w) continue;
                long idx = static_cast<long>(c) * plane_in + static_cast<long>(yy) * x.w + xx;
                S v = x.m(s, idx);
                if (v > best) {
                  best = v;
                  best_idx = idx;
                }
              }
            }
            y.m(s, static_cast<long>(c) * plane_out + static_cast<long>(i) * ow + j) = best;
            argmax_[((static_cast<size_t>(s) * x.c + c) * oh + i) * ow + j] = best_idx;
          }
    return y;
  }

  Batch4<S> backward(const Batch4<S>& dy) {
    Batch4<S> dx(dy.n, dy.c, in_h_, in_w_);
    const long plane_out = static_cast<long>(dy.h) * dy.w;
    for (int s = 0; s < dy.n; ++s)
      for (int c = 0; c < dy.c; ++c)
        for (int i = 0; i < dy.h; ++i)
          for (int j = 0; j < dy.w; ++j) {
            long idx = argmax_[((static_cast<size_t>(s) * dy.c + c) * dy.h + i) * dy.w + j];
            if (idx < 0) continue;
            dx.m(s, idx) +=
                dy.m(s, static_cast<long>(c) * plane_out + static_cast<long>(i) * dy.w + j);
          }
    return dx;
  }

 private:
  int k_, stride_, pad_, in_h_ = 0, in_w_ = 0;
  std::vector<long> argmax_;
};

/// Global average pool: (N, C, H, W) -> (N, C).
template <class S>
class GlobalAvgPool {
 public:
  Mat<S> forward(const Batch4<S>& x, bool) {
    c_ = x.c;
    h_ = x.h;
    w_ = x.w;
    const long plane = static_cast<long>(x.h) * x.w;
    Mat<S> y(x.n, x.c);
    for (int s = 0; s < x.n; ++s)
      for (int c = 0; c < x.c; ++c)
        y(s, c) = x.m.row(s).segment(c * plane, plane).mean();
    return y;
  }
  Batch4<S> backward(const Mat<S>& dy) {
    Batch4<S> dx(static_cast<int>(dy.rows()), c_, h_, w_);
    const long plane = static_cast<long>(h_) * w_;
    const S scale = S(1) / static_cast<S>(plane);
    for (long s = 0; s < dy.rows(); ++s)
      for (int c = 0; c < c_; ++c)
        dx.m.row(s).segment(c * plane, plane).setConstant(dy(s, c) * scale);
    return dx;
  }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
};

}  // namespace essl::nn
