#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <set>

#include "essl/augment.hpp"
#include "essl/datasets.hpp"
#include "essl/models.hpp"
#include "essl/objectives.hpp"

namespace essl::train {

enum class Ablation {
  kNone,
  kSingleRandomRotation,
  kLinearPredictor,
  kNoSslAugOnEquivViews,
  kDisentangled,
  kInsensitiveInstead,
  kLargeCropSingle,
};

std::string to_string(Ablation a);
std::optional<Ablation> ablation_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 800;
  int batch_size = 512;
  double base_lr = 0.06;
  int warmup_epochs = 10;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  uint64_t seed = 0;
  Ablation ablation = Ablation::kNone;

  static TrainConfig cifar_essl() { return {}; }  // paper values above
  static TrainConfig cifar_baseline() {
    TrainConfig c;
    c.base_lr = 0.03;
    return c;
  }
};

/// Linear warmup from zero to base_lr over the warmup span, then cosine
/// decay reaching zero at the final step boundary.
inline double lr_at(long step, double base_lr, long warmup_steps, long total_steps) {
  if (step < 0) throw std::invalid_argument("lr_at: negative step");
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return base_lr;
  double t = static_cast<double>(step - warmup_steps) /
             static_cast<double>(total_steps - warmup_steps);
  t = std::min(t, 1.0);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * t));
}

// ---------------------------------------------------------------------------
// View batches.
// ---------------------------------------------------------------------------

/// The per-step view collection: two large invariance views per record and
/// the transformed equivariance views with their group-element labels,
/// ordered in label blocks ([0]*N + [1]*N + ...).
template <class S>
struct ViewBatch {
  nn::Batch4<S> large_a, large_b;
  nn::Batch4<S> small_views;
  std::vector<int> labels;          // finite-group class labels
  Mat<S> real_labels;               // (kN,1) scale factors, scaling group
  std::vector<int> source_indices;  // small-view row -> record index
  int rows_per_record = 0;          // k for finite groups, 1 otherwise
  bool has_equivariance = false;
  bool relative_pairs = false;  // small_views rows: [v; T(v)] halves
};

struct ViewRngs {
  RngStream& aug_large;
  RngStream& aug_small;
  RngStream& group_sample;
};

struct BatchBuildConfig {
  int large_size = 32;
  int small_size = 16;
  std::pair<double, double> small_crop_scale = {0.2, 1.0};
  double s_max = 10.0;
  bool gpm_binary = false;    // rotations mapped to the two mirror classes
  bool relative_mode = false;
  bool build_equivariance = true;
  Ablation ablation = Ablation::kNone;

  // Input normalization applied after augmentation, per channel.
  std::vector<float> norm_mean = {0.f, 0.f, 0.f};
  std::vector<float> norm_std = {1.f, 1.f, 1.f};

  // Permittivity-cell pipeline: invariance views use physical ops instead
  // of the photometric ladder.
  bool cell_mode = false;
  CellAugmentOptions cell_augment;
};

namespace detail {

template <class S>
void fill_row(nn::Batch4<S>& b, int row, const Image& img,
              const std::vector<float>& mean, const std::vector<float>& std) {
  for (int c = 0; c < img.c; ++c) {
    float m = c < static_cast<int>(mean.size()) ? mean[c] : 0.f;
    float sd = c < static_cast<int>(std.size()) ? std[c] : 1.f;
    const long off = static_cast<long>(c) * img.h * img.w;
    for (long k = 0; k < static_cast<long>(img.h) * img.w; ++k)
      b.m(row, off + k) = static_cast<S>((img.data[off + k] - m) / sd);
  }
}

inline Image make_invariance_view(const Image& x, const AugmentationPolicy& policy,
                                  const BatchBuildConfig& bc, RngStream& rng) {
  return bc.cell_mode ? augment_cell(x, bc.cell_augment, rng) : augment(x, policy, rng);
}

inline Image make_equivariance_base(const Image& x, const AugmentationPolicy& policy,
                                    const BatchBuildConfig& bc, bool full_size,
                                    RngStream& rng) {
  if (bc.cell_mode) {
    if (bc.ablation == Ablation::kNoSslAugOnEquivViews) return x;
    return augment_cell(x, bc.cell_augment, rng);
  }
  int size = full_size ? bc.large_size : bc.small_size;
  if (bc.ablation == Ablation::kNoSslAugOnEquivViews)
    return resize_bilinear(x, size, size);
  AugmentationPolicy small = policy;
  small.crop_size = size;
  if (!full_size) small.crop_scale = bc.small_crop_scale;
  return augment(x, small, rng);
}

}  // namespace detail

/// Builds the E-SSL step batch: two independently augmented large views per
/// record plus equivariance views (one augmented base per record, carrying
/// the group elements as label blocks or real scale labels).
template <class S>
ViewBatch<S> build_essl_batch(const std::vector<const Image*>& records,
                              const TransformationGroup& grp,
                              const AugmentationPolicy& policy,
                              const BatchBuildConfig& bc, ViewRngs rngs) {
  if (records.empty()) throw std::invalid_argument("build_essl_batch: empty batch");
  const int n = static_cast<int>(records.size());
  const Image& first = *records[0];

  ViewBatch<S> out;
  const int ls = bc.cell_mode ? first.h : bc.large_size;
  out.large_a = nn::Batch4<S>(n, first.c, ls, ls);
  out.large_b = nn::Batch4<S>(n, first.c, ls, ls);
  for (int i = 0; i < n; ++i) {
    detail::fill_row(out.large_a, i,
                     detail::make_invariance_view(*records[i], policy, bc, rngs.aug_large),
                     bc.norm_mean, bc.norm_std);
    detail::fill_row(out.large_b, i,
                     detail::make_invariance_view(*records[i], policy, bc, rngs.aug_large),
                     bc.norm_mean, bc.norm_std);
  }

  if (!bc.build_equivariance || bc.ablation == Ablation::kInsensitiveInstead) {
    out.has_equivariance = false;
    return out;
  }
  out.has_equivariance = true;

  const bool full_size = bc.cell_mode || bc.ablation == Ablation::kLargeCropSingle;
  std::vector<Image> bases;
  bases.reserve(n);
  for (int i = 0; i < n; ++i)
    bases.push_back(detail::make_equivariance_base(*records[i], policy, bc, full_size,
                                                   rngs.aug_small));
  const int ss = bases[0].h;

  if (grp.name == GroupName::kScaling) {
    out.rows_per_record = 1;
    out.small_views = nn::Batch4<S>(n, first.c, ss, ss);
    out.real_labels.resize(n, 1);
    for (int i = 0; i < n; ++i) {
      auto g = sample(grp, rngs.group_sample, bc.s_max);
      detail::fill_row(out.small_views, i, apply(g, bases[i]), bc.norm_mean, bc.norm_std);
      out.real_labels(i, 0) = static_cast<S>(g.scale);
      out.source_indices.push_back(i);
    }
    return out;
  }

  if (bc.relative_mode) {
    // Pairs (v, T(v)); the predictor consumes concatenated features.
    out.relative_pairs = true;
    out.rows_per_record = 1;
    out.small_views = nn::Batch4<S>(2 * n, first.c, ss, ss);
    for (int i = 0; i < n; ++i) {
      auto g = sample(grp, rngs.group_sample);
      detail::fill_row(out.small_views, i, bases[i], bc.norm_mean, bc.norm_std);
      detail::fill_row(out.small_views, n + i, apply(g, bases[i]), bc.norm_mean,
                       bc.norm_std);
      out.labels.push_back(g.index);
      out.source_indices.push_back(i);
    }
    return out;
  }

  const bool single = bc.ablation == Ablation::kSingleRandomRotation ||
                      bc.ablation == Ablation::kLargeCropSingle;
  if (single) {
    out.rows_per_record = 1;
    out.small_views = nn::Batch4<S>(n, first.c, ss, ss);
    for (int i = 0; i < n; ++i) {
      auto g = sample(grp, rngs.group_sample);
      detail::fill_row(out.small_views, i, apply(g, bases[i]), bc.norm_mean, bc.norm_std);
      out.labels.push_back(bc.gpm_binary ? gpm_rotation_class(g) : g.index);
      out.source_indices.push_back(i);
    }
    return out;
  }

  // Full replication: block b holds element b applied to every record.
  const int k = grp.order;
  out.rows_per_record = k;
  out.small_views = nn::Batch4<S>(k * n, first.c, ss, ss);
  for (int b = 0; b < k; ++b) {
    auto g = grp.element(b);
    for (int i = 0; i < n; ++i) {
      detail::fill_row(out.small_views, b * n + i, apply(g, bases[i]), bc.norm_mean,
                       bc.norm_std);
      out.labels.push_back(bc.gpm_binary ? gpm_rotation_class(g) : b);
      out.source_indices.push_back(i);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizers.
// ---------------------------------------------------------------------------

template <class S>
class SgdMomentum {
 public:
  SgdMomentum(double momentum, double weight_decay)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  /// One update; params flagged fixed_lr use lr_fixed instead of lr.
  void step(std::vector<nn::Param<S>*>& params, double lr, double lr_fixed) {
    if (velocity_.size() != params.size()) {
      velocity_.clear();
      for (auto* p : params) velocity_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }
    for (size_t i = 0; i < params.size(); ++i) {
      auto* p = params[i];
      Mat<S> g = p->grad + static_cast<S>(weight_decay_) * p->value;
      velocity_[i] = static_cast<S>(momentum_) * velocity_[i] + g;
      p->value -= static_cast<S>(p->fixed_lr ? lr_fixed : lr) * velocity_[i];
    }
  }

 private:
  double momentum_, weight_decay_;
  std::vector<Mat<S>> velocity_;
};

template <class S>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<nn::Param<S>*>& params) {
    if (m_.size() != params.size()) {
      m_.clear();
      v_.clear();
      for (auto* p : params) {
        m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      }
    }
    ++t_;
    const S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
    const S corr1 = S(1) - std::pow(b1, static_cast<S>(t_));
    const S corr2 = S(1) - std::pow(b2, static_cast<S>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      auto* p = params[i];
      m_[i] = b1 * m_[i] + (S(1) - b1) * p->grad;
      v_[i] = b2 * v_[i] + (S(1) - b2) * p->grad.cwiseProduct(p->grad);
      Mat<S> mhat = m_[i] / corr1;
      Mat<S> vhat = v_[i] / corr2;
      p->value -= static_cast<S>(lr_) *
                  (mhat.array() / (vhat.array().sqrt() + static_cast<S>(eps_))).matrix();
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

// ---------------------------------------------------------------------------
// The combined objective over one view batch.
// ---------------------------------------------------------------------------

template <class S>
struct StepStats {
  S total = S(0);
  S issl = S(0);
  S equivariance = S(0);
  double invariance_measure = std::numeric_limits<double>::quiet_NaN();
  double equivariance_measure = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

template <class S>
double mean_negative_cosine(const Mat<S>& a, const Mat<S>& b) {
  double acc = 0.0;
  for (long i = 0; i < a.rows(); ++i) {
    double na = a.row(i).norm(), nb = b.row(i).norm();
    if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    acc -= a.row(i).dot(b.row(i)) / (na * nb);
  }
  return acc / static_cast<double>(a.rows());
}

/// Mean cosine similarity over the six unordered pairs of the four view
/// groups, averaged over the batch.
template <class S>
double four_view_mean_cosine(const Mat<S>& feats, int n) {
  if (feats.rows() != 4 * n) throw std::invalid_argument("expected exactly 4 view groups");
  double acc = 0.0;
  long pairs = 0;
  for (int b1 = 0; b1 < 4; ++b1)
    for (int b2 = b1 + 1; b2 < 4; ++b2)
      for (int i = 0; i < n; ++i) {
        auto r1 = feats.row(b1 * n + i);
        auto r2 = feats.row(b2 * n + i);
        double na = r1.norm(), nb = r2.norm();
        if (na == 0.0 || nb == 0.0) continue;
        acc += r1.dot(r2) / (na * nb);
        ++pairs;
      }
  return pairs ? acc / static_cast<double>(pairs) : 0.0;
}

}  // namespace detail

/// Forward (and optionally backward) pass of the full objective
/// total = issl + lambda * equivariance over one view batch. Parameter
/// gradients accumulate into the bundle; the caller owns zero_grad and the
/// optimizer step. With lambda == 0 the equivariance branch is skipped
/// entirely, reducing bit-for-bit to the plain invariance baseline.
template <class S>
StepStats<S> combined_objective(nn::ModelBundle<S>& bundle, const ViewBatch<S>& views,
                                const loss::ESSLObjective& obj, bool train,
                                bool backprop = true) {
  obj.validate();
  using namespace essl::loss;
  StepStats<S> stats;
  const int n = views.large_a.n;
  const bool route_half = bundle.spec.disentangled;

  // Invariance branch: both large views in one pass.
  if (obj.issl_kind != IsslKind::kNone) {
    nn::Batch4<S> big(2 * n, views.large_a.c, views.large_a.h, views.large_a.w);
    big.m.topRows(n) = views.large_a.m;
    big.m.bottomRows(n) = views.large_b.m;
    Mat<S> feats = bundle.f->forward(big, train);
    stats.invariance_measure =
        detail::mean_negative_cosine<S>(feats.topRows(n), feats.bottomRows(n));

    Mat<S> feats_inv = route_half ? Mat<S>(feats.leftCols(feats.cols() / 2)) : feats;
    Mat<S> z = bundle.p1.forward(feats_inv, train);
    Mat<S> za = z.topRows(n), zb = z.bottomRows(n);

    Mat<S> dz(z.rows(), z.cols());
    switch (obj.issl_kind) {
      case IsslKind::kSimclr: {
        auto r = info_nce<S>(za, zb, obj.temperature);
        stats.issl = r.value;
        dz << r.d1, r.d2;
        break;
      }
      case IsslKind::kSimsiam: {
        if (!bundle.simsiam_head)
          throw std::invalid_argument("combined_objective: simsiam needs its head");
        Mat<S> p = bundle.simsiam_head->forward(z, train);
        auto r1 = simsiam_negative_cosine<S>(p.topRows(n), zb);
        auto r2 = simsiam_negative_cosine<S>(p.bottomRows(n), za);
        stats.issl = static_cast<S>(0.5) * (r1.value + r2.value);
        Mat<S> dp(p.rows(), p.cols());
        dp << static_cast<S>(0.5) * r1.d1, static_cast<S>(0.5) * r2.d1;
        dz = bundle.simsiam_head->backward(dp);  // stop-gradient on targets
        break;
      }
      case IsslKind::kBarlowTwins: {
        auto r = barlow_twins<S>(za, zb, obj.bt_lambda);
        stats.issl = r.value;
        dz << r.d1, r.d2;
        break;
      }
      case IsslKind::kNone:
        break;
    }
    if (backprop) {
      Mat<S> dfeats_inv = bundle.p1.backward(dz);
      Mat<S> dfeats;
      if (route_half) {
        dfeats = Mat<S>::Zero(feats.rows(), feats.cols());
        dfeats.leftCols(feats.cols() / 2) = dfeats_inv;
      } else {
        dfeats = std::move(dfeats_inv);
      }
      bundle.f->backward(dfeats);
    }
  }

  // Equivariance branch.
  if (views.has_equivariance && obj.lambda_equivariance > 0.0) {
    Mat<S> feats_q = bundle.f->forward(views.small_views, train);
    if (views.rows_per_record == 4 && !views.relative_pairs)
      stats.equivariance_measure = detail::four_view_mean_cosine<S>(feats_q, n);

    Mat<S> feats_eq = route_half ? Mat<S>(feats_q.rightCols(feats_q.cols() / 2)) : feats_q;

    LossResult<S> r;
    Mat<S> dfeats_eq;
    if (views.relative_pairs) {
      Mat<S> top = feats_eq.topRows(n), bottom = feats_eq.bottomRows(n);
      Mat<S> logits = bundle.predict_transform(top, &bottom, train);
      r = relative_orientation_loss<S>(logits, views.labels);
      if (backprop) {
        Mat<S> dcat = bundle.p2.backward(
            (static_cast<S>(obj.lambda_equivariance) * r.d1).eval());
        dfeats_eq.resize(feats_eq.rows(), feats_eq.cols());
        dfeats_eq.topRows(n) = dcat.leftCols(feats_eq.cols());
        dfeats_eq.bottomRows(n) = dcat.rightCols(feats_eq.cols());
      }
    } else {
      Mat<S> logits = bundle.predict_transform(feats_eq, nullptr, train);
      r = equivariance_prediction_loss<S>(logits, views.labels, views.real_labels,
                                          obj.prediction_kind);
      if (backprop)
        dfeats_eq = bundle.p2.backward(
            (static_cast<S>(obj.lambda_equivariance) * r.d1).eval());
    }
    stats.equivariance = r.value;
    if (backprop) {
      Mat<S> dfeats_q;
      if (route_half) {
        dfeats_q = Mat<S>::Zero(feats_q.rows(), feats_q.cols());
        dfeats_q.rightCols(feats_q.cols() / 2) = dfeats_eq;
      } else {
        dfeats_q = std::move(dfeats_eq);
      }
      bundle.f->backward(dfeats_q);
    }
  }

  stats.total = stats.issl + static_cast<S>(obj.lambda_equivariance) * stats.equivariance;
  return stats;
}

/// One optimization step on all parameters jointly. Throws on non-finite
/// loss with a diagnostic.
template <class S>
StepStats<S> train_step(nn::ModelBundle<S>& bundle, const ViewBatch<S>& views,
                        const loss::ESSLObjective& obj, SgdMomentum<S>& opt, double lr,
                        double lr_fixed) {
  bundle.zero_grad();
  auto stats = combined_objective<S>(bundle, views, obj, /*train=*/true);
  if (!std::isfinite(static_cast<double>(stats.total)))
    throw std::runtime_error(
        "train_step: non-finite loss (issl=" + std::to_string(static_cast<double>(stats.issl)) +
        ", equiv=" + std::to_string(static_cast<double>(stats.equivariance)) + ")");
  std::vector<nn::Param<S>*> params;
  bundle.collect_pretrain(params);
  opt.step(params, lr, lr_fixed);
  return stats;
}

}  // namespace essl::train
