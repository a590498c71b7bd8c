#pragma once

#include <cmath>

#include "essl/core.hpp"

namespace essl::loss {

enum class IsslKind { kSimclr, kSimsiam, kBarlowTwins, kNone };
enum class PredKind { kCrossEntropy, kL1, kMse };

inline std::string to_string(IsslKind k) {
  switch (k) {
    case IsslKind::kSimclr: return "simclr";
    case IsslKind::kSimsiam: return "simsiam";
    case IsslKind::kBarlowTwins: return "barlow_twins";
    case IsslKind::kNone: return "none";
  }
  return "?";
}

inline std::string to_string(PredKind k) {
  switch (k) {
    case PredKind::kCrossEntropy: return "cross_entropy";
    case PredKind::kL1: return "l1";
    case PredKind::kMse: return "mse";
  }
  return "?";
}

/// The combined objective: an invariance loss over augmented views plus a
/// lambda-weighted prediction loss over transformed views. lambda = 0
/// reduces exactly to the plain invariance baseline.
struct ESSLObjective {
  IsslKind issl_kind = IsslKind::kSimclr;
  double temperature = 0.5;   // InfoNCE
  double bt_lambda = 5e-3;    // Barlow Twins off-diagonal weight
  double lambda_equivariance = 0.4;
  PredKind prediction_kind = PredKind::kCrossEntropy;

  void validate() const {
    if (!(temperature > 0.0))
      throw std::invalid_argument("ESSLObjective: temperature must be positive");
    if (lambda_equivariance < 0.0)
      throw std::invalid_argument("ESSLObjective: lambda must be nonnegative");
  }
};

template <class S>
struct LossResult {
  S value = S(0);
  Mat<S> d1;  // gradient wrt first input
  Mat<S> d2;  // gradient wrt second input, when applicable
};

namespace detail {

template <class S>
Mat<S> l2_normalize_rows(const Mat<S>& z, Mat<S>* norms_out, const char* who) {
  Mat<S> out(z.rows(), z.cols());
  if (norms_out) norms_out->resize(z.rows(), 1);
  for (long i = 0; i < z.rows(); ++i) {
    S n = z.row(i).norm();
    if (!(n > S(0)))
      throw std::domain_error(std::string(who) + ": zero-norm row " + std::to_string(i));
    out.row(i) = z.row(i) / n;
    if (norms_out) (*norms_out)(i, 0) = n;
  }
  return out;
}

/// Gradient of v = z/|z| pulled back: dz = (dv - v (v . dv)) / |z|.
template <class S>
Mat<S> normalize_backward(const Mat<S>& z_normed, const Mat<S>& norms, const Mat<S>& dv) {
  Mat<S> dz(dv.rows(), dv.cols());
  for (long i = 0; i < dv.rows(); ++i) {
    S dot = z_normed.row(i).dot(dv.row(i));
    dz.row(i) = (dv.row(i) - dot * z_normed.row(i)) / norms(i, 0);
  }
  return dz;
}

}  // namespace detail

/// NT-Xent over 2N anchors: each anchor's positive is its sibling view; the
/// denominator holds the positive plus the 2N-2 other samples (the anchor
/// itself is excluded). Rows are L2-normalized internally.
template <class S>
LossResult<S> info_nce(const Mat<S>& z1, const Mat<S>& z2, double temperature) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
    throw std::invalid_argument("info_nce: mismatched view batches");
  if (z1.rows() < 1) throw std::invalid_argument("info_nce: empty batch");
  if (!(temperature > 0.0)) throw std::invalid_argument("info_nce: temperature <= 0");
  const long n = z1.rows(), m = 2 * n;
  const S tau = static_cast<S>(temperature);

  Mat<S> norms;
  Mat<S> a(m, z1.cols());
  a.topRows(n) = detail::l2_normalize_rows(z1, &norms, "info_nce");
  Mat<S> norms2;
  a.bottomRows(n) = detail::l2_normalize_rows(z2, &norms2, "info_nce");
  Mat<S> allnorms(m, 1);
  allnorms.topRows(n) = norms;
  allnorms.bottomRows(n) = norms2;

  Mat<S> sim = a * a.transpose();  // cosine similarities
  S total = S(0);
  Mat<S> dsim = Mat<S>::Zero(m, m);
  for (long i = 0; i < m; ++i) {
    long pos = (i + n) % m;
    // Stable log-sum-exp over k != i.
    S mx = std::numeric_limits<S>::lowest();
    for (long k = 0; k < m; ++k)
      if (k != i) mx = std::max(mx, sim(i, k) / tau);
    S denom = S(0);
    for (long k = 0; k < m; ++k)
      if (k != i) denom += std::exp(sim(i, k) / tau - mx);
    total += std::log(denom) + mx - sim(i, pos) / tau;
    const S inv = S(1) / (static_cast<S>(m) * tau);
    for (long k = 0; k < m; ++k) {
      if (k == i) continue;
      S p = std::exp(sim(i, k) / tau - mx) / denom;
      dsim(i, k) += inv * (p - (k == pos ? S(1) : S(0)));
    }
  }
  total /= static_cast<S>(m);

  Mat<S> da = (dsim + dsim.transpose()) * a;
  Mat<S> dz = detail::normalize_backward(a, allnorms, da);
  LossResult<S> out;
  out.value = total;
  out.d1 = dz.topRows(n);
  out.d2 = dz.bottomRows(n);
  return out;
}

/// Mean negative cosine similarity against a constant target branch; the
/// gradient with respect to the stopped branch is exactly zero.
template <class S>
LossResult<S> simsiam_negative_cosine(const Mat<S>& p, const Mat<S>& z_stopped) {
  if (p.rows() != z_stopped.rows() || p.cols() != z_stopped.cols())
    throw std::invalid_argument("simsiam: mismatched batches");
  const long n = p.rows();
  LossResult<S> out;
  out.d1 = Mat<S>::Zero(n, p.cols());
  out.d2 = Mat<S>::Zero(n, p.cols());  // stop-gradient contract
  S total = S(0);
  for (long i = 0; i < n; ++i) {
    S np = p.row(i).norm(), nz = z_stopped.row(i).norm();
    if (!(np > S(0)) || !(nz > S(0)))
      throw std::domain_error("simsiam: zero-norm row " + std::to_string(i));
    S cosv = p.row(i).dot(z_stopped.row(i)) / (np * nz);
    total -= cosv;
    out.d1.row(i) =
        -(z_stopped.row(i) / (np * nz) - cosv * p.row(i) / (np * np)) / static_cast<S>(n);
  }
  out.value = total / static_cast<S>(n);
  return out;
}

/// Redundancy-reduction loss on the batch-standardized cross-correlation
/// matrix; standardization epsilon is 1e-5 inside the square root.
template <class S>
LossResult<S> barlow_twins(const Mat<S>& z1, const Mat<S>& z2, double bt_lambda) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
    throw std::invalid_argument("barlow_twins: mismatched view batches");
  const long n = z1.rows(), d = z1.cols();
  if (n < 2) throw std::invalid_argument("barlow_twins: needs batch statistics (N >= 2)");
  const S eps = static_cast<S>(1e-5);
  const S lam = static_cast<S>(bt_lambda);

  auto standardize = [&](const Mat<S>& z, Mat<S>& xhat, Mat<S>& inv_std) {
    Mat<S> mean = z.colwise().mean();
    Mat<S> centered = z.rowwise() - mean.row(0);
    Mat<S> var = centered.array().square().colwise().mean();
    for (long j = 0; j < d; ++j)
      if (!(var(0, j) > S(0)))
        throw std::domain_error("barlow_twins: zero-variance feature column " +
                                std::to_string(j));
    inv_std = (var.array() + eps).rsqrt();
    xhat = centered.array().rowwise() * inv_std.row(0).array();
  };
  Mat<S> x, y, isx, isy;
  standardize(z1, x, isx);
  standardize(z2, y, isy);

  Mat<S> c = (x.transpose() * y) / static_cast<S>(n);
  S on_diag = S(0), off_diag = S(0);
  Mat<S> dc(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) {
      if (i == j) {
        S e = S(1) - c(i, i);
        on_diag += e * e;
        dc(i, j) = S(-2) * e;
      } else {
        off_diag += c(i, j) * c(i, j);
        dc(i, j) = S(2) * lam * c(i, j);
      }
    }

  Mat<S> dx = (y * dc.transpose()) / static_cast<S>(n);
  Mat<S> dy = (x * dc) / static_cast<S>(n);
  auto destandardize = [&](const Mat<S>& xh, const Mat<S>& inv_std, const Mat<S>& dxh) {
    Mat<S> mean_dxh = dxh.colwise().mean();
    Mat<S> mean_dxh_xh = (dxh.array() * xh.array()).colwise().mean();
    Mat<S> dz = dxh.rowwise() - mean_dxh.row(0);
    dz -= (xh.array().rowwise() * mean_dxh_xh.row(0).array()).matrix();
    return (dz.array().rowwise() * inv_std.row(0).array()).matrix();
  };
  LossResult<S> out;
  out.value = on_diag + lam * off_diag;
  out.d1 = destandardize(x, isx, dx);
  out.d2 = destandardize(y, isy, dy);
  return out;
}

/// Mean cross entropy from logits; labels are class indices.
template <class S>
LossResult<S> cross_entropy(const Mat<S>& logits, const std::vector<int>& labels) {
  const long n = logits.rows(), k = logits.cols();
  if (static_cast<long>(labels.size()) != n)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  LossResult<S> out;
  out.d1 = Mat<S>::Zero(n, k);
  S total = S(0);
  for (long i = 0; i < n; ++i) {
    int y = labels[i];
    if (y < 0 || y >= k)
      throw std::invalid_argument("cross_entropy: label out of range at row " +
                                  std::to_string(i));
    S mx = logits.row(i).maxCoeff();
    S denom = (logits.row(i).array() - mx).exp().sum();
    total += std::log(denom) + mx - logits(i, y);
    for (long j = 0; j < k; ++j) {
      S p = std::exp(logits(i, j) - mx) / denom;
      out.d1(i, j) = (p - (j == y ? S(1) : S(0))) / static_cast<S>(n);
    }
  }
  out.value = total / static_cast<S>(n);
  return out;
}

template <class S>
LossResult<S> l1_loss(const Mat<S>& pred, const Mat<S>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("l1_loss: shape mismatch");
  const S count = static_cast<S>(pred.size());
  LossResult<S> out;
  Mat<S> diff = pred - target;
  out.value = diff.array().abs().sum() / count;
  out.d1 = diff.array().sign().matrix() / count;
  return out;
}

template <class S>
LossResult<S> mse_loss(const Mat<S>& pred, const Mat<S>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse_loss: shape mismatch");
  const S count = static_cast<S>(pred.size());
  LossResult<S> out;
  Mat<S> diff = pred - target;
  out.value = diff.array().square().sum() / count;
  out.d1 = S(2) * diff / count;
  return out;
}

/// Cross entropy over the relative group element of a view pair.
template <class S>
LossResult<S> relative_orientation_loss(const Mat<S>& pair_logits,
                                        const std::vector<int>& labels) {
  return cross_entropy(pair_logits, labels);
}

template <class S>
LossResult<S> equivariance_prediction_loss(const Mat<S>& logits_or_value,
                                           const std::vector<int>& class_labels,
                                           const Mat<S>& real_labels, PredKind kind) {
  switch (kind) {
    case PredKind::kCrossEntropy:
      return cross_entropy(logits_or_value, class_labels);
    case PredKind::kL1:
      return l1_loss(logits_or_value, real_labels);
    case PredKind::kMse:
      return mse_loss(logits_or_value, real_labels);
  }
  throw std::invalid_argument("equivariance_prediction_loss: unknown kind");
}

}  // namespace essl::loss
