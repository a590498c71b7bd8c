#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "essl/image.hpp"
#include "essl/models.hpp"
#include "essl/objectives.hpp"

namespace essl::eval {

/// Per-epoch evaluation row. NaN marks an absent metric; the CSV writer
/// leaves those cells empty.
struct MetricsRecord {
  long epoch = -1;
  long step = -1;
  double loss_total = std::numeric_limits<double>::quiet_NaN();
  double loss_issl = std::numeric_limits<double>::quiet_NaN();
  double loss_equiv = std::numeric_limits<double>::quiet_NaN();
  double lr = std::numeric_limits<double>::quiet_NaN();
  double invariance_measure = std::numeric_limits<double>::quiet_NaN();
  double equivariance_measure = std::numeric_limits<double>::quiet_NaN();
  double knn_acc = std::numeric_limits<double>::quiet_NaN();
  double linear_acc = std::numeric_limits<double>::quiet_NaN();
  double rot_pred_acc = std::numeric_limits<double>::quiet_NaN();
  double rel_dos_error = std::numeric_limits<double>::quiet_NaN();
};

extern const char* kMetricsHeader;

class MetricsCsv {
 public:
  explicit MetricsCsv(const std::filesystem::path& path);
  void append(const MetricsRecord& row);
  void flush();

 private:
  std::ofstream os_;
};

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Probes.
// ---------------------------------------------------------------------------

/// Weighted k-nearest-neighbor vote over cosine similarity with a Gaussian
/// kernel: each of the k closest memory items votes exp(sim/temp) for its
/// label. Returns accuracy in percent; fully deterministic.
template <class S>
double knn_probe(const Mat<S>& train_feats, const std::vector<int>& train_labels,
                 const Mat<S>& test_feats, const std::vector<int>& test_labels,
                 int k = 200, double temperature = 0.1) {
  const long n_train = train_feats.rows(), n_test = test_feats.rows();
  if (n_train == 0) throw std::invalid_argument("knn_probe: empty memory bank");
  if (static_cast<long>(train_labels.size()) != n_train ||
      static_cast<long>(test_labels.size()) != n_test)
    throw std::invalid_argument("knn_probe: label count mismatch");
  k = static_cast<int>(std::min<long>(k, n_train));
  int num_classes = 0;
  for (int l : train_labels) num_classes = std::max(num_classes, l + 1);

  auto normalize = [](const Mat<S>& m) {
    Mat<S> out = m;
    for (long i = 0; i < m.rows(); ++i) {
      S n = m.row(i).norm();
      out.row(i) = n > S(0) ? (m.row(i) / n).eval() : m.row(i);
    }
    return out;
  };
  Mat<S> bank = normalize(train_feats);
  Mat<S> queries = normalize(test_feats);

  long correct = 0;
  const long chunk = 256;
  std::vector<std::pair<S, long>> order(n_train);
  for (long q0 = 0; q0 < n_test; q0 += chunk) {
    long qn = std::min(chunk, n_test - q0);
    Mat<S> sims = queries.middleRows(q0, qn) * bank.transpose();
    for (long qi = 0; qi < qn; ++qi) {
      for (long j = 0; j < n_train; ++j) order[j] = {sims(qi, j), j};
      std::partial_sort(order.begin(), order.begin() + k, order.end(),
                        [](const auto& a, const auto& b) {
                          return a.first != b.first ? a.first > b.first
                                                    : a.second < b.second;
                        });
      std::vector<double> votes(num_classes, 0.0);
      for (int j = 0; j < k; ++j)
        votes[train_labels[order[j].second]] +=
            std::exp(static_cast<double>(order[j].first) / temperature);
      long best = std::max_element(votes.begin(), votes.end()) - votes.begin();
      if (best == test_labels[q0 + qi]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n_test);
}

struct LinearProbeResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_seed;
};

struct LinearProbeOptions {
  int epochs = 100;
  double base_lr = 30.0;
  int batch_size = 256;
  int seeds = 5;
  double momentum = 0.9;
  uint64_t seed0 = 7;
};

/// Linear classifier on frozen features: SGD with momentum and cosine decay,
/// statistics over independent head initializations.
template <class S>
LinearProbeResult linear_probe(const Mat<S>& train_feats,
                               const std::vector<int>& train_labels,
                               const Mat<S>& test_feats,
                               const std::vector<int>& test_labels, int num_classes,
                               const LinearProbeOptions& opts = {}) {
  const long n = train_feats.rows(), d = train_feats.cols();
  if (n == 0) throw std::invalid_argument("linear_probe: no training features");
  LinearProbeResult result;
  for (int s = 0; s < opts.seeds; ++s) {
    auto rng = make_root_stream(opts.seed0).derive("linear_probe", s);
    Mat<S> w = Mat<S>::Zero(num_classes, d);
    for (long i = 0; i < w.rows(); ++i)
      for (long j = 0; j < w.cols(); ++j)
        w(i, j) = static_cast<S>(rng.normal(0.0, std::sqrt(1.0 / d)));
    Mat<S> b = Mat<S>::Zero(1, num_classes);
    Mat<S> vw = Mat<S>::Zero(num_classes, d), vb = Mat<S>::Zero(1, num_classes);

    std::vector<long> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    const long spe = std::max<long>(1, n / opts.batch_size);
    const long total = static_cast<long>(opts.epochs) * spe;
    long step = 0;
    for (int e = 0; e < opts.epochs; ++e) {
      auto order_rng = rng.derive("order", e);
      order_rng.shuffle(idx.begin(), idx.end());
      for (long bstart = 0; bstart + opts.batch_size <= n || bstart == 0;
           bstart += opts.batch_size) {
        long bsz = std::min<long>(opts.batch_size, n - bstart);
        if (bsz <= 0) break;
        Mat<S> x(bsz, d);
        std::vector<int> y(bsz);
        for (long i = 0; i < bsz; ++i) {
          x.row(i) = train_feats.row(idx[bstart + i]);
          y[i] = train_labels[idx[bstart + i]];
        }
        Mat<S> logits = x * w.transpose();
        logits.rowwise() += b.row(0);
        auto r = loss::cross_entropy<S>(logits, y);
        double lr = opts.base_lr * 0.5 *
                    (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                    static_cast<double>(std::max<long>(1, total))));
        Mat<S> gw = r.d1.transpose() * x;
        Mat<S> gb = r.d1.colwise().sum();
        vw = static_cast<S>(opts.momentum) * vw + gw;
        vb = static_cast<S>(opts.momentum) * vb + gb;
        w -= static_cast<S>(lr) * vw;
        b -= static_cast<S>(lr) * vb;
        ++step;
        if (bstart + opts.batch_size > n) break;
      }
    }
    Mat<S> logits = test_feats * w.transpose();
    logits.rowwise() += b.row(0);
    long correct = 0;
    for (long i = 0; i < logits.rows(); ++i) {
      long best;
      logits.row(i).maxCoeff(&best);
      if (best == test_labels[i]) ++correct;
    }
    result.per_seed.push_back(100.0 * static_cast<double>(correct) /
                              static_cast<double>(std::max<long>(1, logits.rows())));
  }
  double mean = 0;
  for (double v : result.per_seed) mean += v;
  mean /= static_cast<double>(result.per_seed.size());
  double var = 0;
  for (double v : result.per_seed) var += (v - mean) * (v - mean);
  var /= static_cast<double>(result.per_seed.size());
  result.mean = mean;
  result.stddev = std::sqrt(var);
  return result;
}

/// Linear head over frozen features of transformed inputs, classifying
/// which group element was applied. Returns percent accuracy.
template <class S>
double rotation_prediction_probe(const Mat<S>& feats_of_rotated,
                                 const std::vector<int>& rotation_labels,
                                 const Mat<S>& test_feats,
                                 const std::vector<int>& test_rotation_labels,
                                 int num_classes = 4, LinearProbeOptions opts = {}) {
  opts.seeds = 1;
  return linear_probe<S>(feats_of_rotated, rotation_labels, test_feats,
                         test_rotation_labels, num_classes, opts)
      .mean;
}

/// Mean over samples of sum|pred - truth| / sum(truth), in percent.
template <class S>
double relative_dos_error(const Mat<S>& pred, const Mat<S>& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("relative_dos_error: shape mismatch");
  double acc = 0.0;
  for (long i = 0; i < pred.rows(); ++i) {
    double num = (pred.row(i) - truth.row(i)).template cast<double>().cwiseAbs().sum();
    double den = truth.row(i).template cast<double>().sum();
    if (!(den > 0.0))
      throw std::invalid_argument("relative_dos_error: all-zero truth row " +
                                  std::to_string(i));
    acc += num / den;
  }
  return 100.0 * acc / static_cast<double>(pred.rows());
}

/// Mean negative cosine similarity between two view batches; lower means
/// more invariant representations.
template <class S>
double invariance_measure(const Mat<S>& z1, const Mat<S>& z2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
    throw std::invalid_argument("invariance_measure: shape mismatch");
  double acc = 0.0;
  for (long i = 0; i < z1.rows(); ++i) {
    double na = z1.row(i).norm(), nb = z2.row(i).norm();
    if (!(na > 0.0) || !(nb > 0.0))
      throw std::domain_error("invariance_measure: zero-norm row");
    acc -= z1.row(i).dot(z2.row(i)) / (na * nb);
  }
  return acc / static_cast<double>(z1.rows());
}

/// Mean cosine similarity over the six unordered pairs of four view groups
/// (rows blocked as [view0; view1; view2; view3]); lower means more
/// transformation-distinguishing representations.
template <class S>
double equivariance_measure(const Mat<S>& z_rot, int n) {
  if (z_rot.rows() != 4 * n)
    throw std::invalid_argument("equivariance_measure: expected exactly 4 view groups");
  double acc = 0.0;
  long count = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      for (int i = 0; i < n; ++i) {
        auto r1 = z_rot.row(a * n + i);
        auto r2 = z_rot.row(b * n + i);
        double na = r1.norm(), nb = r2.norm();
        if (!(na > 0.0) || !(nb > 0.0))
          throw std::domain_error("equivariance_measure: zero-norm row");
        acc += r1.dot(r2) / (na * nb);
        ++count;
      }
  return acc / static_cast<double>(count);
}

/// Features of a set of images in eval mode (no augmentation).
template <class S>
Mat<S> extract_features(nn::Encoder<S>& encoder, const std::vector<const Image*>& images,
                        const std::vector<float>& norm_mean,
                        const std::vector<float>& norm_std, int batch_size = 256) {
  if (images.empty()) throw std::invalid_argument("extract_features: no images");
  Mat<S> out(static_cast<long>(images.size()), encoder.feature_dim());
  const Image& first = *images[0];
  for (size_t start = 0; start < images.size(); start += batch_size) {
    size_t count = std::min<size_t>(batch_size, images.size() - start);
    nn::Batch4<S> batch(static_cast<int>(count), first.c, first.h, first.w);
    for (size_t i = 0; i < count; ++i) {
      const Image& img = *images[start + i];
      for (int c = 0; c < img.c; ++c) {
        float m = c < static_cast<int>(norm_mean.size()) ? norm_mean[c] : 0.f;
        float sd = c < static_cast<int>(norm_std.size()) ? norm_std[c] : 1.f;
        const long off = static_cast<long>(c) * img.h * img.w;
        for (long k = 0; k < static_cast<long>(img.h) * img.w; ++k)
          batch.m(static_cast<long>(i), off + k) = static_cast<S>((img.data[off + k] - m) / sd);
      }
    }
    out.middleRows(static_cast<long>(start), static_cast<long>(count)) =
        encoder.forward(batch, /*train=*/false);
  }
  return out;
}

}  // namespace essl::eval
