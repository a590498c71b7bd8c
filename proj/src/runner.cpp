#include "essl/runner.hpp"

#include <omp.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "essl/evaluation.hpp"
#include "essl/theory.hpp"
#include "essl/training.hpp"

namespace essl::train {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kSingleRandomRotation: return "single_random_rotation";
    case Ablation::kLinearPredictor: return "linear_predictor";
    case Ablation::kNoSslAugOnEquivViews: return "no_ssl_aug_on_equiv_views";
    case Ablation::kDisentangled: return "disentangled";
    case Ablation::kInsensitiveInstead: return "insensitive_instead";
    case Ablation::kLargeCropSingle: return "large_crop_single";
  }
  return "?";
}

std::optional<Ablation> ablation_from_string(const std::string& s) {
  for (auto a : {Ablation::kNone, Ablation::kSingleRandomRotation,
                 Ablation::kLinearPredictor, Ablation::kNoSslAugOnEquivViews,
                 Ablation::kDisentangled, Ablation::kInsensitiveInstead,
                 Ablation::kLargeCropSingle})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

}  // namespace essl::train

namespace essl::run {

namespace fs = std::filesystem;
using cfg::Config;

fs::path resolve_output_dir(const std::string& configured) {
  fs::path p(configured);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("ESSL_OUTPUT_ROOT")) return fs::path(root) / p;
  return p;
}

namespace {

// Dataset pools regenerate identically for every run arm: generation seeds
// are fixed constants, while the config seed drives only training-side
// randomness.
constexpr uint64_t kImageDataSeed = 0x517cc1b727220a95ULL;
constexpr uint64_t kCellDataSeed = 0x2545f4914f6cdd1dULL;

struct ImageData {
  std::vector<data::ImageRecord> train, test;
  std::vector<float> norm_mean, norm_std;
  int num_classes = 10;
};

struct CellData {
  std::vector<data::RegressionRecord> pool;   // pretraining + finetune-train pool
  std::vector<data::RegressionRecord> held;   // held-out test cells
  std::vector<float> norm_mean{0.f}, norm_std{10.f};
};

ImageData load_image_data(const Config& c) {
  ImageData out;
  auto kind = c.get("dataset.kind");
  auto rng = make_root_stream(kImageDataSeed);
  if (kind == "cifar10") {
    fs::path root = c.get("dataset.root");
    auto frac_rng = rng.derive("subsample");
    out.train = data::load_image_dataset(root, data::Split::kTrain,
                                         c.get_real("dataset.train_fraction"), frac_rng);
    auto test_rng = rng.derive("subsample.test");
    out.test = data::load_image_dataset(root, data::Split::kTest, 1.0, test_rng);
    out.norm_mean = {0.4914f, 0.4822f, 0.4465f};
    out.norm_std = {0.2470f, 0.2435f, 0.2616f};
  } else if (kind == "synthetic10") {
    auto train_rng = rng.derive("synthetic10.train");
    auto test_rng = rng.derive("synthetic10.test");
    out.train = data::generate_synthetic10(
        static_cast<int>(c.get_int("dataset.train_count")), train_rng);
    out.test = data::generate_synthetic10(
        static_cast<int>(c.get_int("dataset.test_count")), test_rng);
    double frac = c.get_real("dataset.train_fraction");
    if (frac < 1.0) {
      auto sub = rng.derive("synthetic10.subsample");
      out.train = data::stratified_subsample(out.train, frac, sub);
    }
    out.norm_mean = {0.5f, 0.5f, 0.5f};
    out.norm_std = {0.25f, 0.25f, 0.25f};
  } else {
    throw std::invalid_argument("load_image_data: dataset.kind=" + kind +
                                " is not an image dataset");
  }
  if (c.get("dataset.orientation_mode") == "all_orientations") {
    data::OrientationBiasConfig bias;
    bias.mode = data::OrientationMode::kAllOrientations;
    bias.group = *group_from_string(c.get("dataset.orientation_group"));
    auto bias_rng = make_root_stream(kImageDataSeed).derive("orientation_bias");
    out.train = data::apply_orientation_bias(out.train, bias, bias_rng);
  }
  return out;
}

CellData load_cell_data(const Config& c) {
  CellData out;
  auto family = c.get("dataset.kind") == "gpm" ? data::CellFamily::kGpm
                                               : data::CellFamily::kBlob;
  int train_n = static_cast<int>(c.get_int("dataset.train_count"));
  int test_n = static_cast<int>(c.get_int("dataset.test_count"));
  auto rng = make_root_stream(kCellDataSeed)
                 .derive(family == data::CellFamily::kGpm ? "gpm" : "blob");
  auto all = data::make_regression_dataset(family, train_n + test_n, rng);
  out.pool.assign(all.begin(), all.begin() + train_n);
  out.held.assign(all.begin() + train_n, all.end());
  return out;
}

nn::BundleSpec bundle_spec_from_config(const Config& c, long predictor_outputs,
                                       bool relative_mode) {
  nn::BundleSpec spec;
  auto enc = c.get("model.encoder");
  if (enc == "resnet18_cifar") spec.encoder = nn::EncoderSpec::resnet18_cifar();
  else if (enc == "resnet18_standard") spec.encoder = nn::EncoderSpec::resnet18_standard();
  else if (enc == "mlp_backbone") spec.encoder = nn::EncoderSpec::mlp_backbone();
  else spec.encoder = nn::EncoderSpec::phc_cnn();
  spec.encoder.feature_dim = c.get_int("model.feature_dim");
  spec.encoder.mlp_hidden = c.get_int("model.mlp_hidden");
  spec.encoder.conv_width = c.get_real("model.conv_width");
  spec.encoder.zero_init_residual = c.get_bool("model.zero_init_residual");
  if (c.get("dataset.kind") == "blob" || c.get("dataset.kind") == "gpm")
    spec.encoder.input_channels = 1;

  spec.disentangled = c.get_bool("model.disentangled") ||
                      c.get("train.ablation") == "disentangled";
  long feat = spec.encoder.feature_dim;
  long head_in = spec.disentangled ? feat / 2 : feat;

  spec.projector.depth = 2;
  spec.projector.input_dim = head_in;
  spec.projector.hidden_dim = c.get_int("model.projector_hidden");
  spec.projector.output_dim = c.get_int("model.projector_out");
  spec.projector.norm = nn::NormKind::kBatchNorm;
  spec.projector.final_norm = c.get_bool("model.projector_final_norm");
  spec.projector.final_norm_affine = false;

  spec.predictor.depth = c.get("train.ablation") == "linear_predictor"
                             ? 0
                             : static_cast<int>(c.get_int("model.predictor_depth"));
  spec.predictor.input_dim = head_in;
  spec.predictor.hidden_dim = c.get_int("model.predictor_hidden");
  spec.predictor.num_outputs = predictor_outputs;
  auto norm = c.get("model.predictor_norm");
  spec.predictor.norm = norm == "batch_norm" ? nn::NormKind::kBatchNorm
                        : norm == "none" ? nn::NormKind::kNone
                                         : nn::NormKind::kLayerNorm;
  spec.predictor.drop_last_relu = c.get_bool("model.predictor_drop_last_relu");
  spec.predictor.input_dim_multiplier = relative_mode ? 2 : 1;

  spec.simsiam_head = c.get("objective.issl_kind") == "simsiam";
  spec.simsiam_bottleneck = c.get_int("model.simsiam_bottleneck");
  spec.regression_head =
      c.get("dataset.kind") == "blob" || c.get("dataset.kind") == "gpm";
  spec.reg_h1 = c.get_int("model.reg_h1");
  spec.reg_h2 = c.get_int("model.reg_h2");
  spec.reg_out = data::kDosBins;
  return spec;
}

loss::ESSLObjective objective_from_config(const Config& c) {
  loss::ESSLObjective obj;
  auto kind = c.get("objective.issl_kind");
  obj.issl_kind = kind == "simsiam" ? loss::IsslKind::kSimsiam
                  : kind == "barlow_twins" ? loss::IsslKind::kBarlowTwins
                  : kind == "none" ? loss::IsslKind::kNone
                                   : loss::IsslKind::kSimclr;
  obj.temperature = c.get_real("objective.temperature");
  obj.bt_lambda = c.get_real("objective.bt_lambda");
  obj.lambda_equivariance = c.get_real("objective.lambda");
  auto pk = c.get("objective.prediction_kind");
  obj.prediction_kind = pk == "l1" ? loss::PredKind::kL1
                        : pk == "mse" ? loss::PredKind::kMse
                                      : loss::PredKind::kCrossEntropy;
  obj.validate();
  return obj;
}

AugmentationPolicy policy_from_config(const Config& c) {
  AugmentationPolicy p;
  p.level = static_cast<int>(c.get_int("policy.level"));
  p.crop_size = static_cast<int>(c.get_int("policy.crop_size"));
  p.crop_scale = {c.get_real("policy.crop_scale_lo"), c.get_real("policy.crop_scale_hi")};
  p.solarize = c.get_bool("policy.solarize");
  auto prepend = c.get("policy.prepend_group");
  if (!prepend.empty()) {
    auto g = group_from_string(prepend);
    if (!g) throw std::invalid_argument("unknown policy.prepend_group " + prepend);
    p.prepend_group = *g;
    p.prepend_s_max = c.get_real("group.s_max");
  }
  p.validate();
  return p;
}

train::BatchBuildConfig batch_config_from(const Config& c, bool cell_mode,
                                          const std::vector<float>& mean,
                                          const std::vector<float>& std) {
  train::BatchBuildConfig bc;
  bc.large_size = static_cast<int>(c.get_int("policy.crop_size"));
  bc.small_size = static_cast<int>(c.get_int("policy.small_crop_size"));
  bc.small_crop_scale = {c.get_real("policy.small_crop_scale_lo"),
                         c.get_real("policy.small_crop_scale_hi")};
  bc.s_max = c.get_real("group.s_max");
  bc.gpm_binary = c.get_bool("objective.gpm_binary");
  bc.relative_mode = c.get_bool("train.relative_mode");
  bc.ablation = *train::ablation_from_string(c.get("train.ablation"));
  bc.norm_mean = mean;
  bc.norm_std = std;
  bc.cell_mode = cell_mode;
  bc.cell_augment.c4v = c.get_bool("policy.cell_c4v");
  bc.cell_augment.rolls = c.get_bool("policy.cell_rolls");
  bc.cell_augment.mirrors = c.get_bool("policy.cell_mirrors");
  bc.cell_augment.scaling = c.get_bool("policy.cell_scaling");
  bc.cell_augment.s_max = c.get_real("group.s_max");
  return bc;
}

long infer_predictor_outputs(const Config& c, const TransformationGroup& grp) {
  long configured = c.get_int("model.predictor_outputs");
  if (configured > 0) return configured;
  if (grp.name == GroupName::kScaling) return 1;
  if (c.get_bool("objective.gpm_binary")) return 2;
  return grp.order;
}

void write_summary(const fs::path& dir, const std::map<std::string, double>& metrics) {
  std::ofstream os(dir / "summary.txt");
  for (const auto& [k, v] : metrics) os << k << " = " << v << "\n";
}

std::vector<const Image*> image_ptrs(const std::vector<data::ImageRecord>& recs) {
  std::vector<const Image*> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(&r.pixels);
  return out;
}

std::vector<const Image*> cell_ptrs(const std::vector<data::RegressionRecord>& recs) {
  std::vector<const Image*> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(&r.cell.cell);
  return out;
}

std::vector<int> labels_of(const std::vector<data::ImageRecord>& recs) {
  std::vector<int> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(r.label);
  return out;
}

// ---------------------------------------------------------------------------
// Pretraining (image and cell pipelines share this loop).
// ---------------------------------------------------------------------------

template <class S>
struct PretrainOutput {
  std::map<std::string, double> metrics;
  std::unique_ptr<nn::ModelBundle<S>> bundle;
};

template <class S>
PretrainOutput<S> pretrain_impl(const Config& c, const fs::path& out_dir) {
  const bool cell_mode =
      c.get("dataset.kind") == "blob" || c.get("dataset.kind") == "gpm";
  auto grp = group(*group_from_string(c.get("group.name")));
  auto obj = objective_from_config(c);
  const bool relative = c.get_bool("train.relative_mode");

  ImageData images;
  CellData cells;
  std::vector<const Image*> train_imgs, test_imgs;
  if (cell_mode) {
    cells = load_cell_data(c);
    train_imgs = cell_ptrs(cells.pool);
    test_imgs = cell_ptrs(cells.held);
  } else {
    images = load_image_data(c);
    train_imgs = image_ptrs(images.train);
    test_imgs = image_ptrs(images.test);
  }
  const auto& mean = cell_mode ? cells.norm_mean : images.norm_mean;
  const auto& stdv = cell_mode ? cells.norm_std : images.norm_std;

  auto policy = policy_from_config(c);
  auto bc = batch_config_from(c, cell_mode, mean, stdv);
  bc.build_equivariance = obj.lambda_equivariance > 0.0;

  auto spec = bundle_spec_from_config(c, infer_predictor_outputs(c, grp), relative);
  auto root = make_root_stream(static_cast<uint64_t>(c.get_int("seed")));
  auto init_rng = root.derive("init");
  auto bundle = std::make_unique<nn::ModelBundle<S>>(
      nn::ModelBundle<S>::build(spec, init_rng));

  const int epochs = static_cast<int>(c.get_int("train.epochs"));
  const int batch = static_cast<int>(c.get_int("train.batch_size"));
  const long n = static_cast<long>(train_imgs.size());
  const long steps_per_epoch = std::max<long>(1, n / batch);
  const long total_steps = static_cast<long>(epochs) * steps_per_epoch;
  const long warmup_steps = c.get_int("train.warmup_epochs") * steps_per_epoch;
  const double base_lr = c.get_real("train.base_lr");

  train::SgdMomentum<S> opt(c.get_real("train.momentum"),
                            c.get_real("train.weight_decay"));
  auto aug_large = root.derive("aug.large");
  auto aug_small = root.derive("aug.small");
  auto group_rng = root.derive("group.sample");

  std::set<long> ckpt_epochs;
  for (long e : c.get_int_list("train.checkpoint_epochs")) ckpt_epochs.insert(e);
  const long eval_every = std::max<long>(1, c.get_int("train.eval_every"));

  eval::MetricsCsv csv(out_dir / "metrics.csv");
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);

  double ema_inv = std::numeric_limits<double>::quiet_NaN();
  double ema_eq = std::numeric_limits<double>::quiet_NaN();
  auto ema_update = [](double& ema, double v) {
    if (!std::isfinite(v)) return;
    ema = std::isfinite(ema) ? 0.9 * ema + 0.1 * v : v;
  };

  std::map<std::string, double> final_metrics;
  long step = 0;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    auto order_rng = root.derive("order", static_cast<uint64_t>(epoch));
    order_rng.shuffle(order.begin(), order.end());
    double ep_total = 0, ep_issl = 0, ep_eq = 0, last_lr = 0;
    for (long b = 0; b < steps_per_epoch; ++b) {
      std::vector<const Image*> batch_imgs;
      batch_imgs.reserve(batch);
      for (long i = b * batch; i < (b + 1) * batch && i < n; ++i)
        batch_imgs.push_back(train_imgs[order[i]]);
      auto views = train::build_essl_batch<S>(
          batch_imgs, grp, policy, bc,
          train::ViewRngs{aug_large, aug_small, group_rng});
      double lr = train::lr_at(step, base_lr, warmup_steps, total_steps);
      auto stats = train::train_step<S>(*bundle, views, obj, opt, lr, base_lr);
      ep_total += static_cast<double>(stats.total);
      ep_issl += static_cast<double>(stats.issl);
      ep_eq += static_cast<double>(stats.equivariance);
      ema_update(ema_inv, stats.invariance_measure);
      ema_update(ema_eq, stats.equivariance_measure);
      last_lr = lr;
      ++step;
    }

    eval::MetricsRecord row;
    row.epoch = epoch;
    row.step = step;
    row.loss_total = ep_total / static_cast<double>(steps_per_epoch);
    row.loss_issl = ep_issl / static_cast<double>(steps_per_epoch);
    row.loss_equiv = ep_eq / static_cast<double>(steps_per_epoch);
    row.lr = last_lr;
    row.invariance_measure = ema_inv;
    row.equivariance_measure = ema_eq;

    const bool eval_now = !cell_mode && (epoch % eval_every == 0 || epoch == epochs);
    if (eval_now) {
      auto bank = eval::extract_features<S>(*bundle->f, train_imgs, mean, stdv);
      auto queries = eval::extract_features<S>(*bundle->f, test_imgs, mean, stdv);
      row.knn_acc = eval::knn_probe<S>(bank, labels_of(images.train), queries,
                                       labels_of(images.test));
      final_metrics["knn_acc"] = row.knn_acc;
    }
    csv.append(row);
    final_metrics["loss_total"] = row.loss_total;
    final_metrics["loss_issl"] = row.loss_issl;
    final_metrics["loss_equiv"] = row.loss_equiv;
    if (std::isfinite(ema_inv)) final_metrics["invariance_measure"] = ema_inv;
    if (std::isfinite(ema_eq)) final_metrics["equivariance_measure"] = ema_eq;

    if (ckpt_epochs.count(epoch)) {
      fs::create_directories(out_dir / "checkpoints");
      nn::save_checkpoint<S>(
          (out_dir / "checkpoints" / ("epoch_" + std::to_string(epoch) + ".ckpt")).string(),
          *bundle);
    }
  }
  fs::create_directories(out_dir / "checkpoints");
  nn::save_checkpoint<S>((out_dir / "checkpoints" / "final.ckpt").string(), *bundle);

  // Relative-orientation protocol: a 4-way orientation linear probe over
  // frozen features of canonically rotated inputs.
  if (c.get("experiment") == "relative_orientation") {
    auto rot = group(GroupName::kFourFoldRotations);
    auto build_rotated = [&](const std::vector<const Image*>& base, size_t cap,
                             std::vector<Image>& store, std::vector<int>& lab) {
      size_t take = std::min(cap, base.size());
      store.reserve(4 * take);
      for (int k = 0; k < 4; ++k)
        for (size_t i = 0; i < take; ++i) {
          store.push_back(apply(rot.element(k), *base[i]));
          lab.push_back(k);
        }
    };
    std::vector<Image> tr_store, te_store;
    std::vector<int> tr_lab, te_lab;
    build_rotated(train_imgs, 2500, tr_store, tr_lab);
    build_rotated(test_imgs, 2000, te_store, te_lab);
    std::vector<const Image*> trp, tep;
    for (auto& im : tr_store) trp.push_back(&im);
    for (auto& im : te_store) tep.push_back(&im);
    auto trf = eval::extract_features<S>(*bundle->f, trp, mean, stdv);
    auto tef = eval::extract_features<S>(*bundle->f, tep, mean, stdv);
    eval::LinearProbeOptions po;
    po.epochs = static_cast<int>(c.get_int("probe.epochs"));
    po.base_lr = c.get_real("probe.base_lr");
    po.batch_size = static_cast<int>(c.get_int("probe.batch_size"));
    po.seed0 = static_cast<uint64_t>(c.get_int("seed")) + 101;
    double acc = eval::rotation_prediction_probe<S>(trf, tr_lab, tef, te_lab, 4, po);
    final_metrics["rot_pred_acc"] = acc;
    eval::MetricsRecord row;
    row.epoch = epochs;
    row.step = step;
    row.rot_pred_acc = acc;
    csv.append(row);
  }

  PretrainOutput<S> out;
  out.metrics = std::move(final_metrics);
  out.bundle = std::move(bundle);
  return out;
}

// ---------------------------------------------------------------------------
// Regression fine-tuning.
// ---------------------------------------------------------------------------

template <class S>
std::map<std::string, double> finetune_impl(const Config& c, const fs::path& out_dir) {
  auto cells = load_cell_data(c);
  auto grp = group(*group_from_string(c.get("group.name")));
  auto spec = bundle_spec_from_config(c, infer_predictor_outputs(c, grp),
                                      c.get_bool("train.relative_mode"));
  auto root = make_root_stream(static_cast<uint64_t>(c.get_int("seed")));
  auto init_rng = root.derive("init");
  auto bundle = nn::ModelBundle<S>::build(spec, init_rng);
  auto ckpt = c.get("finetune.checkpoint");
  if (!ckpt.empty()) nn::load_checkpoint<S>(resolve_output_dir(ckpt).string(), bundle);

  const bool frozen = c.get("finetune.mode") == "frozen_backbone";
  const int train_count = static_cast<int>(c.get_int("finetune.train_count"));
  if (train_count > static_cast<int>(cells.pool.size()))
    throw std::invalid_argument("finetune: train_count exceeds the pool");

  // Seeded labelled split out of the pretraining pool; the held-out cells
  // are the fixed test set.
  auto split_rng =
      make_root_stream(static_cast<uint64_t>(c.get_int("finetune.split_seed")))
          .derive("finetune.split");
  std::vector<long> pool_idx(cells.pool.size());
  std::iota(pool_idx.begin(), pool_idx.end(), 0);
  split_rng.shuffle(pool_idx.begin(), pool_idx.end());
  pool_idx.resize(train_count);

  const int test_count =
      std::min<int>(static_cast<int>(c.get_int("finetune.test_count")),
                    static_cast<int>(cells.held.size()));

  auto to_batch = [&](const std::vector<const Image*>& imgs) {
    nn::Batch4<S> b(static_cast<int>(imgs.size()), 1, data::kCellSize, data::kCellSize);
    for (size_t i = 0; i < imgs.size(); ++i)
      for (long k = 0; k < b.feat(); ++k)
        b.m(static_cast<long>(i), k) =
            static_cast<S>((imgs[i]->data[k] - cells.norm_mean[0]) / cells.norm_std[0]);
    return b;
  };
  auto labels_mat = [&](const std::vector<const data::RegressionRecord*>& recs) {
    Mat<S> y(static_cast<long>(recs.size()), data::kDosBins);
    for (size_t i = 0; i < recs.size(); ++i)
      for (int j = 0; j < data::kDosBins; ++j)
        y(static_cast<long>(i), j) = static_cast<S>(recs[i]->dos_surrogate[j]);
    return y;
  };

  std::vector<const data::RegressionRecord*> train_recs, test_recs;
  for (long i : pool_idx) train_recs.push_back(&cells.pool[i]);
  for (int i = 0; i < test_count; ++i) test_recs.push_back(&cells.held[i]);

  const int epochs = static_cast<int>(c.get_int("finetune.epochs"));
  const int batch = static_cast<int>(c.get_int("finetune.batch_size"));
  train::Adam<S> opt(c.get_real("finetune.lr"));
  std::vector<nn::Param<S>*> params;
  bundle.collect_finetune(params, frozen);

  eval::MetricsCsv csv(out_dir / "metrics.csv");
  auto evaluate = [&]() {
    Mat<S> preds(static_cast<long>(test_recs.size()), data::kDosBins);
    for (size_t start = 0; start < test_recs.size(); start += 256) {
      size_t cnt = std::min<size_t>(256, test_recs.size() - start);
      std::vector<const Image*> imgs;
      for (size_t i = 0; i < cnt; ++i) imgs.push_back(&test_recs[start + i]->cell.cell);
      auto x = to_batch(imgs);
      Mat<S> feats = bundle.f->forward(x, false);
      preds.middleRows(static_cast<long>(start), static_cast<long>(cnt)) =
          bundle.dos_head->forward(feats, false);
    }
    std::vector<const data::RegressionRecord*> t = test_recs;
    return eval::relative_dos_error<S>(preds, labels_mat(t));
  };

  std::vector<long> order(train_recs.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  double last_err = std::numeric_limits<double>::quiet_NaN();
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    auto order_rng = root.derive("ft.order", static_cast<uint64_t>(epoch));
    order_rng.shuffle(order.begin(), order.end());
    double ep_loss = 0;
    long steps = 0;
    for (size_t b = 0; b + batch <= order.size(); b += batch, ++steps) {
      std::vector<const Image*> imgs;
      std::vector<const data::RegressionRecord*> recs;
      for (int i = 0; i < batch; ++i) {
        recs.push_back(train_recs[order[b + i]]);
        imgs.push_back(&recs.back()->cell.cell);
      }
      auto x = to_batch(imgs);
      for (auto* p : params) p->zero_grad();
      Mat<S> feats = bundle.f->forward(x, !frozen);
      Mat<S> preds = bundle.dos_head->forward(feats, true);
      auto r = loss::l1_loss<S>(preds, labels_mat(recs));
      if (!std::isfinite(static_cast<double>(r.value)))
        throw std::runtime_error("finetune: non-finite loss");
      Mat<S> dfeats = bundle.dos_head->backward(r.d1);
      if (!frozen) bundle.f->backward(dfeats);
      opt.step(params);
      ep_loss += static_cast<double>(r.value);
      ++step;
    }
    eval::MetricsRecord row;
    row.epoch = epoch;
    row.step = step;
    row.loss_total = ep_loss / std::max<long>(1, steps);
    if (epoch % 10 == 0 || epoch == epochs) {
      last_err = evaluate();
      row.rel_dos_error = last_err;
    }
    csv.append(row);
  }
  fs::create_directories(out_dir / "checkpoints");
  nn::save_checkpoint<S>((out_dir / "checkpoints" / "final.ckpt").string(), bundle);
  return {{"rel_dos_error", last_err}};
}

// ---------------------------------------------------------------------------
// Proposition check.
// ---------------------------------------------------------------------------

std::map<std::string, double> proposition_check(const Config& c, const fs::path& out_dir) {
  auto grp = group(*group_from_string(c.get("group.name")));
  auto table = theory::GroupTable::from(grp);

  std::ofstream os(out_dir / "report.txt");
  auto dom = theory::make_free_domain(table, 3, theory::EncoderModel::kInjective);
  auto report = theory::verify_proposition(dom);
  os << "# free action, injective encoder, 3 orbit representatives\n"
     << report.serialize() << "\n";

  auto mates = theory::make_orbit_mate_domain(table, 2, 1);
  auto mate_report = theory::verify_proposition(mates);
  os << "# dataset containing two orbit mates\n" << mate_report.serialize() << "\n";

  auto invariant =
      theory::make_free_domain(table, 3, theory::EncoderModel::kGroupInvariant);
  auto inv_report = theory::verify_proposition(invariant);
  os << "# group-invariant encoder\n" << inv_report.serialize() << "\n";

  bool ok = report.all_true() && !mate_report.assumption_holds &&
            (grp.order == 1 || !inv_report.assumption_holds);
  std::cout << report.serialize();
  return {{"proposition_all_true", report.all_true() ? 1.0 : 0.0},
          {"violations_detected", ok ? 1.0 : 0.0}};
}

// ---------------------------------------------------------------------------
// Sweeps.
// ---------------------------------------------------------------------------

RunResult run_child(Config child, const std::string& dir) {
  child.set("output_dir", dir);
  return run_experiment(child);
}

std::map<std::string, double> sweep_lambda(const Config& c, const fs::path& out_dir) {
  std::ofstream os(out_dir / "sweep.csv");
  os << "lambda,knn_acc\n";
  double best = 0, best_lambda = 0;
  for (double lam : c.get_real_list("sweep.lambdas")) {
    Config child = c;
    child.set("experiment", "pretrain");
    child.set("objective.lambda", std::to_string(lam));
    auto r = run_child(child, c.get("output_dir") + "/lambda_" + std::to_string(lam));
    double knn = r.final_metrics.count("knn_acc") ? r.final_metrics.at("knn_acc") : 0.0;
    os << lam << ',' << knn << "\n";
    if (knn > best) {
      best = knn;
      best_lambda = lam;
    }
  }
  return {{"best_lambda", best_lambda}, {"best_knn_acc", best}};
}

std::map<std::string, double> sweep_aug_levels(const Config& c, const fs::path& out_dir) {
  std::ofstream os(out_dir / "sweep.csv");
  os << "level,knn_acc,rot_pred_acc\n";
  std::map<std::string, double> out;
  for (long level : c.get_int_list("sweep.levels")) {
    Config child = c;
    child.set("experiment", "relative_orientation");  // reuse the rotation probe
    child.set("train.relative_mode", "0");
    child.set("policy.level", std::to_string(level));
    auto r = run_child(child, c.get("output_dir") + "/level_" + std::to_string(level));
    double knn = r.final_metrics.count("knn_acc") ? r.final_metrics.at("knn_acc") : 0.0;
    double rot =
        r.final_metrics.count("rot_pred_acc") ? r.final_metrics.at("rot_pred_acc") : 0.0;
    os << level << ',' << knn << ',' << rot << "\n";
    out["knn_level_" + std::to_string(level)] = knn;
    out["rot_level_" + std::to_string(level)] = rot;
  }
  return out;
}

std::map<std::string, double> sweep_sensitivity(const Config& c, const fs::path& out_dir) {
  std::ofstream os(out_dir / "sweep.csv");
  os << "transform,arm,knn_acc\n";
  Config base = c;
  base.set("experiment", "pretrain");
  base.set("objective.lambda", "0.0");
  base.set("policy.prepend_group", "");
  auto baseline = run_child(base, c.get("output_dir") + "/baseline");
  double base_knn = baseline.final_metrics.count("knn_acc")
                        ? baseline.final_metrics.at("knn_acc")
                        : 0.0;
  os << "none,baseline," << base_knn << "\n";
  std::map<std::string, double> out{{"baseline", base_knn}};
  for (const auto& t : c.get_list("sweep.transforms")) {
    Config sens = base;
    sens.set("group.name", t);
    sens.set("objective.lambda", "0.4");
    sens.set("model.predictor_outputs", "0");
    auto rs = run_child(sens, c.get("output_dir") + "/" + t + "_sensitive");
    double ks = rs.final_metrics.count("knn_acc") ? rs.final_metrics.at("knn_acc") : 0.0;
    os << t << ",sensitive," << ks << "\n";
    out[t + "_sensitive"] = ks;

    Config insens = base;
    insens.set("policy.prepend_group", t);
    auto ri = run_child(insens, c.get("output_dir") + "/" + t + "_insensitive");
    double ki = ri.final_metrics.count("knn_acc") ? ri.final_metrics.at("knn_acc") : 0.0;
    os << t << ",insensitive," << ki << "\n";
    out[t + "_insensitive"] = ki;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probe / diagnose over a checkpoint.
// ---------------------------------------------------------------------------

template <class S>
std::map<std::string, double> probe_impl(const Config& c, const fs::path& out_dir) {
  auto images = load_image_data(c);
  auto grp = group(*group_from_string(c.get("group.name")));
  auto spec = bundle_spec_from_config(c, infer_predictor_outputs(c, grp),
                                      c.get_bool("train.relative_mode"));
  auto root = make_root_stream(static_cast<uint64_t>(c.get_int("seed")));
  auto init_rng = root.derive("init");
  auto bundle = nn::ModelBundle<S>::build(spec, init_rng);
  auto ckpt = c.get("probe.checkpoint");
  if (ckpt.empty()) throw std::invalid_argument("probe: probe.checkpoint is required");
  nn::load_checkpoint<S>(resolve_output_dir(ckpt).string(), bundle);

  auto bank = eval::extract_features<S>(*bundle.f, image_ptrs(images.train),
                                        images.norm_mean, images.norm_std);
  auto queries = eval::extract_features<S>(*bundle.f, image_ptrs(images.test),
                                           images.norm_mean, images.norm_std);
  std::map<std::string, double> out;
  eval::MetricsCsv csv(out_dir / "metrics.csv");
  eval::MetricsRecord row;
  auto kind = c.get("probe.kind");
  if (kind == "knn") {
    row.knn_acc = eval::knn_probe<S>(bank, labels_of(images.train), queries,
                                     labels_of(images.test));
    out["knn_acc"] = row.knn_acc;
  } else if (kind == "linear") {
    eval::LinearProbeOptions po;
    po.epochs = static_cast<int>(c.get_int("probe.epochs"));
    po.base_lr = c.get_real("probe.base_lr");
    po.batch_size = static_cast<int>(c.get_int("probe.batch_size"));
    po.seeds = static_cast<int>(c.get_int("probe.seeds"));
    auto r = eval::linear_probe<S>(bank, labels_of(images.train), queries,
                                   labels_of(images.test), images.num_classes, po);
    row.linear_acc = r.mean;
    out["linear_acc"] = r.mean;
    out["linear_acc_std"] = r.stddev;
  } else {
    auto rot = group(GroupName::kFourFoldRotations);
    std::vector<Image> tr_store, te_store;
    std::vector<int> tr_lab, te_lab;
    for (int k = 0; k < 4; ++k) {
      for (size_t i = 0; i < std::min<size_t>(2500, images.train.size()); ++i) {
        tr_store.push_back(apply(rot.element(k), images.train[i].pixels));
        tr_lab.push_back(k);
      }
      for (size_t i = 0; i < images.test.size(); ++i) {
        te_store.push_back(apply(rot.element(k), images.test[i].pixels));
        te_lab.push_back(k);
      }
    }
    std::vector<const Image*> trp, tep;
    for (auto& im : tr_store) trp.push_back(&im);
    for (auto& im : te_store) tep.push_back(&im);
    auto trf = eval::extract_features<S>(*bundle.f, trp, images.norm_mean, images.norm_std);
    auto tef = eval::extract_features<S>(*bundle.f, tep, images.norm_mean, images.norm_std);
    eval::LinearProbeOptions po;
    po.epochs = static_cast<int>(c.get_int("probe.epochs"));
    po.base_lr = c.get_real("probe.base_lr");
    row.rot_pred_acc = eval::rotation_prediction_probe<S>(trf, tr_lab, tef, te_lab, 4, po);
    out["rot_pred_acc"] = row.rot_pred_acc;
  }
  csv.append(row);
  return out;
}

template <class S>
std::map<std::string, double> diagnose_impl(const Config& c, const fs::path& out_dir) {
  auto images = load_image_data(c);
  auto grp = group(*group_from_string(c.get("group.name")));
  auto spec = bundle_spec_from_config(c, infer_predictor_outputs(c, grp),
                                      c.get_bool("train.relative_mode"));
  auto root = make_root_stream(static_cast<uint64_t>(c.get_int("seed")));
  auto init_rng = root.derive("init");
  auto bundle = nn::ModelBundle<S>::build(spec, init_rng);
  auto ckpt = c.get("probe.checkpoint");
  if (!ckpt.empty()) nn::load_checkpoint<S>(resolve_output_dir(ckpt).string(), bundle);

  auto policy = policy_from_config(c);
  auto bc = batch_config_from(c, false, images.norm_mean, images.norm_std);
  auto aug_large = root.derive("aug.large");
  auto aug_small = root.derive("aug.small");
  auto group_rng = root.derive("group.sample");

  double inv_acc = 0, eq_acc = 0;
  int batches = 0;
  const int batch = std::min<int>(256, static_cast<int>(images.test.size()));
  for (int b = 0; b < 4; ++b) {
    std::vector<const Image*> imgs;
    for (int i = 0; i < batch; ++i)
      imgs.push_back(&images.test[(b * batch + i) % images.test.size()].pixels);
    auto views = train::build_essl_batch<S>(imgs, grp, policy, bc,
                                            train::ViewRngs{aug_large, aug_small, group_rng});
    Mat<S> f1 = bundle.f->forward(views.large_a, false);
    Mat<S> f2 = bundle.f->forward(views.large_b, false);
    inv_acc += eval::invariance_measure<S>(f1, f2);
    if (views.has_equivariance && views.rows_per_record == 4) {
      Mat<S> fq = bundle.f->forward(views.small_views, false);
      eq_acc += eval::equivariance_measure<S>(fq, batch);
    }
    ++batches;
  }
  std::map<std::string, double> out;
  out["invariance_measure"] = inv_acc / batches;
  if (eq_acc != 0) out["equivariance_measure"] = eq_acc / batches;
  eval::MetricsCsv csv(out_dir / "metrics.csv");
  eval::MetricsRecord row;
  row.invariance_measure = out["invariance_measure"];
  if (out.count("equivariance_measure"))
    row.equivariance_measure = out["equivariance_measure"];
  csv.append(row);
  return out;
}

}  // namespace

RunResult run_experiment(const Config& c) {
  Eigen::setNbThreads(omp_get_max_threads());
  RunResult result;
  result.output_dir = resolve_output_dir(c.get("output_dir"));
  fs::create_directories(result.output_dir);
  c.save(result.output_dir / "config.cfg");

  const auto experiment = c.get("experiment");
  const bool f64 = c.get("dtype") == "float64";
  try {
    if (experiment == "pretrain" || experiment == "relative_orientation") {
      result.final_metrics =
          f64 ? pretrain_impl<double>(c, result.output_dir).metrics
              : pretrain_impl<float>(c, result.output_dir).metrics;
    } else if (experiment == "finetune") {
      result.final_metrics = f64 ? finetune_impl<double>(c, result.output_dir)
                                 : finetune_impl<float>(c, result.output_dir);
    } else if (experiment == "probe") {
      result.final_metrics = f64 ? probe_impl<double>(c, result.output_dir)
                                 : probe_impl<float>(c, result.output_dir);
    } else if (experiment == "diagnose") {
      result.final_metrics = f64 ? diagnose_impl<double>(c, result.output_dir)
                                 : diagnose_impl<float>(c, result.output_dir);
    } else if (experiment == "proposition_check") {
      result.final_metrics = proposition_check(c, result.output_dir);
      if (result.final_metrics.at("proposition_all_true") != 1.0) result.exit_code = 1;
    } else if (experiment == "sweep_lambda") {
      result.final_metrics = sweep_lambda(c, result.output_dir);
    } else if (experiment == "sweep_aug_levels") {
      result.final_metrics = sweep_aug_levels(c, result.output_dir);
    } else if (experiment == "sweep_sensitivity") {
      result.final_metrics = sweep_sensitivity(c, result.output_dir);
    } else {
      throw std::invalid_argument("unknown experiment " + experiment);
    }
  } catch (const std::exception& e) {
    std::ofstream os(result.output_dir / "summary.txt");
    os << "error = " << e.what() << "\n";
    std::cerr << "run failed: " << e.what() << "\n";
    result.exit_code = 2;
    return result;
  }
  write_summary(result.output_dir, result.final_metrics);
  return result;
}

}  // namespace essl::run
