#include <functional>
#include <stdexcept>

#include "essl/config.hpp"

namespace essl::cfg {

namespace {

// --- paper-scale CIFAR recipes -------------------------------------------

Config cifar_base() {
  Config c;
  c.set("experiment", "pretrain");
  c.set("dataset.kind", "cifar10");
  c.set("dataset.root", "data/cifar10");
  c.set("model.encoder", "resnet18_cifar");
  c.set("model.feature_dim", "512");
  c.set("model.projector_hidden", "2048");
  c.set("model.projector_out", "2048");
  c.set("model.predictor_hidden", "2048");
  c.set("policy.level", "4");
  c.set("policy.small_crop_size", "16");
  c.set("group.name", "four_fold_rotations");
  c.set("train.epochs", "800");
  c.set("train.batch_size", "512");
  c.set("train.warmup_epochs", "10");
  c.set("train.weight_decay", "0.0005");
  c.set("train.momentum", "0.9");
  return c;
}

Config cifar_simclr() {
  Config c = cifar_base();
  c.set("objective.issl_kind", "simclr");
  c.set("objective.temperature", "0.5");
  c.set("objective.lambda", "0.0");
  c.set("train.base_lr", "0.03");
  c.set("metadata.source", "cifar_main_results");
  c.set("output_dir", "runs/cifar_simclr");
  return c;
}

Config cifar_e_simclr() {
  Config c = cifar_simclr();
  c.set("objective.lambda", "0.4");
  c.set("train.base_lr", "0.06");
  c.set("output_dir", "runs/cifar_e_simclr");
  return c;
}

Config cifar_simsiam() {
  Config c = cifar_base();
  c.set("objective.issl_kind", "simsiam");
  c.set("objective.lambda", "0.0");
  c.set("train.base_lr", "0.03");
  c.set("train.batch_size", "1024");
  c.set("metadata.source", "cifar_main_results");
  c.set("output_dir", "runs/cifar_simsiam");
  return c;
}

Config cifar_e_simsiam() {
  Config c = cifar_simsiam();
  c.set("objective.lambda", "0.4");
  c.set("train.base_lr", "0.06");
  c.set("train.batch_size", "512");
  c.set("model.predictor_drop_last_relu", "1");
  c.set("output_dir", "runs/cifar_e_simsiam");
  return c;
}

Config with_ablation(Config c, const std::string& ablation, const std::string& dir) {
  c.set("train.ablation", ablation);
  c.set("metadata.source", "cifar_ablations");
  c.set("output_dir", dir);
  if (ablation == "linear_predictor") c.set("model.predictor_depth", "0");
  if (ablation == "disentangled") c.set("model.disentangled", "1");
  if (ablation == "insensitive_instead") {
    c.set("policy.prepend_group", "four_fold_rotations");
    c.set("objective.lambda", "0.0");
  }
  return c;
}

// --- desk-scale recipes ----------------------------------------------------

Config desk_base() {
  Config c;
  c.set("experiment", "pretrain");
  c.set("dataset.kind", "synthetic10");
  c.set("dataset.train_count", "10000");
  c.set("dataset.test_count", "2000");
  c.set("model.encoder", "mlp_backbone");
  c.set("model.feature_dim", "256");
  c.set("model.mlp_hidden", "512");
  c.set("model.projector_hidden", "512");
  c.set("model.projector_out", "128");
  c.set("model.predictor_hidden", "512");
  c.set("policy.level", "4");
  c.set("policy.small_crop_size", "32");  // fixed-input backbone
  c.set("group.name", "four_fold_rotations");
  c.set("train.epochs", "100");
  c.set("train.batch_size", "512");
  c.set("train.warmup_epochs", "10");
  c.set("train.eval_every", "20");
  c.set("metadata.source", "desk_scale");
  return c;
}

Config desk_simclr() {
  Config c = desk_base();
  c.set("objective.issl_kind", "simclr");
  c.set("objective.lambda", "0.0");
  c.set("train.base_lr", "0.03");
  c.set("output_dir", "runs/desk_simclr");
  return c;
}

Config desk_e_simclr() {
  Config c = desk_simclr();
  c.set("objective.lambda", "0.4");
  c.set("train.base_lr", "0.06");
  c.set("output_dir", "runs/desk_e_simclr");
  return c;
}

Config desk_crop_only(Config c, const std::string& dir) {
  c.set("policy.level", "1");
  c.set("metadata.source", "sensitivity_sweep");
  c.set("output_dir", dir);
  return c;
}

Config desk_relative(bool equivariant) {
  Config c = desk_simclr();
  c.set("experiment", "relative_orientation");
  c.set("dataset.orientation_mode", "all_orientations");
  if (equivariant) {
    c.set("objective.lambda", "0.4");
    c.set("train.base_lr", "0.06");
    c.set("train.relative_mode", "1");
  }
  c.set("metadata.source", "relative_orientation_study");
  c.set("output_dir", equivariant ? "runs/desk_relative_e_simclr"
                                  : "runs/desk_relative_simclr");
  return c;
}

// --- photonic-crystal surrogate recipes -------------------------------------

Config phc_base(const std::string& family) {
  Config c;
  c.set("experiment", "pretrain");
  c.set("dataset.kind", family);  // blob | gpm
  c.set("dataset.train_count", "4000");
  c.set("dataset.test_count", "2000");
  c.set("model.encoder", "phc_cnn");
  c.set("model.conv_width", "0.0625");  // channels {4,16,16} at desk scale
  c.set("model.feature_dim", "128");
  c.set("model.projector_hidden", "128");
  c.set("model.projector_out", "64");
  c.set("model.projector_final_norm", "0");
  c.set("model.predictor_hidden", "128");
  c.set("model.reg_h1", "128");
  c.set("model.reg_h2", "96");
  c.set("objective.issl_kind", "simclr");
  c.set("objective.temperature", "0.5");
  c.set("objective.lambda", "0.0");
  c.set("train.epochs", "250");
  c.set("train.batch_size", "512");
  c.set("train.base_lr", "0.01");
  c.set("train.warmup_epochs", "10");
  c.set("train.weight_decay", "0.0001");
  c.set("train.eval_every", "50");
  c.set("train.checkpoint_epochs", "20,50,100,180,250");
  c.set("metadata.source", "phc_finetune_results");
  // Invariance policy: the label-preserving physical ops.
  if (family == "blob") {
    c.set("policy.cell_c4v", "1");
    c.set("group.name", "four_fold_translations");
  } else {
    c.set("policy.cell_rolls", "1");
    c.set("policy.cell_mirrors", "1");
    c.set("group.name", "four_fold_rotations");
    c.set("objective.gpm_binary", "1");
  }
  return c;
}

Config phc_variant(const std::string& family, const std::string& variant) {
  Config c = phc_base(family);
  if (variant == "e_simclr") {
    c.set("objective.lambda", "1.0");
  } else if (variant == "simclr_transform") {
    // The studied transformation joins the invariance policy instead.
    if (family == "blob") {
      c.set("policy.prepend_group", "four_fold_translations");
    } else {
      c.set("policy.prepend_group", "four_fold_rotations");
    }
  } else if (variant != "simclr") {
    throw std::invalid_argument("unknown phc variant " + variant);
  }
  c.set("output_dir", "runs/phc_" + family + "_" + variant);
  return c;
}

Config phc_scaling(const std::string& family, bool equivariant, bool as_augmentation) {
  Config c = phc_base(family);
  // Isolated scaling study: the other physical invariances stay in the
  // augmentation policy for every arm.
  c.set("policy.cell_c4v", "1");
  c.set("policy.cell_rolls", "1");
  c.set("policy.cell_mirrors", "0");
  c.set("objective.gpm_binary", "0");
  c.set("group.name", "scaling");
  c.set("group.s_max", "10.0");
  c.set("objective.prediction_kind", "l1");
  c.set("objective.lambda", equivariant ? "1.0" : "0.0");
  if (as_augmentation) c.set("policy.cell_scaling", "1");
  c.set("metadata.source", "phc_continuous_group");
  std::string tag = equivariant ? "e_scaling" : (as_augmentation ? "scaling_aug" : "simclr");
  c.set("output_dir", "runs/phc_" + family + "_" + tag);
  return c;
}

Config phc_finetune(const std::string& family, const std::string& variant,
                    const std::string& mode) {
  Config c = phc_variant(family, variant);
  c.set("experiment", "finetune");
  c.set("finetune.mode", mode);
  c.set("finetune.epochs", "100");
  c.set("finetune.batch_size", "64");
  c.set("finetune.lr", "0.0001");
  c.set("finetune.train_count", "3000");
  c.set("finetune.test_count", "2000");
  c.set("finetune.checkpoint",
        "runs/phc_" + family + "_" + variant + "/checkpoints/final.ckpt");
  c.set("output_dir", "runs/phc_" + family + "_" + variant + "_ft_" + mode);
  return c;
}

// --- sweeps and checks -------------------------------------------------------

Config sensitivity_sweep() {
  Config c = desk_simclr();
  c.set("experiment", "sweep_sensitivity");
  c.set("policy.level", "1");  // crop-only baseline, transforms added per arm
  c.set("metadata.source", "sensitivity_sweep");
  c.set("output_dir", "runs/sensitivity_sweep");
  return c;
}

Config lambda_sweep() {
  Config c = desk_e_simclr();
  c.set("experiment", "sweep_lambda");
  c.set("sweep.lambdas", "0.0,0.2,0.4,0.6,0.8,1.0");
  c.set("metadata.source", "lambda_tuning");
  c.set("output_dir", "runs/lambda_sweep");
  return c;
}

Config aug_ladder() {
  // Pure rotation prediction at each augmentation level, probing the
  // features with kNN and the rotation head.
  Config c = desk_base();
  c.set("experiment", "sweep_aug_levels");
  c.set("objective.issl_kind", "none");
  c.set("objective.lambda", "1.0");
  c.set("train.base_lr", "0.06");
  c.set("metadata.source", "augmentation_ladder");
  c.set("output_dir", "runs/aug_ladder");
  return c;
}

Config prop_check(const std::string& which) {
  Config c;
  c.set("experiment", "proposition_check");
  c.set("group.name", which);
  c.set("metadata.source", "equivariance_proposition");
  c.set("output_dir", "runs/prop_check_" + which);
  return c;
}

Config tiny_smoke() {
  Config c = desk_e_simclr();
  c.set("dataset.train_count", "256");
  c.set("dataset.test_count", "64");
  c.set("model.mlp_hidden", "64");
  c.set("model.feature_dim", "32");
  c.set("model.projector_hidden", "64");
  c.set("model.projector_out", "16");
  c.set("model.predictor_hidden", "64");
  c.set("train.epochs", "2");
  c.set("train.batch_size", "64");
  c.set("train.warmup_epochs", "1");
  c.set("train.eval_every", "1");
  c.set("metadata.source", "smoke");
  c.set("output_dir", "runs/tiny_smoke");
  return c;
}

const std::map<std::string, std::function<Config()>>& registry() {
  static const std::map<std::string, std::function<Config()>> r = {
      {"cifar_simclr", cifar_simclr},
      {"cifar_e_simclr", cifar_e_simclr},
      {"cifar_simsiam", cifar_simsiam},
      {"cifar_e_simsiam", cifar_e_simsiam},
      {"cifar_e_simclr_single_rotation",
       [] {
         return with_ablation(cifar_e_simclr(), "single_random_rotation",
                              "runs/cifar_e_simclr_single_rotation");
       }},
      {"cifar_e_simclr_linear_predictor",
       [] {
         return with_ablation(cifar_e_simclr(), "linear_predictor",
                              "runs/cifar_e_simclr_linear_predictor");
       }},
      {"cifar_e_simclr_no_ssl_aug",
       [] {
         return with_ablation(cifar_e_simclr(), "no_ssl_aug_on_equiv_views",
                              "runs/cifar_e_simclr_no_ssl_aug");
       }},
      {"cifar_e_simclr_disentangled",
       [] {
         return with_ablation(cifar_e_simclr(), "disentangled",
                              "runs/cifar_e_simclr_disentangled");
       }},
      {"cifar_insensitive_rotations",
       [] {
         return with_ablation(cifar_simclr(), "insensitive_instead",
                              "runs/cifar_insensitive_rotations");
       }},
      {"cifar_e_simclr_large_crop",
       [] {
         return with_ablation(cifar_e_simclr(), "large_crop_single",
                              "runs/cifar_e_simclr_large_crop");
       }},
      {"cifar_mlp_simclr",
       [] {
         Config c = cifar_simclr();
         c.set("model.encoder", "mlp_backbone");
         c.set("model.mlp_hidden", "2048");
         c.set("policy.small_crop_size", "32");
         c.set("metadata.source", "fc_backbone_study");
         c.set("output_dir", "runs/cifar_mlp_simclr");
         return c;
       }},
      {"cifar_mlp_e_simclr",
       [] {
         Config c = cifar_e_simclr();
         c.set("model.encoder", "mlp_backbone");
         c.set("model.mlp_hidden", "2048");
         c.set("policy.small_crop_size", "32");
         c.set("metadata.source", "fc_backbone_study");
         c.set("output_dir", "runs/cifar_mlp_e_simclr");
         return c;
       }},

      {"desk_simclr", desk_simclr},
      {"desk_e_simclr", desk_e_simclr},
      {"desk_simsiam",
       [] {
         Config c = desk_simclr();
         c.set("objective.issl_kind", "simsiam");
         c.set("output_dir", "runs/desk_simsiam");
         return c;
       }},
      {"desk_e_simsiam",
       [] {
         Config c = desk_e_simclr();
         c.set("objective.issl_kind", "simsiam");
         c.set("output_dir", "runs/desk_e_simsiam");
         return c;
       }},
      {"desk_crop_baseline",
       [] { return desk_crop_only(desk_simclr(), "runs/desk_crop_baseline"); }},
      {"desk_rot_sensitive",
       [] { return desk_crop_only(desk_e_simclr(), "runs/desk_rot_sensitive"); }},
      {"desk_rot_insensitive",
       [] {
         Config c = desk_crop_only(desk_simclr(), "runs/desk_rot_insensitive");
         c.set("policy.prepend_group", "four_fold_rotations");
         c.set("train.ablation", "insensitive_instead");
         return c;
       }},
      {"desk_relative_simclr", [] { return desk_relative(false); }},
      {"desk_relative_e_simclr", [] { return desk_relative(true); }},

      {"phc_blob_simclr", [] { return phc_variant("blob", "simclr"); }},
      {"phc_blob_simclr_transform",
       [] { return phc_variant("blob", "simclr_transform"); }},
      {"phc_blob_e_simclr", [] { return phc_variant("blob", "e_simclr"); }},
      {"phc_gpm_simclr", [] { return phc_variant("gpm", "simclr"); }},
      {"phc_gpm_simclr_transform",
       [] { return phc_variant("gpm", "simclr_transform"); }},
      {"phc_gpm_e_simclr", [] { return phc_variant("gpm", "e_simclr"); }},
      {"phc_blob_scaling_simclr", [] { return phc_scaling("blob", false, false); }},
      {"phc_blob_scaling_aug", [] { return phc_scaling("blob", false, true); }},
      {"phc_blob_e_scaling", [] { return phc_scaling("blob", true, false); }},
      {"phc_blob_finetune_e_simclr",
       [] { return phc_finetune("blob", "e_simclr", "full"); }},
      {"phc_blob_finetune_simclr", [] { return phc_finetune("blob", "simclr", "full"); }},
      {"phc_blob_finetune_frozen",
       [] { return phc_finetune("blob", "e_simclr", "frozen_backbone"); }},

      {"sensitivity_sweep", sensitivity_sweep},
      {"lambda_sweep", lambda_sweep},
      {"aug_ladder", aug_ladder},
      {"prop_check_c4", [] { return prop_check("four_fold_rotations"); }},
      {"prop_check_klein", [] { return prop_check("four_fold_translations"); }},
      {"prop_check_jigsaw", [] { return prop_check("jigsaw_2x2"); }},
      {"tiny_smoke", tiny_smoke},
  };
  return r;
}

}  // namespace

Config preset(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end()) {
    std::string known;
    for (const auto& [n, fn] : registry()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown preset '" + name + "'; known presets: " + known);
  }
  return it->second();
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [n, fn] : registry()) out.push_back(n);
  return out;
}

}  // namespace essl::cfg
