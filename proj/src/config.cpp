#include "essl/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace essl::cfg {

namespace {

enum class VType { kInt, kReal, kBool, kString, kEnum, kList };

struct SchemaEntry {
  VType type;
  std::string def;
  std::vector<std::string> allowed;  // kEnum only
};

const std::map<std::string, SchemaEntry>& schema() {
  static const std::map<std::string, SchemaEntry> s = {
      {"experiment",
       {VType::kEnum,
        "pretrain",
        {"pretrain", "finetune", "probe", "diagnose", "sweep_sensitivity",
         "sweep_lambda", "sweep_aug_levels", "proposition_check",
         "relative_orientation"}}},
      {"seed", {VType::kInt, "1"}},
      {"dtype", {VType::kEnum, "float32", {"float32", "float64"}}},
      {"output_dir", {VType::kString, "runs/run"}},
      {"metadata.source", {VType::kString, ""}},
      {"metadata.note", {VType::kString, ""}},

      {"dataset.kind",
       {VType::kEnum, "synthetic10", {"cifar10", "synthetic10", "blob", "gpm"}}},
      {"dataset.root", {VType::kString, ""}},
      {"dataset.train_fraction", {VType::kReal, "1.0"}},
      {"dataset.train_count", {VType::kInt, "10000"}},
      {"dataset.test_count", {VType::kInt, "2000"}},
      {"dataset.orientation_mode",
       {VType::kEnum, "canonical_only", {"canonical_only", "all_orientations"}}},
      {"dataset.orientation_group", {VType::kString, "four_fold_rotations"}},

      {"group.name", {VType::kString, "four_fold_rotations"}},
      {"group.s_max", {VType::kReal, "10.0"}},

      {"policy.level", {VType::kInt, "4"}},
      {"policy.crop_size", {VType::kInt, "32"}},
      {"policy.crop_scale_lo", {VType::kReal, "0.2"}},
      {"policy.crop_scale_hi", {VType::kReal, "1.0"}},
      {"policy.small_crop_size", {VType::kInt, "16"}},
      {"policy.small_crop_scale_lo", {VType::kReal, "0.2"}},
      {"policy.small_crop_scale_hi", {VType::kReal, "1.0"}},
      {"policy.solarize", {VType::kBool, "0"}},
      {"policy.prepend_group", {VType::kString, ""}},
      {"policy.cell_c4v", {VType::kBool, "0"}},
      {"policy.cell_rolls", {VType::kBool, "0"}},
      {"policy.cell_mirrors", {VType::kBool, "0"}},
      {"policy.cell_scaling", {VType::kBool, "0"}},

      {"model.encoder",
       {VType::kEnum,
        "resnet18_cifar",
        {"resnet18_cifar", "resnet18_standard", "mlp_backbone", "phc_cnn"}}},
      {"model.feature_dim", {VType::kInt, "512"}},
      {"model.mlp_hidden", {VType::kInt, "2048"}},
      {"model.conv_width", {VType::kReal, "1.0"}},
      {"model.zero_init_residual", {VType::kBool, "0"}},
      {"model.projector_hidden", {VType::kInt, "2048"}},
      {"model.projector_out", {VType::kInt, "2048"}},
      {"model.projector_final_norm", {VType::kBool, "1"}},
      {"model.predictor_depth", {VType::kInt, "2"}},
      {"model.predictor_hidden", {VType::kInt, "2048"}},
      {"model.predictor_norm",
       {VType::kEnum, "layer_norm", {"layer_norm", "batch_norm", "none"}}},
      {"model.predictor_drop_last_relu", {VType::kBool, "0"}},
      {"model.predictor_outputs", {VType::kInt, "0"}},  // 0 = infer from group
      {"model.disentangled", {VType::kBool, "0"}},
      {"model.simsiam_bottleneck", {VType::kInt, "512"}},
      {"model.reg_h1", {VType::kInt, "1024"}},
      {"model.reg_h2", {VType::kInt, "512"}},

      {"objective.issl_kind",
       {VType::kEnum, "simclr", {"simclr", "simsiam", "barlow_twins", "none"}}},
      {"objective.temperature", {VType::kReal, "0.5"}},
      {"objective.bt_lambda", {VType::kReal, "0.005"}},
      {"objective.lambda", {VType::kReal, "0.4"}},
      {"objective.prediction_kind",
       {VType::kEnum, "cross_entropy", {"cross_entropy", "l1", "mse"}}},
      {"objective.gpm_binary", {VType::kBool, "0"}},

      {"train.epochs", {VType::kInt, "800"}},
      {"train.batch_size", {VType::kInt, "512"}},
      {"train.base_lr", {VType::kReal, "0.06"}},
      {"train.warmup_epochs", {VType::kInt, "10"}},
      {"train.weight_decay", {VType::kReal, "0.0005"}},
      {"train.momentum", {VType::kReal, "0.9"}},
      {"train.ablation",
       {VType::kEnum,
        "none",
        {"none", "single_random_rotation", "linear_predictor",
         "no_ssl_aug_on_equiv_views", "disentangled", "insensitive_instead",
         "large_crop_single"}}},
      {"train.eval_every", {VType::kInt, "10"}},
      {"train.checkpoint_epochs", {VType::kList, ""}},
      {"train.relative_mode", {VType::kBool, "0"}},

      {"finetune.checkpoint", {VType::kString, ""}},
      {"finetune.mode", {VType::kEnum, "full", {"frozen_backbone", "full"}}},
      {"finetune.epochs", {VType::kInt, "100"}},
      {"finetune.batch_size", {VType::kInt, "64"}},
      {"finetune.lr", {VType::kReal, "0.0001"}},
      {"finetune.train_count", {VType::kInt, "3000"}},
      {"finetune.test_count", {VType::kInt, "2000"}},
      {"finetune.split_seed", {VType::kInt, "0"}},

      {"probe.checkpoint", {VType::kString, ""}},
      {"probe.kind", {VType::kEnum, "knn", {"knn", "linear", "rotation"}}},
      {"probe.epochs", {VType::kInt, "100"}},
      {"probe.base_lr", {VType::kReal, "30.0"}},
      {"probe.batch_size", {VType::kInt, "256"}},
      {"probe.seeds", {VType::kInt, "5"}},

      {"sweep.lambdas", {VType::kList, "0.0,0.2,0.4,0.6,0.8,1.0"}},
      {"sweep.levels", {VType::kList, "0,1,2,3,4,5,6,7"}},
      {"sweep.transforms",
       {VType::kList,
        "four_fold_rotations,horizontal_flips,vertical_flips,jigsaw_2x2,"
        "four_fold_translations,color_inversions,gaussian_blur_levels"}},
  };
  return s;
}

void check_typed(const std::string& key, const SchemaEntry& entry,
                 const std::string& value) {
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("config: bad value for '" + key + "': " + why);
  };
  switch (entry.type) {
    case VType::kInt: {
      size_t pos = 0;
      try {
        (void)std::stoll(value, &pos);
      } catch (...) {
        fail("expected an integer, got '" + value + "'");
      }
      if (pos != value.size()) fail("expected an integer, got '" + value + "'");
      break;
    }
    case VType::kReal: {
      size_t pos = 0;
      try {
        (void)std::stod(value, &pos);
      } catch (...) {
        fail("expected a number, got '" + value + "'");
      }
      if (pos != value.size()) fail("expected a number, got '" + value + "'");
      break;
    }
    case VType::kBool:
      if (value != "0" && value != "1" && value != "true" && value != "false")
        fail("expected a boolean (0/1/true/false), got '" + value + "'");
      break;
    case VType::kEnum: {
      for (const auto& a : entry.allowed)
        if (a == value) return;
      std::string opts;
      for (const auto& a : entry.allowed) opts += (opts.empty() ? "" : ", ") + a;
      fail("expected one of {" + opts + "}, got '" + value + "'");
      break;
    }
    case VType::kString:
    case VType::kList:
      break;
  }
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config::Config() = default;

void Config::set(const std::string& key, const std::string& value) {
  auto it = schema().find(key);
  if (it == schema().end())
    throw std::invalid_argument("config: unknown key '" + key + "'");
  check_typed(key, it->second, value);
  values_[key] = value;
}

std::string Config::get(const std::string& key) const {
  auto it = schema().find(key);
  if (it == schema().end())
    throw std::invalid_argument("config: unknown key '" + key + "'");
  auto v = values_.find(key);
  return v != values_.end() ? v->second : it->second.def;
}

long Config::get_int(const std::string& key) const { return std::stol(get(key)); }
double Config::get_real(const std::string& key) const { return std::stod(get(key)); }

bool Config::get_bool(const std::string& key) const {
  auto v = get(key);
  return v == "1" || v == "true";
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> Config::get_real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_list(key)) out.push_back(std::stod(s));
  return out;
}

std::vector<long> Config::get_int_list(const std::string& key) const {
  std::vector<long> out;
  for (const auto& s : get_list(key)) out.push_back(std::stol(s));
  return out;
}

Config Config::parse_string(const std::string& text) {
  Config c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not 'key = value'");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    try {
      c.set(key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(e.what()) + " (line " +
                                  std::to_string(lineno) + ")");
    }
  }
  return c;
}

Config Config::parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_string(buf.str());
}

void Config::apply_override(const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must be key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string Config::serialize() const {
  std::ostringstream os;
  for (const auto& [key, entry] : schema()) os << key << " = " << get(key) << "\n";
  return os.str();
}

void Config::save(const std::filesystem::path& path) const {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  os << serialize();
  if (!os) throw std::runtime_error("config: cannot write " + path.string());
}

bool Config::operator==(const Config& other) const {
  return serialize() == other.serialize();
}

Config load_config(const std::string& path_or_preset) {
  if (std::filesystem::exists(path_or_preset))
    return Config::parse_file(path_or_preset);
  return preset(path_or_preset);
}

}  // namespace essl::cfg
