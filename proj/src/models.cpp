#include "essl/models.hpp"

#include <fstream>

namespace essl::nn {

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::kResnet18Cifar: return "resnet18_cifar";
    case EncoderKind::kResnet18Standard: return "resnet18_standard";
    case EncoderKind::kMlpBackbone: return "mlp_backbone";
    case EncoderKind::kPhcCnn: return "phc_cnn";
  }
  return "?";
}

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::kLayerNorm: return "layer_norm";
    case NormKind::kBatchNorm: return "batch_norm";
    case NormKind::kNone: return "none";
  }
  return "?";
}

EncoderSpec EncoderSpec::resnet18_cifar() {
  EncoderSpec s;
  s.kind = EncoderKind::kResnet18Cifar;
  s.feature_dim = 512;
  return s;
}

EncoderSpec EncoderSpec::resnet18_standard() {
  EncoderSpec s;
  s.kind = EncoderKind::kResnet18Standard;
  s.feature_dim = 512;
  return s;
}

EncoderSpec EncoderSpec::mlp_backbone() {
  EncoderSpec s;
  s.kind = EncoderKind::kMlpBackbone;
  s.feature_dim = 512;
  s.mlp_hidden = 2048;
  s.mlp_input_hw = 32;
  return s;
}

EncoderSpec EncoderSpec::phc_cnn() {
  EncoderSpec s;
  s.kind = EncoderKind::kPhcCnn;
  s.feature_dim = 1024;
  s.input_channels = 1;
  return s;
}

std::string EncoderSpec::describe() const {
  std::ostringstream os;
  os << "encoder.kind=" << to_string(kind) << "\nencoder.feature_dim=" << feature_dim
     << "\nencoder.input_channels=" << input_channels
     << "\nencoder.mlp_input_hw=" << mlp_input_hw << "\nencoder.mlp_hidden=" << mlp_hidden
     << "\nencoder.conv_width=" << conv_width
     << "\nencoder.zero_init_residual=" << (zero_init_residual ? 1 : 0) << "\n";
  return os.str();
}

ProjectorSpec ProjectorSpec::cifar(long input_dim) {
  ProjectorSpec s;
  s.depth = 2;
  s.input_dim = input_dim;
  s.hidden_dim = 2048;
  s.output_dim = 2048;
  s.norm = NormKind::kBatchNorm;
  s.final_norm = true;
  s.final_norm_affine = false;
  return s;
}

ProjectorSpec ProjectorSpec::phc(long input_dim) {
  ProjectorSpec s;
  s.depth = 2;
  s.input_dim = input_dim;
  s.hidden_dim = 512;
  s.output_dim = 256;
  s.norm = NormKind::kBatchNorm;
  s.final_norm = false;
  return s;
}

std::string ProjectorSpec::describe() const {
  std::ostringstream os;
  os << "projector.depth=" << depth << "\nprojector.input_dim=" << input_dim
     << "\nprojector.hidden_dim=" << hidden_dim << "\nprojector.output_dim=" << output_dim
     << "\nprojector.norm=" << to_string(norm) << "\nprojector.final_norm=" << final_norm
     << "\nprojector.final_norm_affine=" << final_norm_affine << "\n";
  return os.str();
}

PredictorSpec PredictorSpec::cifar(long input_dim, long num_outputs) {
  PredictorSpec s;
  s.depth = 2;
  s.input_dim = input_dim;
  s.hidden_dim = 2048;
  s.num_outputs = num_outputs;
  s.norm = NormKind::kLayerNorm;
  return s;
}

PredictorSpec PredictorSpec::imagenet(long input_dim, long num_outputs) {
  PredictorSpec s;
  s.depth = 3;
  s.input_dim = input_dim;
  s.hidden_dim = 2048;
  s.num_outputs = num_outputs;
  s.norm = NormKind::kLayerNorm;
  s.drop_last_relu = true;
  return s;
}

PredictorSpec PredictorSpec::phc(long input_dim, long num_outputs) {
  PredictorSpec s;
  s.depth = 2;
  s.input_dim = input_dim;
  s.hidden_dim = 512;
  s.num_outputs = num_outputs;
  s.norm = NormKind::kLayerNorm;
  return s;
}

std::string PredictorSpec::describe() const {
  std::ostringstream os;
  os << "predictor.depth=" << depth << "\npredictor.input_dim=" << input_dim
     << "\npredictor.hidden_dim=" << hidden_dim
     << "\npredictor.num_outputs=" << num_outputs << "\npredictor.norm=" << to_string(norm)
     << "\npredictor.drop_last_relu=" << drop_last_relu
     << "\npredictor.input_dim_multiplier=" << input_dim_multiplier
     << "\npredictor.head_bias=" << head_bias << "\n";
  return os.str();
}

std::string BundleSpec::describe() const {
  std::ostringstream os;
  os << encoder.describe() << projector.describe() << predictor.describe()
     << "disentangled=" << disentangled << "\nsimsiam_head=" << simsiam_head
     << "\nsimsiam_bottleneck=" << simsiam_bottleneck
     << "\nregression_head=" << regression_head << "\nreg_h1=" << reg_h1
     << "\nreg_h2=" << reg_h2 << "\nreg_out=" << reg_out << "\n";
  return os.str();
}

namespace detail {

constexpr char kMagic[8] = {'E', 'S', 'S', 'L', 'C', 'K', 'P', '1'};

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_checkpoint_raw(
    const std::string& path, const std::string& spec_text, int scalar_bytes,
    const std::vector<std::tuple<std::string, long, long, const void*>>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(os, 1);
  write_pod<uint32_t>(os, static_cast<uint32_t>(scalar_bytes));
  write_pod<uint32_t>(os, static_cast<uint32_t>(spec_text.size()));
  os.write(spec_text.data(), static_cast<std::streamsize>(spec_text.size()));
  write_pod<uint64_t>(os, tensors.size());
  for (auto& [name, rows, cols, data] : tensors) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint64_t>(os, static_cast<uint64_t>(rows));
    write_pod<uint64_t>(os, static_cast<uint64_t>(cols));
    os.write(reinterpret_cast<const char*>(data),
             static_cast<std::streamsize>(static_cast<size_t>(rows) * cols * scalar_bytes));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

void read_checkpoint_raw(
    const std::string& path, const std::string& expected_spec, int scalar_bytes,
    const std::function<void(const std::string&, long, long, const void*)>& sink) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  auto version = read_pod<uint32_t>(is);
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
  auto bytes = read_pod<uint32_t>(is);
  if (bytes != static_cast<uint32_t>(scalar_bytes))
    throw std::runtime_error("checkpoint: scalar width mismatch");
  auto spec_len = read_pod<uint32_t>(is);
  std::string spec(spec_len, '\0');
  is.read(spec.data(), spec_len);
  if (spec != expected_spec)
    throw std::runtime_error(
        "checkpoint: model spec mismatch; refusing to load.\nstored:\n" + spec +
        "\nexpected:\n" + expected_spec);
  auto count = read_pod<uint64_t>(is);
  std::vector<char> buf;
  for (uint64_t i = 0; i < count; ++i) {
    auto name_len = read_pod<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    auto rows = static_cast<long>(read_pod<uint64_t>(is));
    auto cols = static_cast<long>(read_pod<uint64_t>(is));
    buf.resize(static_cast<size_t>(rows) * cols * scalar_bytes);
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor " + name);
    sink(name, rows, cols, buf.data());
  }
}

}  // namespace detail

}  // namespace essl::nn
