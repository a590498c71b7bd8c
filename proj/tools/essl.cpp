#include <CLI11.hpp>
#include <iostream>

#include "essl/datasets.hpp"
#include "essl/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Equivariant self-supervised learning experiment runner"};
  app.require_subcommand(1);

  std::string config_arg;
  std::vector<std::string> overrides;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a config file or preset");
  run_cmd->add_option("config", config_arg, "Config path or preset name")->required();
  run_cmd->add_option("--override", overrides, "key=value settings applied on top");

  std::vector<std::string> dirs;
  auto* cmp_cmd = app.add_subcommand("compare", "Tabulate final metrics of completed runs");
  cmp_cmd->add_option("dirs", dirs, "Two or more run directories")->required();

  std::string src, dst;
  auto* conv_cmd = app.add_subcommand(
      "convert-dataset", "Ingest a CIFAR-10 binary archive directory into the index layout");
  conv_cmd->add_option("src", src, "Directory with data_batch_*.bin / test_batch.bin")
      ->required();
  conv_cmd->add_option("dst", dst, "Destination dataset root")->required();

  auto* presets_cmd = app.add_subcommand("presets", "List built-in presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto config = essl::cfg::load_config(config_arg);
      for (const auto& o : overrides) config.apply_override(o);
      auto result = essl::run::run_experiment(config);
      for (const auto& [k, v] : result.final_metrics)
        std::cout << k << " = " << v << "\n";
      std::cout << "artifacts: " << result.output_dir.string() << "\n";
      return result.exit_code;
    }
    if (*cmp_cmd) return essl::run::compare_runs(dirs, std::cout);
    if (*conv_cmd) {
      essl::data::convert_cifar_binary(src, dst);
      std::cout << "converted into " << dst << "\n";
      return 0;
    }
    if (*presets_cmd) {
      for (const auto& name : essl::cfg::preset_names()) std::cout << name << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
