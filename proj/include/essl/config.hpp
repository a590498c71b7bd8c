#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace essl::cfg {

/// Strict flat-keyed configuration. Every key must exist in the schema,
/// values are type-checked on entry, and serialization emits the fully
/// resolved form (all keys, sorted), so parse -> serialize -> parse is the
/// identity.
class Config {
 public:
  Config();

  static Config parse_file(const std::filesystem::path& path);
  static Config parse_string(const std::string& text);

  /// `key=value`, same validation as a config line.
  void apply_override(const std::string& assignment);

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;  // explicit value or default
  long get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma-split
  std::vector<double> get_real_list(const std::string& key) const;
  std::vector<long> get_int_list(const std::string& key) const;

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  bool operator==(const Config& other) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Built-in experiment presets by name; throws listing the known names on a
/// miss. Every preset tags metadata.source with the result family it
/// reproduces.
Config preset(const std::string& name);
std::vector<std::string> preset_names();

/// Loads a path if it exists, otherwise resolves a preset name.
Config load_config(const std::string& path_or_preset);

}  // namespace essl::cfg
