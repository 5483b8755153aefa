#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace lutdla::cli {

/// One mapping of the config file. Every read records the effective value
/// (default or given) so the config hash covers defaults too. Keys that were
/// never read are reported by Config::check_unknown().
class Section {
 public:
  Section(YAML::Node node, std::string path, nlohmann::json* effective);

  bool has(const std::string& key) const;
  std::size_t size(const std::string& key, std::size_t fallback);
  std::uint64_t u64(const std::string& key, std::uint64_t fallback);
  double real(const std::string& key, double fallback);  ///< accepts inf / .inf
  bool flag(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<std::size_t> sizes(const std::string& key, const std::vector<std::size_t>& fallback);
  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::string> texts(const std::string& key, const std::vector<std::string>& fallback);

  const std::string& path() const noexcept { return path_; }

 private:
  friend class Config;
  std::optional<YAML::Node> scalar(const std::string& key);
  std::optional<YAML::Node> sequence(const std::string& key);
  std::string where(const std::string& key) const;

  YAML::Node node_;
  std::string path_;
  nlohmann::json* effective_;
  std::set<std::string> read_;
};

class Config {
 public:
  /// Empty config: every section reads its defaults.
  Config();
  static Config load(const std::filesystem::path& path);
  static Config parse(std::string_view text);

  Section& root() { return sections_.front(); }
  /// Nested mapping `key` of `parent`; absent keys give an empty section.
  Section& sub(Section& parent, const std::string& key);

  /// Throws Configuration naming the first key nobody read.
  void check_unknown() const;

  const nlohmann::json& effective() const { return *effective_; }

 private:
  explicit Config(YAML::Node root);

  std::unique_ptr<nlohmann::json> effective_ = std::make_unique<nlohmann::json>(nlohmann::json::object());
  std::deque<Section> sections_;  // stable addresses
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data);

}  // namespace lutdla::cli
