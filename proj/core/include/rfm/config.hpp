#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rfm {

/// Flat key-value configuration.
///
///   # comment
///   key = value
///   list_key = 1e-10, 1e-8, 1e-6
///   include = relative/or/absolute/path.cfg
///
/// Keys are case-sensitive identifiers ([A-Za-z0-9_.-]). Values run to the end
/// of the line (a trailing '#' starts a comment) and are trimmed. An include is
/// expanded in place, so keys after it override the included file; paths are
/// resolved relative to the including file. Later assignments win.
class Config {
 public:
  Config() = default;

  static Config load(const std::filesystem::path& path);
  /// `origin` names the source in error messages; includes resolve against `base`.
  static Config parse(const std::string& text, const std::filesystem::path& base = ".",
                      const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::size_t> get_size_list(const std::string& key, std::vector<std::size_t> fallback) const;
  std::vector<std::uint64_t> get_seed_list(const std::string& key, std::vector<std::uint64_t> fallback) const;

  /// Keys that no getter has asked for; used to reject typos.
  std::vector<std::string> unused_keys() const;

 private:
  void parse_into(const std::string& text, const std::filesystem::path& base, const std::string& origin, int depth);
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
};

/// Comma-separated list parsing shared with the CLI ("0,1,2" or "0-4").
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<std::string> split_list(const std::string& text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text) noexcept;

}  // namespace rfm
