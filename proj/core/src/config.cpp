#include "rfm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "rfm/error.hpp"

namespace rfm {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool valid_key(const std::string& key) {
  return !key.empty() && std::all_of(key.begin(), key.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c == '-';
  });
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::configuration, "key '" + key + "': expected " + expected + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) bad_value(key, text, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, text, "a number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(key, text, "a non-negative integer");
  return v;
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = to_u64("seeds", trim(item.substr(0, dash)));
      const auto hi = to_u64("seeds", trim(item.substr(dash + 1)));
      if (hi < lo) bad_value("seeds", item, "an increasing range");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(to_u64("seeds", item));
    }
  }
  if (out.empty()) throw Error(ErrorCode::configuration, "seed list is empty");
  return out;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Config cfg;
  cfg.parse_into(ss.str(), path.parent_path(), path.string(), 0);
  return cfg;
}

Config Config::parse(const std::string& text, const std::filesystem::path& base, const std::string& origin) {
  Config cfg;
  cfg.parse_into(text, base, origin, 0);
  return cfg;
}

void Config::parse_into(const std::string& text, const std::filesystem::path& base, const std::string& origin,
                        int depth) {
  if (depth > 16) throw Error(ErrorCode::configuration, "include nesting too deep at " + origin);
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = origin + ":" + std::to_string(number);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::configuration, where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw Error(ErrorCode::configuration, where + ": invalid key '" + key + "'");
    if (key == "include") {
      std::filesystem::path p(value);
      if (p.is_relative()) p = base / p;
      std::ifstream in(p);
      if (!in) throw Error(ErrorCode::io, where + ": cannot read include " + p.string());
      std::stringstream inc;
      inc << in.rdbuf();
      parse_into(inc.str(), p.parent_path(), p.string(), depth + 1);
      continue;
    }
    values_[key] = value;
  }
}

const std::string* Config::find(const std::string& key) const {
  used_[key] = true;
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? *v : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  return v ? to_double(key, *v) : fallback;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  const auto* v = find(key);
  return v ? static_cast<std::size_t>(to_u64(key, *v)) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  bad_value(key, *v, "a boolean");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  const auto* v = find(key);
  return v ? split_list(*v) : std::vector<std::string>{};
}

std::vector<double> Config::get_double_list(const std::string& key, std::vector<double> fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::size_t> Config::get_size_list(const std::string& key, std::vector<std::size_t> fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  for (const auto& item : split_list(*v)) out.push_back(static_cast<std::size_t>(to_u64(key, item)));
  return out;
}

std::vector<std::uint64_t> Config::get_seed_list(const std::string& key, std::vector<std::uint64_t> fallback) const {
  const auto* v = find(key);
  return v ? parse_seed_list(*v) : fallback;
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) out.push_back(key);
  }
  return out;
}

}  // namespace rfm
