#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ns/common.hpp"

namespace ns {

/// Ordered key/value document used by manifests, configs, and reports.
/// Lines are `key = value`; '#' starts a comment; keys may repeat (arrays).
class KeyValueDoc {
 public:
  void add(std::string key, std::string value);
  void add_int(std::string key, std::int64_t value);
  void add_double(std::string key, double value);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::vector<std::string> get_all(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_string() const;
  void save(const std::filesystem::path& path) const;

  static KeyValueDoc parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueDoc load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Full-precision round-trippable formatting for doubles in text files.
std::string format_double(double v);

/// Splits a whitespace-separated record value into fields.
std::vector<std::string> split_fields(const std::string& value);

}  // namespace ns
