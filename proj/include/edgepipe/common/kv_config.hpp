#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace edgepipe {

// Line-oriented "key = value" configuration. '#' starts a comment, blank
// lines are ignored, later keys override earlier ones. Insertion order of
// first appearance is kept so prefixed groups (task.*, episode.*) enumerate
// in file order.
class KvConfig {
 public:
  static KvConfig parse(std::istream& in, const std::string& source = "<string>");
  static KvConfig parse_string(const std::string& text, const std::string& source = "<string>");
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Keys in first-appearance order.
  const std::vector<std::string>& keys() const { return order_; }
  // Distinct second components of keys shaped "<prefix>.<name>[.<rest>]",
  // in first-appearance order.
  std::vector<std::string> group_names(const std::string& prefix) const;

  void set(const std::string& key, const std::string& value);
  const std::string& source() const { return source_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  std::string source_;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',');
std::string trim(const std::string& text);

}  // namespace edgepipe
