#include "edgepipe/bus/topic.hpp"

#include <vector>

namespace edgepipe {

namespace {

std::vector<std::string_view> levels(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto slash = s.find('/', start);
    out.push_back(s.substr(start, slash == std::string_view::npos ? slash : slash - start));
    if (slash == std::string_view::npos) return out;
    start = slash + 1;
  }
}

}  // namespace

bool valid_topic(std::string_view topic) {
  if (topic.empty()) return false;
  for (auto level : levels(topic)) {
    if (level.empty()) return false;
    if (level.find_first_of("+#") != std::string_view::npos) return false;
  }
  return true;
}

bool valid_filter(std::string_view filter) {
  if (filter.empty()) return false;
  for (auto level : levels(filter)) {
    if (level.empty()) return false;
    if (level == "+") continue;
    if (level.find_first_of("+#") != std::string_view::npos) return false;
  }
  return true;
}

bool topic_matches(std::string_view filter, std::string_view topic) {
  const auto f = levels(filter);
  const auto t = levels(topic);
  if (f.size() != t.size()) return false;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] != "+" && f[i] != t[i]) return false;
  }
  return true;
}

}  // namespace edgepipe
