#pragma once

#include <string_view>

namespace edgepipe {

// Topics are '/'-separated non-empty levels. Filters may use '+' as a whole
// level to match exactly one level. '#' is not part of the grammar.
bool valid_topic(std::string_view topic);
bool valid_filter(std::string_view filter);
bool topic_matches(std::string_view filter, std::string_view topic);

}  // namespace edgepipe
