#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace edgepipe {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d);

// Accepts "YYYY-MM-DDTHH:MM:SS[.frac][Z|+HH:MM|-HH:MM]", a space instead of
// 'T', or a bare integer (already epoch seconds). Fractional seconds are
// truncated.
std::optional<std::int64_t> parse_epoch_seconds(std::string_view text);

// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(std::int64_t epoch_seconds);

}  // namespace edgepipe
