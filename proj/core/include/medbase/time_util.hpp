#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace medbase {

// UTC, millisecond precision: 2017-06-01T12:00:00.000Z
std::string format_timestamp(std::chrono::system_clock::time_point t);
std::optional<std::chrono::system_clock::time_point> parse_timestamp(std::string_view s);

}  // namespace medbase
