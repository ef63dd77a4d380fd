#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace sles {

using Instant = std::chrono::sys_seconds;
using Minutes = std::chrono::minutes;

// Parses "YYYY-MM-DDTHH:MM:SSZ" (a trailing "Z" or "+00:00" is accepted,
// seconds are optional). Throws ParseError on anything else.
Instant parse_instant(std::string_view text);

// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_instant(Instant t);

inline double hours(Minutes m) { return static_cast<double>(m.count()) / 60.0; }

} // namespace sles
