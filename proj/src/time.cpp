#include "sles/time.hpp"

#include "sles/error.hpp"

#include <charconv>

#include <fmt/core.h>

namespace sles {

namespace {

int read_field(std::string_view text, size_t pos, size_t len)
{
    if (pos + len > text.size()) {
        throw ParseError(fmt::format("truncated timestamp '{}'", text));
    }
    int value = 0;
    auto first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len) {
        throw ParseError(fmt::format("bad timestamp '{}'", text));
    }
    return value;
}

void expect(std::string_view text, size_t pos, char c)
{
    if (pos >= text.size() || text[pos] != c) {
        throw ParseError(fmt::format("bad timestamp '{}'", text));
    }
}

} // namespace

Instant parse_instant(std::string_view text)
{
    using namespace std::chrono;
    const int y = read_field(text, 0, 4);
    expect(text, 4, '-');
    const int mo = read_field(text, 5, 2);
    expect(text, 7, '-');
    const int d = read_field(text, 8, 2);
    if (text.size() < 11 || (text[10] != 'T' && text[10] != ' ')) {
        throw ParseError(fmt::format("bad timestamp '{}'", text));
    }
    const int h = read_field(text, 11, 2);
    expect(text, 13, ':');
    const int mi = read_field(text, 14, 2);
    int s = 0;
    size_t pos = 16;
    if (pos < text.size() && text[pos] == ':') {
        s = read_field(text, 17, 2);
        pos = 19;
    }
    const auto tail = text.substr(pos);
    if (tail != "Z" && tail != "+00:00" && !tail.empty()) {
        throw ParseError(fmt::format("timestamp '{}' is not UTC", text));
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59) {
        throw ParseError(fmt::format("bad timestamp '{}'", text));
    }
    return sys_days{ymd} + std::chrono::hours{h} + minutes{mi} + seconds{s};
}

std::string format_instant(Instant t)
{
    using namespace std::chrono;
    const auto day_start = floor<days>(t);
    const year_month_day ymd{day_start};
    const hh_mm_ss hms{t - day_start};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                       hms.hours().count(), hms.minutes().count(), hms.seconds().count());
}

} // namespace sles
