#include "sles/telemetry.hpp"

#include "sles/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <fmt/format.h>

namespace sles {

namespace {

struct Row {
    size_t line_no;
    std::vector<std::string_view> cells;
};

std::vector<Row> split_rows(std::string_view text, std::string_view expected_header)
{
    std::vector<Row> rows;
    size_t line_no = 0;
    size_t pos = 0;
    bool header_seen = false;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) {
            if (pos > text.size()) break;
            continue;
        }
        if (!header_seen) {
            if (line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
            if (line != expected_header) {
                throw ParseError(fmt::format("line 1: expected header '{}'", expected_header));
            }
            header_seen = true;
            continue;
        }
        Row row{line_no, {}};
        size_t start = 0;
        while (true) {
            const size_t comma = line.find(',', start);
            row.cells.push_back(line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw ParseError("empty CSV file");
    return rows;
}

double parse_number(std::string_view cell, size_t line_no)
{
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
        throw ParseError(fmt::format("line {}: '{}' is not a number", line_no, cell));
    }
    return value;
}

Instant parse_time_cell(std::string_view cell, size_t line_no)
{
    try {
        return parse_instant(cell);
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("line {}: {}", line_no, e.what()));
    }
}

void expect_columns(const Row& row, size_t n)
{
    if (row.cells.size() != n) {
        throw ParseError(fmt::format("line {}: expected {} columns, got {}", row.line_no, n, row.cells.size()));
    }
}

// Places a reading at its grid slot, padding skipped slots with missing markers.
void append_on_grid(TimeSeries& s, Instant ts, double value, size_t line_no, std::string_view what)
{
    const auto step = std::chrono::minutes(s.interval_minutes);
    if (s.values.empty()) {
        s.start = ts;
        s.values.push_back(value);
        return;
    }
    const auto last = s.time_at(s.values.size() - 1);
    if (ts <= last) {
        throw ParseError(fmt::format("line {}: non-monotone timestamp {} in series {} (previous {})", line_no,
                                     format_instant(ts), what, format_instant(last)));
    }
    const auto offset = ts - s.start;
    if (offset % step != std::chrono::seconds(0)) {
        throw ParseError(fmt::format("line {}: timestamp {} is off the {}-minute grid", line_no, format_instant(ts),
                                     s.interval_minutes));
    }
    const auto slot = static_cast<size_t>(offset / step);
    s.values.resize(slot, TimeSeries::missing());
    s.values.push_back(value);
}

} // namespace

std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(fmt::format("cannot open '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SeriesCollection parse_telemetry_csv(std::string_view text, int interval_minutes)
{
    if (interval_minutes <= 0) throw InputError("interval_minutes must be positive");
    SeriesCollection out;
    for (const auto& row : split_rows(text, "meter_id,vector,timestamp,value_kwh")) {
        expect_columns(row, 4);
        if (row.cells[0].empty()) throw ParseError(fmt::format("line {}: empty meter_id", row.line_no));
        EnergyVector vec;
        try {
            vec = energy_vector_from_string(row.cells[1]);
        } catch (const ParseError& e) {
            throw ParseError(fmt::format("line {}: {}", row.line_no, e.what()));
        }
        const auto ts = parse_time_cell(row.cells[2], row.line_no);
        const double value = parse_number(row.cells[3], row.line_no);
        if (value < 0.0) throw ParseError(fmt::format("line {}: negative value_kwh", row.line_no));
        SeriesKey key{std::string(row.cells[0]), vec};
        auto [it, inserted] = out.try_emplace(key);
        if (inserted) {
            it->second.interval_minutes = interval_minutes;
            it->second.unit = "kWh";
        }
        append_on_grid(it->second, ts, value, row.line_no,
                       fmt::format("{}/{}", key.first, to_string(key.second)));
    }
    return out;
}

SeriesCollection ingest_csv(const std::string& path, int interval_minutes)
{
    return parse_telemetry_csv(read_text_file(path), interval_minutes);
}

std::string write_telemetry_csv(const SeriesCollection& series)
{
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "meter_id,vector,timestamp,value_kwh\n");
    for (const auto& [key, s] : series) {
        for (size_t i = 0; i < s.values.size(); ++i) {
            if (s.is_missing(i)) continue;
            fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", key.first, to_string(key.second),
                           format_instant(s.time_at(i)), s.values[i]);
        }
    }
    return fmt::to_string(buf);
}

void write_telemetry_csv(const Dataset& data, std::ostream& out)
{
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "meter_id,vector,timestamp,value_kwh\n");
    for (size_t t = 0; t < data.intervals; ++t) {
        const auto ts = format_instant(data.time_at(t + 1));
        for (const auto& m : data.meters) {
            fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", m.meter_id, to_string(m.vector), ts, m.kwh[t]);
        }
        if (buf.size() > (1u << 20)) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<WeatherRecord> parse_weather_csv(std::string_view text)
{
    std::vector<WeatherRecord> out;
    for (const auto& row : split_rows(text, "timestamp,ghi_w_m2,wind_ms,temp_c")) {
        expect_columns(row, 4);
        WeatherRecord w{parse_time_cell(row.cells[0], row.line_no), parse_number(row.cells[1], row.line_no),
                        parse_number(row.cells[2], row.line_no), parse_number(row.cells[3], row.line_no)};
        if (w.ghi_w_m2 < 0.0 || w.wind_ms < 0.0) {
            throw ParseError(fmt::format("line {}: irradiance and wind speed must be non-negative", row.line_no));
        }
        if (!out.empty() && w.timestamp <= out.back().timestamp) {
            throw ParseError(fmt::format("line {}: non-monotone timestamp", row.line_no));
        }
        out.push_back(w);
    }
    return out;
}

std::string write_weather_csv(std::span<const WeatherRecord> weather)
{
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "timestamp,ghi_w_m2,wind_ms,temp_c\n");
    for (const auto& w : weather) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", format_instant(w.timestamp), w.ghi_w_m2, w.wind_ms,
                       w.temp_c);
    }
    return fmt::to_string(buf);
}

TimeSeries parse_carbon_csv(std::string_view text, int interval_minutes)
{
    TimeSeries s;
    s.interval_minutes = interval_minutes;
    s.unit = "kg_per_kwh";
    for (const auto& row : split_rows(text, "timestamp,kg_per_kwh")) {
        expect_columns(row, 2);
        const double v = parse_number(row.cells[1], row.line_no);
        if (v < 0.0) throw ParseError(fmt::format("line {}: negative carbon intensity", row.line_no));
        append_on_grid(s, parse_time_cell(row.cells[0], row.line_no), v, row.line_no, "carbon intensity");
    }
    return s;
}

std::string write_carbon_csv(const TimeSeries& series)
{
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "timestamp,kg_per_kwh\n");
    for (size_t i = 0; i < series.values.size(); ++i) {
        if (series.is_missing(i)) continue;
        fmt::format_to(std::back_inserter(buf), "{},{}\n", format_instant(series.time_at(i)), series.values[i]);
    }
    return fmt::to_string(buf);
}

} // namespace sles
