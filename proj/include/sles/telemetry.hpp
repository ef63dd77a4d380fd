#pragma once

#include "sles/time.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sles {

class NetworkTopology;

enum class EnergyVector { electric, heat, gas };
std::string_view to_string(EnergyVector v);
EnergyVector energy_vector_from_string(std::string_view s);

struct MeterReading {
    std::string meter_id;
    EnergyVector vector = EnergyVector::electric;
    Instant timestamp;
    double value_kwh = 0.0;

    bool operator==(const MeterReading&) const = default;
};

// Regular interval series. A NaN value is a missing marker.
struct TimeSeries {
    int interval_minutes = 30;
    Instant start;
    std::vector<double> values;
    std::string unit;

    static double missing() { return std::numeric_limits<double>::quiet_NaN(); }
    bool is_missing(size_t i) const { return std::isnan(values[i]); }
    size_t missing_count() const;
    Instant time_at(size_t i) const { return start + std::chrono::minutes(interval_minutes) * static_cast<long>(i); }
    Instant end() const { return time_at(values.size()); }
    double interval_hours() const { return interval_minutes / 60.0; }

    // NaN compares equal to NaN so that missing markers survive round trips.
    bool operator==(const TimeSeries& other) const;
};

struct WeatherRecord {
    Instant timestamp;
    double ghi_w_m2 = 0.0;
    double wind_ms = 0.0;
    double temp_c = 0.0;

    bool operator==(const WeatherRecord&) const = default;
};

// kW out of a PV plant with linear irradiance response and inverter clipping.
double pv_output(double dc_kw, double ac_cap_kw, double derate, double ghi_w_m2);

// Cubic ramp between cut-in and rated speed, flat to cut-out, zero outside.
double wind_output(double rated_kw, double cut_in_ms, double rated_ms, double cut_out_ms, double v_ms);

// ---------------------------------------------------------------------------
// Synthetic data

struct LoadShare {
    std::string asset_id;
    double weight = 1.0;
};

struct GenerationSpec {
    size_t meter_count = 1500;
    Instant start;
    Instant end;
    int interval_minutes = 30;
    double electric_annual_kwh = 10.5e6;
    double heat_annual_kwh = 35.0e6;
    double gas_annual_kwh = 17.5e6;
    // Fractions of meter_count assigned to heat and gas; the rest are electric.
    double heat_meter_fraction = 0.2;
    double gas_meter_fraction = 0.2;
    // Electric meters are spread over these load assets in proportion to
    // weight. Empty means meters are unattached.
    std::vector<LoadShare> loads;
    double noise_sigma = 0.08;
};

struct MeterSeries {
    std::string meter_id;
    EnergyVector vector = EnergyVector::electric;
    std::string asset_id;
    std::vector<double> kwh;

    bool operator==(const MeterSeries&) const = default;
};

// Meter data held column-wise: one series per meter on a shared time grid.
struct Dataset {
    Instant start;
    int interval_minutes = 30;
    size_t intervals = 0;
    std::vector<MeterSeries> meters; // sorted by meter_id
    std::vector<WeatherRecord> weather;
    TimeSeries carbon_intensity; // kgCO2 per kWh

    Instant time_at(size_t i) const { return start + std::chrono::minutes(interval_minutes) * static_cast<long>(i); }
    size_t reading_count() const { return meters.size() * intervals; }
    std::vector<MeterReading> readings() const;
    double total_kwh(EnergyVector v) const;

    // Electric demand per attached load asset in kW.
    std::map<std::string, std::vector<double>> demand_kw_by_asset() const;

    bool operator==(const Dataset&) const;
};

Dataset generate_synthetic_profiles(const GenerationSpec& spec, uint64_t seed);

// Spread meters over the load assets of a network weighted by rating.
std::vector<LoadShare> load_shares(const NetworkTopology& net);

// Per-interval kW of every PV and wind asset under the given weather.
std::map<std::string, std::vector<double>> renewable_kw_by_asset(const NetworkTopology& net,
                                                                 std::span<const WeatherRecord> weather);

// ---------------------------------------------------------------------------
// CSV files

using SeriesKey = std::pair<std::string, EnergyVector>;
using SeriesCollection = std::map<SeriesKey, TimeSeries>;

SeriesCollection ingest_csv(const std::string& path, int interval_minutes = 30);
SeriesCollection parse_telemetry_csv(std::string_view text, int interval_minutes = 30);
std::string write_telemetry_csv(const SeriesCollection& series);
void write_telemetry_csv(const Dataset& data, std::ostream& out);

std::vector<WeatherRecord> parse_weather_csv(std::string_view text);
std::string write_weather_csv(std::span<const WeatherRecord> weather);
TimeSeries parse_carbon_csv(std::string_view text, int interval_minutes = 30);
std::string write_carbon_csv(const TimeSeries& series);

std::string read_text_file(const std::string& path);

// ---------------------------------------------------------------------------
// Replay

struct ReplayClock {
    // Simulated seconds per wall-clock second. Infinity replays without
    // pausing.
    double speed = 1.0;
    Instant cursor{};
};

struct ReplaySummary {
    size_t delivered = 0;
    Instant first{};
    Instant last{};
    std::chrono::nanoseconds requested_wait{0};
};

using ReadingSink = std::function<void(const MeterReading&)>;
using Sleeper = std::function<void(std::chrono::nanoseconds)>;

// Delivers readings ordered by (timestamp, meter_id), pausing between
// distinct timestamps according to the clock speed. The default sleeper
// blocks the calling thread.
ReplaySummary replay(std::span<const MeterReading> readings, ReplayClock& clock, const ReadingSink& sink,
                     const Sleeper& sleeper = {});
ReplaySummary replay(const Dataset& data, ReplayClock& clock, const ReadingSink& sink, const Sleeper& sleeper = {});

} // namespace sles
