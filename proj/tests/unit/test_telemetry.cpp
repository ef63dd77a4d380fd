#include "sles/error.hpp"
#include "sles/network.hpp"
#include "sles/telemetry.hpp"

#include <doctest.h>
#include <fmt/core.h>

#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

using namespace sles;

namespace {

std::string data(const std::string& name) { return std::string(SLES_DATA_DIR) + "/" + name; }

GenerationSpec week_spec(size_t meters)
{
    GenerationSpec s;
    s.meter_count = meters;
    s.start = parse_instant("2021-06-14T00:00:00Z");
    s.end = s.start + std::chrono::days(7);
    return s;
}

} // namespace

TEST_CASE("pv output")
{
    CHECK(pv_output(5500, 4400, 1.0, 1000) == 4400.0);
    CHECK(pv_output(5500, 4400, 0.9, 0) == 0.0);
    CHECK(pv_output(5500, 4400, 0.9, 500) == doctest::Approx(2475.0).epsilon(1e-12));
    CHECK(pv_output(5500, 4400, 0.9, -20) == 0.0);
}

TEST_CASE("wind output")
{
    CHECK(wind_output(1900, 3, 12, 25, 2.0) == 0.0);
    CHECK(wind_output(1900, 3, 12, 25, 14.0) == 1900.0);
    // 1900 * (7.5^3 - 27) / (12^3 - 27) = 1900 * 394.875 / 1701
    CHECK(wind_output(1900, 3, 12, 25, 7.5) == doctest::Approx(441.0714).epsilon(1e-6));
    CHECK(wind_output(1900, 3, 12, 25, 25.0) == 0.0);
    CHECK(wind_output(1900, 3, 12, 25, 12.0) == 1900.0);
    CHECK(wind_output(1900, 3, 12, 25, 3.0) == 0.0);
}

TEST_CASE("property: pv monotone and clipped, wind continuous and flat at rated")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const double dc = 100 + 9000 * u(rng), ac = dc * (0.5 + 0.5 * u(rng)), derate = 0.5 + 0.5 * u(rng);
        const double g1 = 1200 * u(rng), g2 = g1 + 300 * u(rng);
        CHECK(pv_output(dc, ac, derate, g1) <= pv_output(dc, ac, derate, g2));
        CHECK(pv_output(dc, ac, derate, g2) <= ac);

        const double ci = 1 + 3 * u(rng), rv = ci + 2 + 10 * u(rng), co = rv + 1 + 10 * u(rng), rated = 100 + 3000 * u(rng);
        const double v = ci + (co - ci) * u(rng);
        const double h = 1e-7;
        if (v + h < co) CHECK(std::abs(wind_output(rated, ci, rv, co, v + h) - wind_output(rated, ci, rv, co, v)) < 1e-3);
        if (v >= rv) CHECK(wind_output(rated, ci, rv, co, v) == rated);
        // Continuity at rated speed from below.
        CHECK(std::abs(wind_output(rated, ci, rv, co, rv - 1e-9) - rated) < 1e-4);
    }
}

TEST_CASE("synthetic profiles: one meter, one day")
{
    GenerationSpec s;
    s.meter_count = 1;
    s.heat_meter_fraction = 0.0;
    s.gas_meter_fraction = 0.0;
    s.start = parse_instant("2021-06-16T00:00:00Z");
    s.end = s.start + std::chrono::days(1);
    s.electric_annual_kwh = 48000.0;
    const auto d = generate_synthetic_profiles(s, 42);
    REQUIRE(d.meters.size() == 1);
    CHECK(d.intervals == 48);
    CHECK(d.meters[0].kwh.size() == 48);
    CHECK(d.total_kwh(EnergyVector::electric) == doctest::Approx(48000.0 / 365.0).epsilon(1e-12));
    CHECK(48000.0 / 365.0 == doctest::Approx(131.5).epsilon(1e-3));
}

TEST_CASE("synthetic profiles: annual calibration over a year")
{
    GenerationSpec s;
    s.meter_count = 1500;
    s.start = parse_instant("2021-01-01T00:00:00Z");
    s.end = parse_instant("2022-01-01T00:00:00Z");
    s.electric_annual_kwh = 63.0e6;
    const auto d = generate_synthetic_profiles(s, 42);
    CHECK(d.intervals == 17520);
    CHECK(d.meters.size() == 1500);
    const double e = d.total_kwh(EnergyVector::electric);
    CHECK(e >= 62.37e6);
    CHECK(e <= 63.63e6);
}

TEST_CASE("synthetic profiles: shape, determinism and meter split")
{
    const auto spec = week_spec(200);
    const auto a = generate_synthetic_profiles(spec, 42);
    const auto b = generate_synthetic_profiles(spec, 42);
    CHECK(a == b);
    CHECK_FALSE(a == generate_synthetic_profiles(spec, 43));
    CHECK(a.meters.size() == 200);
    size_t heat = 0, gas = 0;
    for (const auto& m : a.meters) {
        heat += m.vector == EnergyVector::heat;
        gas += m.vector == EnergyVector::gas;
        for (double v : m.kwh) CHECK(v >= 0.0);
    }
    CHECK(heat == 40);
    CHECK(gas == 40);
    CHECK(a.weather.size() == a.intervals);
    CHECK(a.carbon_intensity.values.size() == a.intervals);
    for (double ci : a.carbon_intensity.values) {
        CHECK(ci >= 0.10);
        CHECK(ci <= 0.35);
    }
    for (const auto& w : a.weather) {
        CHECK(w.ghi_w_m2 >= 0.0);
        CHECK(w.wind_ms >= 0.0);
    }

    // Electric: midday above night; Monday above Sunday.
    std::vector<double> total(a.intervals, 0.0);
    for (const auto& m : a.meters) {
        if (m.vector != EnergyVector::electric) continue;
        for (size_t t = 0; t < a.intervals; ++t) total[t] += m.kwh[t];
    }
    auto day_sum = [&](size_t d) { return std::accumulate(total.begin() + d * 48, total.begin() + (d + 1) * 48, 0.0); };
    CHECK(day_sum(0) > day_sum(6));
    double noon = 0, night = 0;
    for (size_t d = 0; d < 7; ++d) {
        noon += total[d * 48 + 26];
        night += total[d * 48 + 6];
    }
    CHECK(noon > night);

    CHECK_THROWS_AS(generate_synthetic_profiles(week_spec(0), 1), InputError);
    auto bad = week_spec(5);
    bad.end = bad.start;
    CHECK_THROWS_AS(generate_synthetic_profiles(bad, 1), InputError);
}

TEST_CASE("meters attach to network loads")
{
    const auto net = load_network_file(data("keele.json"));
    auto spec = week_spec(1500);
    spec.loads = load_shares(net);
    const auto d = generate_synthetic_profiles(spec, 42);
    const auto by_asset = d.demand_kw_by_asset();
    CHECK(by_asset.size() == spec.loads.size());
    double kwh = 0.0;
    for (const auto& [id, kw] : by_asset) {
        CHECK(net.find_asset(id).has_value());
        kwh += std::accumulate(kw.begin(), kw.end(), 0.0) * 0.5;
    }
    CHECK(kwh == doctest::Approx(10.5e6 * 7 / 365).epsilon(1e-9));
    CHECK(kwh == doctest::Approx(d.total_kwh(EnergyVector::electric)).epsilon(1e-12));
}

TEST_CASE("telemetry csv ingestion")
{
    const std::string head = "meter_id,vector,timestamp,value_kwh\n";
    SUBCASE("two rows")
    {
        const auto c = parse_telemetry_csv(head + "M1,electric,2021-06-14T00:30:00Z,1.5\nM1,electric,2021-06-14T01:00:00Z,2\n");
        REQUIRE(c.size() == 1);
        const auto& s = c.begin()->second;
        CHECK(s.values == std::vector<double>{1.5, 2.0});
        CHECK(s.start == parse_instant("2021-06-14T00:30:00Z"));
    }
    SUBCASE("out of order names the row")
    {
        try {
            parse_telemetry_csv(head + "M1,electric,2021-06-14T01:00:00Z,1\nM1,electric,2021-06-14T00:30:00Z,1\n");
            FAIL("expected a ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
            CHECK(std::string(e.what()).find("non-monotone") != std::string::npos);
        }
    }
    SUBCASE("one-interval gap")
    {
        const auto c = parse_telemetry_csv(head + "M1,heat,2021-06-14T00:30:00Z,1\nM1,heat,2021-06-14T01:30:00Z,3\n");
        const auto& s = c.at({"M1", EnergyVector::heat});
        CHECK(s.values.size() == 3);
        CHECK(s.missing_count() == 1);
        CHECK(s.is_missing(1));
    }
    SUBCASE("malformed rows")
    {
        CHECK_THROWS_AS(parse_telemetry_csv(head + "M1,electric,2021-06-14T00:30:00Z\n"), ParseError);
        CHECK_THROWS_AS(parse_telemetry_csv(head + "M1,steam,2021-06-14T00:30:00Z,1\n"), ParseError);
        CHECK_THROWS_AS(parse_telemetry_csv(head + "M1,electric,2021-06-14T00:30:00Z,abc\n"), ParseError);
        CHECK_THROWS_AS(parse_telemetry_csv(head + "M1,electric,yesterday,1\n"), ParseError);
        CHECK_THROWS_AS(parse_telemetry_csv(head + "M1,electric,2021-06-14T00:30:00Z,-1\n"), ParseError);
        CHECK_THROWS_AS(parse_telemetry_csv("a,b,c,d\n"), ParseError);
        CHECK_THROWS_AS(parse_telemetry_csv(""), ParseError);
    }
    SUBCASE("file path")
    {
        const std::string path = "telemetry_test_ingest.csv";
        std::ofstream(path) << head << "M2,gas,2021-06-14T00:30:00Z,4\n";
        const auto c = ingest_csv(path);
        std::remove(path.c_str());
        CHECK(c.at({"M2", EnergyVector::gas}).values == std::vector<double>{4.0});
        CHECK_THROWS_AS(ingest_csv("no/such/file.csv"), ParseError);
    }
}

TEST_CASE("property: telemetry csv round-trips")
{
    for (uint64_t seed = 1; seed <= 50; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        SeriesCollection c;
        const size_t n = 1 + seed % 4;
        for (size_t k = 0; k < n; ++k) {
            TimeSeries s;
            s.interval_minutes = 30;
            s.unit = "kWh";
            s.start = parse_instant("2021-06-14T00:30:00Z") + std::chrono::minutes(30 * (seed % 3));
            const size_t len = 2 + static_cast<size_t>(u(rng) * 60);
            for (size_t i = 0; i < len; ++i) {
                // Interior gaps only: the end points anchor the grid.
                const bool gap = i > 0 && i + 1 < len && u(rng) < 0.1;
                s.values.push_back(gap ? TimeSeries::missing() : std::round(u(rng) * 1e6) / 1e3);
            }
            c[{fmt::format("M{}", k), static_cast<EnergyVector>(k % 3)}] = s;
        }
        CHECK(parse_telemetry_csv(write_telemetry_csv(c)) == c);
    }
}

TEST_CASE("weather and carbon csv round-trip")
{
    const auto d = generate_synthetic_profiles(week_spec(10), 3);
    const auto w = parse_weather_csv(write_weather_csv(d.weather));
    REQUIRE(w.size() == d.weather.size());
    for (size_t i = 0; i < w.size(); ++i) {
        CHECK(w[i].timestamp == d.weather[i].timestamp);
        CHECK(w[i].ghi_w_m2 == doctest::Approx(d.weather[i].ghi_w_m2).epsilon(1e-9));
    }
    const auto ci = parse_carbon_csv(write_carbon_csv(d.carbon_intensity));
    REQUIRE(ci.values.size() == d.carbon_intensity.values.size());
    for (size_t i = 0; i < ci.values.size(); ++i) CHECK(ci.values[i] == doctest::Approx(d.carbon_intensity.values[i]).epsilon(1e-9));
    CHECK_THROWS_AS(parse_weather_csv("timestamp,ghi_w_m2,wind_ms,temp_c\n2021-06-14T00:00:00Z,-1,2,3\n"), ParseError);
}

TEST_CASE("replay ordering")
{
    const auto t0 = parse_instant("2021-06-14T00:30:00Z");
    std::vector<MeterReading> rs{
        {"M2", EnergyVector::electric, t0 + std::chrono::minutes(60), 1.0},
        {"M1", EnergyVector::electric, t0, 1.0},
        {"M3", EnergyVector::electric, t0 + std::chrono::minutes(30), 1.0},
    };
    std::vector<std::string> seen;
    std::vector<std::chrono::nanoseconds> waits;
    ReplayClock clock{1000.0, {}};
    const auto sum = replay(rs, clock, [&](const MeterReading& r) { seen.push_back(r.meter_id); },
                            [&](std::chrono::nanoseconds d) { waits.push_back(d); });
    CHECK(seen == std::vector<std::string>{"M1", "M3", "M2"});
    CHECK(sum.delivered == 3);
    CHECK(sum.first == t0);
    CHECK(clock.cursor == t0 + std::chrono::minutes(60));
    REQUIRE(waits.size() == 2);
    CHECK(waits[0] == std::chrono::milliseconds(1800));

    std::vector<MeterReading> tie{{"M9", EnergyVector::heat, t0, 1.0}, {"M1", EnergyVector::gas, t0, 1.0}};
    seen.clear();
    ReplayClock fast{std::numeric_limits<double>::infinity(), {}};
    replay(tie, fast, [&](const MeterReading& r) { seen.push_back(r.meter_id); });
    CHECK(seen == std::vector<std::string>{"M1", "M9"});

    ReplayClock stopped{0.0, {}};
    CHECK_THROWS_AS(replay(tie, stopped, [](const MeterReading&) {}), InputError);
}

TEST_CASE("full keele week replay delivers every reading")
{
    const auto net = load_network_file(data("keele.json"));
    auto spec = week_spec(1500);
    spec.loads = load_shares(net);
    const auto d = generate_synthetic_profiles(spec, 42);
    ReplayClock clock{std::numeric_limits<double>::infinity(), {}};
    size_t n = 0;
    Instant last{};
    bool ordered = true;
    const auto sum = replay(d, clock, [&](const MeterReading& r) {
        ordered = ordered && r.timestamp >= last;
        last = r.timestamp;
        ++n;
    });
    CHECK(ordered);
    CHECK(n == d.reading_count());
    CHECK(sum.delivered == 1500 * 336);
    CHECK(sum.last == spec.end);
}
