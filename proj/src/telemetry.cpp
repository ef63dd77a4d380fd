#include "sles/telemetry.hpp"

#include "sles/error.hpp"
#include "sles/network.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include <fmt/core.h>

namespace sles {

std::string_view to_string(EnergyVector v)
{
    switch (v) {
    case EnergyVector::electric: return "electric";
    case EnergyVector::heat: return "heat";
    case EnergyVector::gas: return "gas";
    }
    return "?";
}

EnergyVector energy_vector_from_string(std::string_view s)
{
    if (s == "electric") return EnergyVector::electric;
    if (s == "heat") return EnergyVector::heat;
    if (s == "gas") return EnergyVector::gas;
    throw ParseError(fmt::format("unknown vector '{}'", s));
}

size_t TimeSeries::missing_count() const
{
    return static_cast<size_t>(std::count_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }));
}

bool TimeSeries::operator==(const TimeSeries& other) const
{
    if (interval_minutes != other.interval_minutes || start != other.start || unit != other.unit ||
        values.size() != other.values.size()) {
        return false;
    }
    for (size_t i = 0; i < values.size(); ++i) {
        const bool a = std::isnan(values[i]);
        const bool b = std::isnan(other.values[i]);
        if (a != b || (!a && values[i] != other.values[i])) return false;
    }
    return true;
}

double pv_output(double dc_kw, double ac_cap_kw, double derate, double ghi_w_m2)
{
    const double dc = dc_kw * (std::max(ghi_w_m2, 0.0) / 1000.0) * derate;
    return std::clamp(dc, 0.0, ac_cap_kw);
}

double wind_output(double rated_kw, double cut_in_ms, double rated_ms, double cut_out_ms, double v_ms)
{
    if (v_ms < cut_in_ms || v_ms >= cut_out_ms) return 0.0;
    if (v_ms >= rated_ms) return rated_kw;
    const double c3 = cut_in_ms * cut_in_ms * cut_in_ms;
    const double r3 = rated_ms * rated_ms * rated_ms;
    return rated_kw * (v_ms * v_ms * v_ms - c3) / (r3 - c3);
}

std::vector<MeterReading> Dataset::readings() const
{
    std::vector<MeterReading> out;
    out.reserve(reading_count());
    for (size_t t = 0; t < intervals; ++t) {
        const auto ts = time_at(t + 1);
        for (const auto& m : meters) {
            out.push_back({m.meter_id, m.vector, ts, m.kwh[t]});
        }
    }
    return out;
}

double Dataset::total_kwh(EnergyVector v) const
{
    double total = 0.0;
    for (const auto& m : meters) {
        if (m.vector == v) total += std::accumulate(m.kwh.begin(), m.kwh.end(), 0.0);
    }
    return total;
}

std::map<std::string, std::vector<double>> Dataset::demand_kw_by_asset() const
{
    const double h = interval_minutes / 60.0;
    std::map<std::string, std::vector<double>> out;
    for (const auto& m : meters) {
        if (m.vector != EnergyVector::electric || m.asset_id.empty()) continue;
        auto& series = out[m.asset_id];
        series.resize(intervals, 0.0);
        for (size_t t = 0; t < intervals; ++t) series[t] += m.kwh[t] / h;
    }
    return out;
}

bool Dataset::operator==(const Dataset& other) const
{
    return start == other.start && interval_minutes == other.interval_minutes && intervals == other.intervals &&
           meters == other.meters && weather == other.weather && carbon_intensity == other.carbon_intensity;
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLatitudeRad = 53.0 * kPi / 180.0;

struct Calendar {
    double hour;   // fractional UTC hour of day
    int weekday;   // 0 = Monday
    double doy;    // day of year, 0-based
};

Calendar calendar_of(Instant t)
{
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const auto jan1 = sys_days{ymd.year() / January / 1};
    const weekday wd{day};
    return {static_cast<double>(duration_cast<seconds>(t - day).count()) / 3600.0,
            static_cast<int>((wd.c_encoding() + 6) % 7), static_cast<double>((day - jan1).count())};
}

double seasonal(double doy, double amplitude, double peak_doy)
{
    return 1.0 + amplitude * std::cos(2.0 * kPi * (doy - peak_doy) / 365.0);
}

double electric_shape(const Calendar& c, double phase_h)
{
    const double h = c.hour - phase_h;
    const double day_peak = std::exp(-std::pow((h - 13.0) / 4.5, 2.0));
    const double weekday = c.weekday < 5 ? 1.0 : 0.7;
    return (0.55 + 0.45 * day_peak) * weekday * seasonal(c.doy, 0.1, 15.0);
}

double heat_shape(const Calendar& c, double phase_h)
{
    const double h = c.hour - phase_h;
    const double morning = std::exp(-std::pow((h - 7.5) / 2.0, 2.0));
    const double evening = std::exp(-std::pow((h - 18.5) / 2.5, 2.0));
    const double weekday = c.weekday < 5 ? 1.0 : 0.85;
    return (0.4 + 0.6 * morning + 0.45 * evening) * weekday * seasonal(c.doy, 0.6, 15.0);
}

double clear_sky_ghi(const Calendar& c)
{
    const double decl = 23.44 * kPi / 180.0 * std::sin(2.0 * kPi * (284.0 + c.doy + 1.0) / 365.0);
    const double hour_angle = (c.hour - 12.0) * 15.0 * kPi / 180.0;
    const double sin_elev =
        std::sin(kLatitudeRad) * std::sin(decl) + std::cos(kLatitudeRad) * std::cos(decl) * std::cos(hour_angle);
    if (sin_elev <= 0.0) return 0.0;
    return 1000.0 * std::pow(sin_elev, 1.15);
}

// Largest-remainder split of `count` items by weight.
std::vector<size_t> apportion(size_t count, const std::vector<double>& weights)
{
    std::vector<size_t> out(weights.size(), 0);
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (weights.empty() || total <= 0.0) return out;
    std::vector<std::pair<double, size_t>> remainders;
    size_t used = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
        const double exact = count * weights[i] / total;
        out[i] = static_cast<size_t>(std::floor(exact));
        used += out[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (size_t k = 0; used < count; ++k, ++used) out[remainders[k % remainders.size()].second] += 1;
    return out;
}

void scale_to(std::vector<MeterSeries*>& group, double target_kwh)
{
    double sum = 0.0;
    for (const auto* m : group) sum += std::accumulate(m->kwh.begin(), m->kwh.end(), 0.0);
    const double factor = sum > 0.0 ? target_kwh / sum : 0.0;
    for (auto* m : group) {
        for (auto& v : m->kwh) v *= factor;
    }
}

} // namespace

Dataset generate_synthetic_profiles(const GenerationSpec& spec, uint64_t seed)
{
    if (spec.meter_count == 0) throw InputError("generation spec needs at least one meter");
    if (spec.end <= spec.start) throw InputError("generation spec end must be after start");
    if (spec.interval_minutes <= 0) throw InputError("interval_minutes must be positive");
    if (spec.electric_annual_kwh < 0.0 || spec.heat_annual_kwh < 0.0 || spec.gas_annual_kwh < 0.0) {
        throw InputError("annual targets must be non-negative");
    }
    if (spec.heat_meter_fraction < 0.0 || spec.gas_meter_fraction < 0.0 ||
        spec.heat_meter_fraction + spec.gas_meter_fraction > 1.0) {
        throw InputError("meter fractions must be non-negative and sum to at most 1");
    }
    const auto step = std::chrono::minutes(spec.interval_minutes);
    const auto span = spec.end - spec.start;
    if (span % step != std::chrono::seconds(0)) {
        throw InputError("generation window must be a whole number of intervals");
    }

    Dataset data;
    data.start = spec.start;
    data.interval_minutes = spec.interval_minutes;
    data.intervals = static_cast<size_t>(span / step);
    const size_t T = data.intervals;

    const auto heat_n = static_cast<size_t>(std::floor(spec.meter_count * spec.heat_meter_fraction));
    const auto gas_n = static_cast<size_t>(std::floor(spec.meter_count * spec.gas_meter_fraction));
    const size_t electric_n = spec.meter_count - heat_n - gas_n;

    std::vector<double> weights;
    for (const auto& l : spec.loads) weights.push_back(l.weight);
    const auto per_load = apportion(electric_n, weights);

    const int width = std::max(4, static_cast<int>(std::to_string(spec.meter_count).size()));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::vector<Calendar> cal(T);
    for (size_t t = 0; t < T; ++t) cal[t] = calendar_of(data.time_at(t));

    size_t load_cursor = 0;
    size_t assigned_in_load = 0;
    for (size_t m = 0; m < spec.meter_count; ++m) {
        MeterSeries s;
        s.meter_id = fmt::format("M{:0{}d}", m + 1, width);
        s.vector = m < electric_n ? EnergyVector::electric
                   : m < electric_n + heat_n ? EnergyVector::heat
                                             : EnergyVector::gas;
        if (s.vector == EnergyVector::electric && !spec.loads.empty()) {
            while (load_cursor < per_load.size() && assigned_in_load >= per_load[load_cursor]) {
                ++load_cursor;
                assigned_in_load = 0;
            }
            if (load_cursor < per_load.size()) {
                s.asset_id = spec.loads[load_cursor].asset_id;
                ++assigned_in_load;
            }
        }
        const double base = std::exp(0.35 * normal(rng));
        const double phase = 2.0 * (uniform(rng) - 0.5);
        s.kwh.resize(T);
        for (size_t t = 0; t < T; ++t) {
            const double shape = s.vector == EnergyVector::electric ? electric_shape(cal[t], phase)
                                                                    : heat_shape(cal[t], phase);
            const double noise = std::max(0.05, 1.0 + spec.noise_sigma * normal(rng));
            s.kwh[t] = base * shape * noise;
        }
        data.meters.push_back(std::move(s));
    }

    const double window_fraction =
        std::chrono::duration<double>(span).count() / (365.0 * 86400.0);
    std::map<std::string, std::vector<MeterSeries*>> electric_by_asset;
    std::vector<MeterSeries*> electric_all, heat_all, gas_all;
    for (auto& m : data.meters) {
        if (m.vector == EnergyVector::electric) {
            electric_all.push_back(&m);
            electric_by_asset[m.asset_id].push_back(&m);
        } else if (m.vector == EnergyVector::heat) {
            heat_all.push_back(&m);
        } else {
            gas_all.push_back(&m);
        }
    }
    const double electric_target = spec.electric_annual_kwh * window_fraction;
    const bool attached = !spec.loads.empty() && !electric_by_asset.contains("");
    if (attached) {
        // Each load asset receives its weight share of the target.
        double assigned_weight = 0.0;
        for (size_t i = 0; i < spec.loads.size(); ++i) {
            if (per_load[i] > 0) assigned_weight += weights[i];
        }
        for (size_t i = 0; i < spec.loads.size(); ++i) {
            if (per_load[i] == 0) continue;
            scale_to(electric_by_asset[spec.loads[i].asset_id], electric_target * weights[i] / assigned_weight);
        }
    } else {
        scale_to(electric_all, electric_target);
    }
    scale_to(heat_all, spec.heat_annual_kwh * window_fraction);
    scale_to(gas_all, spec.gas_annual_kwh * window_fraction);

    // Weather and grid carbon intensity on the same grid.
    std::mt19937_64 wx(seed ^ 0x9e3779b97f4a7c15ULL);
    double cloud = 0.7;
    double wind_state = 0.0;
    const double rho = 0.97;
    data.weather.reserve(T);
    data.carbon_intensity.interval_minutes = spec.interval_minutes;
    data.carbon_intensity.start = spec.start;
    data.carbon_intensity.unit = "kg_per_kwh";
    data.carbon_intensity.values.reserve(T);
    int last_doy = -1;
    for (size_t t = 0; t < T; ++t) {
        const auto& c = cal[t];
        if (static_cast<int>(c.doy) != last_doy) {
            last_doy = static_cast<int>(c.doy);
            cloud = 0.35 + 0.65 * uniform(wx);
        }
        const double flicker = std::clamp(1.0 + 0.1 * normal(wx), 0.6, 1.2);
        const double ghi = clear_sky_ghi(c) * std::clamp(cloud * flicker, 0.0, 1.0);
        wind_state = rho * wind_state + std::sqrt(1.0 - rho * rho) * normal(wx);
        const double wind = 6.0 * std::exp(0.45 * wind_state);
        const double temp = 10.0 + 6.0 * std::cos(2.0 * kPi * (c.doy - 200.0) / 365.0) +
                            4.0 * std::sin(kPi * (c.hour - 9.0) / 12.0) + 0.8 * normal(wx);
        data.weather.push_back({data.time_at(t), ghi, wind, temp});

        const double diurnal = std::cos(2.0 * kPi * (c.hour - 18.0) / 24.0);
        const double ci = 0.225 + 0.11 * diurnal + 0.01 * normal(wx);
        data.carbon_intensity.values.push_back(std::clamp(ci, 0.10, 0.35));
    }
    return data;
}

std::vector<LoadShare> load_shares(const NetworkTopology& net)
{
    std::vector<LoadShare> out;
    for (const auto& a : net.assets()) {
        if (is_load(a.kind) && a.rating_kw > 0.0) out.push_back({a.id, a.rating_kw});
    }
    return out;
}

std::map<std::string, std::vector<double>> renewable_kw_by_asset(const NetworkTopology& net,
                                                                 std::span<const WeatherRecord> weather)
{
    std::map<std::string, std::vector<double>> out;
    for (const auto& a : net.assets()) {
        if (a.kind == AssetKind::pv) {
            const auto& p = a.get<PvParams>();
            auto& s = out[a.id];
            s.reserve(weather.size());
            for (const auto& w : weather) s.push_back(pv_output(p.dc_kw, p.ac_cap_kw, p.derate, w.ghi_w_m2));
        } else if (a.kind == AssetKind::wind) {
            const auto& p = a.get<WindParams>();
            auto& s = out[a.id];
            s.reserve(weather.size());
            for (const auto& w : weather) {
                s.push_back(wind_output(a.rating_kw, p.cut_in_ms, p.rated_ms, p.cut_out_ms, w.wind_ms));
            }
        }
    }
    return out;
}

ReplaySummary replay(std::span<const MeterReading> readings, ReplayClock& clock, const ReadingSink& sink,
                     const Sleeper& sleeper)
{
    if (!(clock.speed > 0.0)) throw InputError("replay speed must be positive");
    std::vector<size_t> order(readings.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (readings[a].timestamp != readings[b].timestamp) return readings[a].timestamp < readings[b].timestamp;
        return readings[a].meter_id < readings[b].meter_id;
    });
    const Sleeper wait = sleeper ? sleeper : Sleeper([](std::chrono::nanoseconds d) { std::this_thread::sleep_for(d); });

    ReplaySummary summary;
    bool started = false;
    for (size_t idx : order) {
        const auto& r = readings[idx];
        if (!started) {
            summary.first = r.timestamp;
            started = true;
        } else if (r.timestamp > clock.cursor && std::isfinite(clock.speed)) {
            const std::chrono::duration<double> sim = r.timestamp - clock.cursor;
            const auto pause = std::chrono::duration_cast<std::chrono::nanoseconds>(sim / clock.speed);
            summary.requested_wait += pause;
            wait(pause);
        }
        clock.cursor = std::max(clock.cursor, r.timestamp);
        sink(r);
        summary.last = r.timestamp;
        ++summary.delivered;
    }
    return summary;
}

ReplaySummary replay(const Dataset& data, ReplayClock& clock, const ReadingSink& sink, const Sleeper& sleeper)
{
    const auto all = data.readings();
    return replay(std::span<const MeterReading>(all), clock, sink, sleeper);
}

} // namespace sles
