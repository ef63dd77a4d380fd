#include "sles/dispatch.hpp"

#include "sles/error.hpp"

#include <sstream>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace sles {

using nlohmann::json;

namespace {

IntervalRange range_from_json(const json& j)
{
    if (j.is_array() && j.size() == 2) return {j[0].get<size_t>(), j[1].get<size_t>()};
    if (j.is_object()) return {j.at("begin").get<size_t>(), j.at("end").get<size_t>()};
    throw ParseError("interval range must be [begin, end] or {\"begin\", \"end\"}");
}

json range_to_json(const IntervalRange& r)
{
    return json::array({r.begin, r.end});
}

std::map<std::string, std::vector<double>> series_map(const json& j)
{
    std::map<std::string, std::vector<double>> out;
    for (const auto& [k, v] : j.items()) out[k] = v.get<std::vector<double>>();
    return out;
}

} // namespace

DsmEvent dsm_event_from_json(const json& doc)
{
    try {
        DsmEvent e;
        e.mode = dsm_mode_from_string(doc.value("mode", std::string("ad_hoc")));
        e.direction = dsm_direction_from_string(doc.at("direction").get<std::string>());
        e.building = doc.at("building").get<std::string>();
        e.window = range_from_json(doc.at("window"));
        e.magnitude_kw = doc.at("magnitude_kw").get<double>();
        if (e.magnitude_kw < 0.0) throw InputError("DSM event magnitude must be non-negative");
        return e;
    } catch (const json::exception& ex) {
        throw ParseError(fmt::format("malformed DSM event: {}", ex.what()));
    }
}

json to_json(const DsmEvent& e)
{
    return {{"mode", to_string(e.mode)},
            {"direction", to_string(e.direction)},
            {"building", e.building},
            {"window", range_to_json(e.window)},
            {"magnitude_kw", e.magnitude_kw}};
}

DispatchProblem problem_from_json(const json& doc)
{
    try {
        DispatchProblem p;
        p.interval_minutes = doc.value("interval_minutes", 30);
        if (doc.contains("start")) p.start = parse_instant(doc.at("start").get<std::string>());
        p.grid_intensity = doc.at("grid_intensity").get<std::vector<double>>();
        p.horizon = doc.value("horizon", p.grid_intensity.size());
        if (doc.contains("demand_kw")) p.demand_kw = series_map(doc.at("demand_kw"));
        if (doc.contains("renewable_kw")) p.renewable_kw = series_map(doc.at("renewable_kw"));
        if (doc.contains("emission_factors")) {
            p.emission_factors = doc.at("emission_factors").get<std::map<std::string, double>>();
        }
        if (doc.contains("battery") && !doc.at("battery").is_null()) {
            const auto& b = doc.at("battery");
            BatteryState s;
            s.id = b.value("id", std::string("battery"));
            s.capacity_kwh = b.value("capacity_kwh", s.capacity_kwh);
            s.power_limit_kw = b.value("power_limit_kw", s.power_limit_kw);
            s.eta_charge = b.value("eta_charge", s.eta_charge);
            s.eta_discharge = b.value("eta_discharge", s.eta_discharge);
            s.soc_kwh = b.value("soc_kwh", s.capacity_kwh / 2.0);
            if (b.contains("terminal_soc_kwh")) s.terminal_soc_kwh = b.at("terminal_soc_kwh").get<double>();
            s.emission_factor = b.value("emission_factor", 0.0);
            if (s.emission_factor != 0.0) p.emission_factors[s.id] = s.emission_factor;
            p.battery = s;
        }
        if (doc.contains("flexible_loads")) {
            for (const auto& f : doc.at("flexible_loads")) {
                FlexibleLoad l;
                l.id = f.at("id").get<std::string>();
                l.magnitude_kw = f.at("magnitude_kw").get<double>();
                l.max_kw = f.value("max_kw", 0.0);
                if (f.contains("windows")) {
                    for (const auto& w : f.at("windows")) l.windows.push_back(range_from_json(w));
                }
                p.flexible_loads.push_back(std::move(l));
            }
        }
        if (doc.contains("forced_events")) {
            for (const auto& e : doc.at("forced_events")) p.forced_events.push_back(dsm_event_from_json(e));
        }
        p.validate();
        return p;
    } catch (const json::exception& ex) {
        throw ParseError(fmt::format("malformed dispatch problem: {}", ex.what()));
    }
}

json to_json(const DispatchProblem& p)
{
    json doc = {{"interval_minutes", p.interval_minutes},
                {"start", format_instant(p.start)},
                {"horizon", p.horizon},
                {"grid_intensity", p.grid_intensity},
                {"demand_kw", p.demand_kw},
                {"renewable_kw", p.renewable_kw},
                {"emission_factors", p.emission_factors}};
    if (p.battery) {
        const auto& b = *p.battery;
        doc["battery"] = {{"id", b.id},
                          {"soc_kwh", b.soc_kwh},
                          {"capacity_kwh", b.capacity_kwh},
                          {"power_limit_kw", b.power_limit_kw},
                          {"eta_charge", b.eta_charge},
                          {"eta_discharge", b.eta_discharge},
                          {"terminal_soc_kwh", b.terminal_target()}};
    }
    json flex = json::array();
    for (const auto& f : p.flexible_loads) {
        json windows = json::array();
        for (const auto& w : f.windows) windows.push_back(range_to_json(w));
        flex.push_back({{"id", f.id}, {"magnitude_kw", f.magnitude_kw}, {"max_kw", f.max_kw}, {"windows", windows}});
    }
    doc["flexible_loads"] = flex;
    json events = json::array();
    for (const auto& e : p.forced_events) events.push_back(to_json(e));
    doc["forced_events"] = events;
    return doc;
}

json to_json(const DispatchSchedule& s)
{
    return {{"strategy", s.strategy},
            {"battery_kw", s.battery_kw},
            {"flex_adjust_kw", s.flex_adjust_kw},
            {"grid_import_kw", s.grid_import_kw},
            {"grid_export_kw", s.grid_export_kw},
            {"soc_kwh", s.soc_kwh},
            {"total_co2_kg", s.total_co2_kg}};
}

std::string schedule_csv(const DispatchProblem& p, const DispatchSchedule& s)
{
    const auto co2 = schedule_interval_co2(p, s);
    std::ostringstream out;
    out << "interval_start,battery_kw,import_kw,export_kw,co2_kg\n";
    for (size_t t = 0; t < p.horizon; ++t) {
        const Instant at = p.start + Minutes(static_cast<long>(t) * p.interval_minutes);
        out << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", format_instant(at), s.battery_kw[t], s.grid_import_kw[t],
                           s.grid_export_kw[t], co2[t]);
    }
    return out.str();
}

std::string timeline_csv(const ExecutedTimeline& tl)
{
    std::ostringstream out;
    out << "interval_start,battery_kw,import_kw,export_kw,co2_kg\n";
    for (size_t t = 0; t < tl.intervals.size(); ++t) {
        const auto& o = tl.intervals[t];
        const Instant at = tl.start + Minutes(static_cast<long>(t) * tl.interval_minutes);
        out << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", format_instant(at), o.battery_kw, o.import_kw,
                           o.export_kw, o.co2_kg);
    }
    return out.str();
}

} // namespace sles
