#include "sles/metrics.hpp"

#include "sles/dispatch.hpp"
#include "sles/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace sles {

EnergyBalanceBreakdown& EnergyBalanceBreakdown::operator+=(const EnergyBalanceBreakdown& o)
{
    if (window == TimeWindow{}) {
        window = o.window;
    } else if (!(o.window == TimeWindow{})) {
        window.start = std::min(window.start, o.window.start);
        window.end = std::max(window.end, o.window.end);
    }
    demand_kwh += o.demand_kwh;
    generation_kwh += o.generation_kwh;
    direct_consumption_kwh += o.direct_consumption_kwh;
    feed_in_kwh += o.feed_in_kwh;
    grid_draw_kwh += o.grid_draw_kwh;
    return *this;
}

EnergyBalanceBreakdown decompose_flows(std::span<const double> gen, std::span<const double> dem, double interval_hours)
{
    if (gen.size() != dem.size()) {
        throw InputError(fmt::format("misaligned series: {} generation vs {} demand intervals", gen.size(), dem.size()));
    }
    if (!(interval_hours > 0.0)) throw InputError("interval length must be positive");
    EnergyBalanceBreakdown b;
    for (size_t i = 0; i < gen.size(); ++i) {
        const double g = gen[i];
        const double d = dem[i];
        if (!std::isfinite(g) || !std::isfinite(d)) throw InputError(fmt::format("missing value at interval {}", i));
        if (g < 0.0 || d < 0.0) throw InputError(fmt::format("negative power at interval {}", i));
        b.demand_kwh += d * interval_hours;
        b.generation_kwh += g * interval_hours;
        b.direct_consumption_kwh += std::min(g, d) * interval_hours;
        b.feed_in_kwh += std::max(g - d, 0.0) * interval_hours;
        b.grid_draw_kwh += std::max(d - g, 0.0) * interval_hours;
    }
    return b;
}

EnergyBalanceBreakdown decompose_flows(const TimeSeries& gen, const TimeSeries& dem)
{
    if (gen.interval_minutes != dem.interval_minutes || gen.start != dem.start || gen.values.size() != dem.values.size()) {
        throw InputError(fmt::format("misaligned series: generation {}+{}x{}min vs demand {}+{}x{}min",
                                     format_instant(gen.start), gen.values.size(), gen.interval_minutes,
                                     format_instant(dem.start), dem.values.size(), dem.interval_minutes));
    }
    auto b = decompose_flows(gen.values, dem.values, gen.interval_hours());
    b.window = {gen.start, gen.end()};
    return b;
}

EnergyBalanceBreakdown breakdown_from_totals(TimeWindow window, double demand_kwh, double generation_kwh,
                                             double direct_consumption_kwh)
{
    if (demand_kwh < 0.0 || generation_kwh < 0.0 || direct_consumption_kwh < 0.0) {
        throw InputError("energy totals must be non-negative");
    }
    if (direct_consumption_kwh > std::min(demand_kwh, generation_kwh) * (1.0 + 1e-12)) {
        throw InputError("direct consumption exceeds demand or generation");
    }
    EnergyBalanceBreakdown b;
    b.window = window;
    b.demand_kwh = demand_kwh;
    b.generation_kwh = generation_kwh;
    b.direct_consumption_kwh = direct_consumption_kwh;
    b.feed_in_kwh = std::max(generation_kwh - direct_consumption_kwh, 0.0);
    b.grid_draw_kwh = std::max(demand_kwh - direct_consumption_kwh, 0.0);
    return b;
}

double self_sufficiency(const EnergyBalanceBreakdown& b)
{
    if (!(b.demand_kwh > 0.0)) throw InputError("self-sufficiency is undefined for zero demand");
    return std::clamp(100.0 * b.direct_consumption_kwh / b.demand_kwh, 0.0, 100.0);
}

double self_consumption(const EnergyBalanceBreakdown& b)
{
    if (!(b.generation_kwh > 0.0)) throw InputError("self-consumption is undefined for zero generation");
    return std::clamp(100.0 * b.direct_consumption_kwh / b.generation_kwh, 0.0, 100.0);
}

double carbon_saved(double renewables_used_kwh, double displaced_intensity)
{
    if (renewables_used_kwh < 0.0 || displaced_intensity < 0.0) {
        throw InputError("carbon_saved needs non-negative energy and intensity");
    }
    return renewables_used_kwh * displaced_intensity;
}

KpiReport kpi_report(const std::string& entity, TimeWindow window, const EnergyBalanceBreakdown& breakdown,
                     const SavingsInputs& savings)
{
    KpiReport r;
    r.entity = entity;
    r.window = window;
    r.breakdown = breakdown;
    r.breakdown.window = window;
    r.self_sufficiency_pct = breakdown.demand_kwh > 0.0 ? self_sufficiency(breakdown) : 0.0;
    r.self_consumption_pct = breakdown.generation_kwh > 0.0 ? self_consumption(breakdown) : 0.0;
    r.renewables_used_kwh = breakdown.direct_consumption_kwh;
    r.energy_saved_kwh = savings.baseline_demand_kwh - savings.realized_demand_kwh;
    r.carbon_saved_kg = carbon_saved(r.renewables_used_kwh, savings.displaced_intensity);
    return r;
}

KpiReport aggregate_reports(const std::string& entity, std::span<const KpiReport> reports)
{
    KpiReport r;
    r.entity = entity;
    if (reports.empty()) return r;
    r.window = reports.front().window;
    EnergyBalanceBreakdown total;
    total.window = r.window;
    for (const auto& x : reports) {
        if (!(x.window == r.window)) throw InputError("cannot aggregate reports over different windows");
        total += x.breakdown;
        r.energy_saved_kwh += x.energy_saved_kwh;
        r.renewables_used_kwh += x.renewables_used_kwh;
        r.carbon_saved_kg += x.carbon_saved_kg;
    }
    r.breakdown = total;
    r.self_sufficiency_pct = total.demand_kwh > 0.0 ? self_sufficiency(total) : 0.0;
    r.self_consumption_pct = total.generation_kwh > 0.0 ? self_consumption(total) : 0.0;
    return r;
}

size_t KpiTimeline::intervals() const
{
    return entities.empty() ? 0 : entities.begin()->second.demand_kw.size();
}

TimeWindow KpiTimeline::window() const
{
    return {start, start + Minutes(static_cast<long>(intervals()) * interval_minutes)};
}

KpiTimeline kpi_timeline(const ExecutedTimeline& tl, size_t begin, size_t end, double displaced_intensity)
{
    end = std::min(end, tl.intervals.size());
    if (begin > end) throw InputError("KPI window starts after it ends");
    KpiTimeline out;
    out.start = tl.start + Minutes(static_cast<long>(begin) * tl.interval_minutes);
    out.interval_minutes = tl.interval_minutes;
    out.displaced_intensity = displaced_intensity;
    for (const auto& [id, realized] : tl.realized_demand_kw) {
        const auto& baseline = tl.baseline_demand_kw.at(id);
        auto& e = out.entities[id];
        for (size_t t = begin; t < end; ++t) {
            const auto& iv = tl.intervals[t];
            const double d = realized[t];
            e.generation_kw.push_back(iv.demand_kw > 0.0 ? iv.generation_kw * d / iv.demand_kw : 0.0);
            e.demand_kw.push_back(d);
            e.baseline_demand_kw.push_back(baseline[t]);
        }
    }
    auto& campus = out.entities["campus"];
    for (size_t t = begin; t < end; ++t) {
        campus.generation_kw.push_back(tl.intervals[t].generation_kw);
        campus.demand_kw.push_back(tl.intervals[t].demand_kw);
        campus.baseline_demand_kw.push_back(tl.intervals[t].baseline_demand_kw);
    }
    return out;
}

std::vector<KpiReport> timeline_reports(const KpiTimeline& tl)
{
    const double dt = tl.interval_minutes / 60.0;
    const auto window = tl.window();
    std::vector<KpiReport> out;
    auto report = [&](const std::string& id, const EntitySeries& e) {
        if (e.baseline_demand_kw.size() != e.demand_kw.size()) {
            throw InputError(fmt::format("entity '{}': baseline and demand series differ in length", id));
        }
        const auto b = decompose_flows(e.generation_kw, e.demand_kw, dt);
        double base_kwh = 0.0;
        for (double x : e.baseline_demand_kw) base_kwh += x * dt;
        out.push_back(kpi_report(id, window, b, {base_kwh, b.demand_kwh, tl.displaced_intensity}));
    };
    for (const auto& [id, e] : tl.entities) {
        if (e.demand_kw.size() != tl.intervals()) {
            throw InputError(fmt::format("entity '{}' has {} intervals, expected {}", id, e.demand_kw.size(),
                                         tl.intervals()));
        }
        if (id != "campus") report(id, e);
    }
    if (const auto it = tl.entities.find("campus"); it != tl.entities.end()) report("campus", it->second);
    return out;
}

std::vector<KpiReport> timeline_kpis(const ExecutedTimeline& tl, size_t begin, size_t end, double displaced_intensity)
{
    return timeline_reports(kpi_timeline(tl, begin, end, displaced_intensity));
}

KpiTimeline kpi_timeline_from_json(const nlohmann::json& doc)
{
    try {
        KpiTimeline tl;
        tl.start = parse_instant(doc.at("start").get<std::string>());
        tl.interval_minutes = doc.value("interval_minutes", 30);
        if (tl.interval_minutes <= 0) throw InputError("interval_minutes must be positive");
        tl.displaced_intensity = doc.value("displaced_intensity", kDefaultDisplacedIntensity);
        for (const auto& [id, e] : doc.at("entities").items()) {
            EntitySeries s;
            s.generation_kw = e.at("generation_kw").get<std::vector<double>>();
            s.demand_kw = e.at("demand_kw").get<std::vector<double>>();
            s.baseline_demand_kw = e.contains("baseline_demand_kw")
                                       ? e.at("baseline_demand_kw").get<std::vector<double>>()
                                       : s.demand_kw;
            tl.entities[id] = std::move(s);
        }
        return tl;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(fmt::format("malformed KPI timeline: {}", ex.what()));
    }
}

nlohmann::json to_json(const KpiTimeline& tl)
{
    nlohmann::json entities = nlohmann::json::object();
    for (const auto& [id, e] : tl.entities) {
        entities[id] = {{"generation_kw", e.generation_kw},
                        {"demand_kw", e.demand_kw},
                        {"baseline_demand_kw", e.baseline_demand_kw}};
    }
    return {{"start", format_instant(tl.start)},
            {"interval_minutes", tl.interval_minutes},
            {"displaced_intensity", tl.displaced_intensity},
            {"entities", entities}};
}

nlohmann::json to_json(const EnergyBalanceBreakdown& b)
{
    return {{"window_start", format_instant(b.window.start)},
            {"window_end", format_instant(b.window.end)},
            {"demand_kwh", b.demand_kwh},
            {"generation_kwh", b.generation_kwh},
            {"direct_consumption_kwh", b.direct_consumption_kwh},
            {"feed_in_kwh", b.feed_in_kwh},
            {"grid_draw_kwh", b.grid_draw_kwh}};
}

nlohmann::json to_json(const KpiReport& r)
{
    return {{"entity", r.entity},
            {"window_start", format_instant(r.window.start)},
            {"window_end", format_instant(r.window.end)},
            {"self_sufficiency_pct", r.self_sufficiency_pct},
            {"self_consumption_pct", r.self_consumption_pct},
            {"renewables_used_kwh", r.renewables_used_kwh},
            {"energy_saved_kwh", r.energy_saved_kwh},
            {"carbon_saved_kg", r.carbon_saved_kg},
            {"breakdown", to_json(r.breakdown)}};
}

KpiReport kpi_report_from_json(const nlohmann::json& doc)
{
    try {
        KpiReport r;
        r.entity = doc.at("entity").get<std::string>();
        r.window = {parse_instant(doc.at("window_start").get<std::string>()),
                    parse_instant(doc.at("window_end").get<std::string>())};
        r.self_sufficiency_pct = doc.at("self_sufficiency_pct").get<double>();
        r.self_consumption_pct = doc.at("self_consumption_pct").get<double>();
        r.renewables_used_kwh = doc.at("renewables_used_kwh").get<double>();
        r.energy_saved_kwh = doc.at("energy_saved_kwh").get<double>();
        r.carbon_saved_kg = doc.at("carbon_saved_kg").get<double>();
        if (doc.contains("breakdown")) {
            const auto& b = doc.at("breakdown");
            r.breakdown.window = r.window;
            r.breakdown.demand_kwh = b.at("demand_kwh").get<double>();
            r.breakdown.generation_kwh = b.at("generation_kwh").get<double>();
            r.breakdown.direct_consumption_kwh = b.at("direct_consumption_kwh").get<double>();
            r.breakdown.feed_in_kwh = b.at("feed_in_kwh").get<double>();
            r.breakdown.grid_draw_kwh = b.at("grid_draw_kwh").get<double>();
        }
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(fmt::format("malformed KPI report: {}", ex.what()));
    }
}

std::string kpi_csv(std::span<const KpiReport> reports)
{
    std::ostringstream out;
    out << "entity,window_start,window_end,ss_pct,sc_pct,renewables_kwh,energy_saved_kwh,carbon_kg\n";
    for (const auto& r : reports) {
        out << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.entity, format_instant(r.window.start),
                           format_instant(r.window.end), r.self_sufficiency_pct, r.self_consumption_pct,
                           r.renewables_used_kwh, r.energy_saved_kwh, r.carbon_saved_kg);
    }
    return out.str();
}

} // namespace sles
