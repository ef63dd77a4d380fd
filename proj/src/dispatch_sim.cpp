#include "sles/dispatch.hpp"

#include "sles/error.hpp"
#include "sles/network.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

namespace sles {

namespace {

const Asset* find_battery(const NetworkTopology& net)
{
    for (const auto& a : net.assets()) {
        if (a.kind == AssetKind::battery) return &a;
    }
    return nullptr;
}

double factor_of(const NetworkTopology& net, const std::string& id)
{
    const auto idx = net.find_asset(id);
    return idx ? net.assets()[*idx].emission_factor_kg_per_kwh : 0.0;
}

} // namespace

StepResult simulate_interval(const NetworkTopology& net, size_t t, double soc_kwh, double battery_setpoint_kw,
                             const std::map<std::string, double>& flex_adjust_kw,
                             const std::map<std::string, double>& actual_demand_kw,
                             const std::map<std::string, double>& actual_renewable_kw, double intensity,
                             double dt_hours)
{
    constexpr double kTol = 1e-9;
    StepResult r;
    const Asset* battery = find_battery(net);
    double kw = battery_setpoint_kw;
    auto clamp_to = [&](double applied, const std::string& asset, const char* reason) {
        if (std::abs(applied - kw) > kTol) r.clamps.push_back({t, asset, kw, applied, reason});
        kw = applied;
    };
    if (!battery) {
        clamp_to(0.0, "battery", "no_battery");
    } else {
        const auto& bp = battery->get<BatteryParams>();
        const double limit = battery->rating_kw;
        clamp_to(std::clamp(kw, -limit, limit), battery->id, "power_limit");
        if (kw > 0.0 && soc_kwh + bp.eta_charge * kw * dt_hours > bp.capacity_kwh) {
            clamp_to(std::max(bp.capacity_kwh - soc_kwh, 0.0) / (bp.eta_charge * dt_hours), battery->id, "soc_max");
        } else if (kw < 0.0 && soc_kwh + kw * dt_hours / bp.eta_discharge < 0.0) {
            clamp_to(-std::max(soc_kwh, 0.0) * bp.eta_discharge / dt_hours, battery->id, "soc_min");
        }
        if (kw > 0.0) {
            soc_kwh = std::min(soc_kwh + bp.eta_charge * kw * dt_hours, bp.capacity_kwh);
        } else {
            soc_kwh = std::max(soc_kwh + kw * dt_hours / bp.eta_discharge, 0.0);
        }
    }
    r.applied_battery_kw = kw;

    auto& o = r.outcome;
    double kg_assets = 0.0;
    for (const auto& [id, actual] : actual_demand_kw) {
        double realized = actual;
        if (const auto it = flex_adjust_kw.find(id); it != flex_adjust_kw.end()) realized += it->second;
        if (realized < 0.0) {
            r.clamps.push_back({t, id, realized, 0.0, "negative_demand"});
            realized = 0.0;
        }
        r.realized_demand_kw[id] = realized;
        o.demand_kw += realized;
        o.baseline_demand_kw += actual;
        kg_assets += factor_of(net, id) * realized * dt_hours;
    }
    for (const auto& [id, gen] : actual_renewable_kw) {
        o.generation_kw += gen;
        kg_assets += factor_of(net, id) * gen * dt_hours;
    }
    const double charge = std::max(0.0, kw);
    const double discharge = std::max(0.0, -kw);
    if (battery) kg_assets += battery->emission_factor_kg_per_kwh * discharge * dt_hours;
    const double residual = o.demand_kw + charge - o.generation_kw - discharge;
    o.import_kw = std::max(0.0, residual);
    o.export_kw = std::max(0.0, -residual);
    o.battery_kw = kw;
    o.soc_kwh = soc_kwh;
    o.co2_kg = intensity * o.import_kw * dt_hours + kg_assets;
    return r;
}

ExecutedTimeline simulate_schedule(const NetworkTopology& net, const DispatchSchedule& s,
                                   const DispatchActuals& actuals, Instant start, int interval_minutes)
{
    if (interval_minutes <= 0) throw InputError("interval_minutes must be positive");
    const size_t T = s.battery_kw.size();
    auto covers = [&](const std::vector<double>& v, const std::string& what) {
        if (v.size() < T) {
            throw InputError(fmt::format("horizon mismatch: {} covers {} intervals, schedule needs {}", what, v.size(), T));
        }
    };
    covers(actuals.grid_intensity, "grid intensity");
    for (const auto& [id, v] : actuals.demand_kw) covers(v, "demand of " + id);
    for (const auto& [id, v] : actuals.renewable_kw) covers(v, "generation of " + id);
    for (const auto& [id, v] : s.flex_adjust_kw) {
        if (v.size() != T) throw InputError(fmt::format("horizon mismatch: adjustment of {} has {} intervals", id, v.size()));
    }

    ExecutedTimeline tl;
    tl.start = start;
    tl.interval_minutes = interval_minutes;
    const double dt = tl.dt_hours();
    const Asset* battery = find_battery(net);
    double soc = 0.0;
    if (battery) {
        tl.battery_id = battery->id;
        soc = battery->get<BatteryParams>().initial_soc_kwh;
    }
    for (const auto& [id, v] : actuals.demand_kw) {
        tl.realized_demand_kw[id].reserve(T);
        tl.baseline_demand_kw[id].assign(v.begin(), v.begin() + static_cast<long>(T));
    }
    for (const auto& [id, v] : actuals.renewable_kw) tl.generation_kw[id].assign(v.begin(), v.begin() + static_cast<long>(T));

    std::map<std::string, double> adj, dem, ren;
    for (size_t t = 0; t < T; ++t) {
        for (const auto& [id, v] : s.flex_adjust_kw) adj[id] = v[t];
        for (const auto& [id, v] : actuals.demand_kw) dem[id] = v[t];
        for (const auto& [id, v] : actuals.renewable_kw) ren[id] = v[t];
        auto step = simulate_interval(net, t, soc, s.battery_kw[t], adj, dem, ren, actuals.grid_intensity[t], dt);
        soc = step.outcome.soc_kwh;
        for (const auto& [id, kw] : step.realized_demand_kw) tl.realized_demand_kw[id].push_back(kw);
        tl.total_co2_kg += step.outcome.co2_kg;
        tl.intervals.push_back(step.outcome);
        tl.clamps.insert(tl.clamps.end(), step.clamps.begin(), step.clamps.end());
    }
    return tl;
}

std::map<std::string, double> interval_injections(const NetworkTopology& net, const ExecutedTimeline& tl, size_t t)
{
    if (t >= tl.intervals.size()) throw InputError(fmt::format("interval {} outside the timeline", t));
    const auto live = energized_buses(net);
    std::map<std::string, double> out;
    auto add = [&](const std::string& asset_id, double kw) {
        const auto idx = net.find_asset(asset_id);
        if (!idx) return;
        const auto& bus = net.assets()[*idx].bus;
        if (bus == net.grid_source().id || !live.contains(bus)) return;
        out[bus] += kw;
    };
    for (const auto& [id, v] : tl.generation_kw) add(id, v[t]);
    for (const auto& [id, v] : tl.realized_demand_kw) add(id, -v[t]);
    if (!tl.battery_id.empty()) add(tl.battery_id, -tl.intervals[t].battery_kw);
    return out;
}

} // namespace sles
