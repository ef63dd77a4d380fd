#include "sles/dispatch.hpp"

#include "sles/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

namespace sles {

std::string_view to_string(DsmMode m)
{
    return m == DsmMode::day_ahead ? "day_ahead" : "ad_hoc";
}

std::string_view to_string(DsmDirection d)
{
    switch (d) {
    case DsmDirection::increase: return "increase";
    case DsmDirection::reduce: return "reduce";
    case DsmDirection::balance: return "balance";
    }
    return "?";
}

DsmMode dsm_mode_from_string(std::string_view s)
{
    if (s == "day_ahead") return DsmMode::day_ahead;
    if (s == "ad_hoc") return DsmMode::ad_hoc;
    throw ParseError(fmt::format("unknown DSM mode '{}'", s));
}

DsmDirection dsm_direction_from_string(std::string_view s)
{
    if (s == "increase") return DsmDirection::increase;
    if (s == "reduce") return DsmDirection::reduce;
    if (s == "balance") return DsmDirection::balance;
    throw ParseError(fmt::format("unknown DSM direction '{}'", s));
}

double DispatchProblem::emission_factor(const std::string& asset) const
{
    const auto it = emission_factors.find(asset);
    return it == emission_factors.end() ? 0.0 : it->second;
}

std::vector<double> DispatchProblem::total_demand() const
{
    std::vector<double> out(horizon, 0.0);
    for (const auto& [id, series] : demand_kw) {
        for (size_t t = 0; t < horizon; ++t) out[t] += series[t];
    }
    return out;
}

std::vector<double> DispatchProblem::total_renewable() const
{
    std::vector<double> out(horizon, 0.0);
    for (const auto& [id, series] : renewable_kw) {
        for (size_t t = 0; t < horizon; ++t) out[t] += series[t];
    }
    return out;
}

const FlexibleLoad* DispatchProblem::flexible_load(std::string_view id) const
{
    for (const auto& f : flexible_loads) {
        if (f.id == id) return &f;
    }
    return nullptr;
}

std::vector<IntervalRange> DispatchProblem::windows_of(const FlexibleLoad& load) const
{
    if (load.windows.empty()) return {IntervalRange{0, horizon}};
    return load.windows;
}

void DispatchProblem::validate() const
{
    if (interval_minutes <= 0) throw InputError("interval_minutes must be positive");
    auto check_len = [&](const std::vector<double>& v, const std::string& what) {
        if (v.size() != horizon) {
            throw InputError(fmt::format("{} has {} values, horizon is {}", what, v.size(), horizon));
        }
        for (double x : v) {
            if (!std::isfinite(x)) throw InputError(fmt::format("{} contains a non-finite value", what));
        }
    };
    check_len(grid_intensity, "grid_intensity");
    for (double x : grid_intensity) {
        if (x < 0.0) throw InputError("grid intensities must be non-negative");
    }
    for (const auto& [id, v] : demand_kw) {
        check_len(v, "demand of " + id);
        for (double x : v) {
            if (x < 0.0) throw InputError(fmt::format("demand of {} is negative", id));
        }
    }
    for (const auto& [id, v] : renewable_kw) {
        check_len(v, "renewable output of " + id);
        for (double x : v) {
            if (x < 0.0) throw InputError(fmt::format("renewable output of {} is negative", id));
        }
    }
    if (battery) {
        const auto& b = *battery;
        if (b.capacity_kwh <= 0.0 || b.power_limit_kw < 0.0) throw InputError("battery capacity and power must be positive");
        if (b.eta_charge <= 0.0 || b.eta_charge > 1.0 || b.eta_discharge <= 0.0 || b.eta_discharge > 1.0) {
            throw InputError("battery efficiencies must lie in (0, 1]");
        }
        if (b.soc_kwh < 0.0 || b.soc_kwh > b.capacity_kwh) throw InputError("battery SoC outside [0, capacity]");
        if (b.terminal_target() < 0.0 || b.terminal_target() > b.capacity_kwh) {
            throw InputError("battery terminal SoC outside [0, capacity]");
        }
    }
    for (const auto& f : flexible_loads) {
        if (!demand_kw.contains(f.id)) throw ReferenceError(fmt::format("flexible load '{}' has no demand series", f.id));
        if (f.magnitude_kw < 0.0) throw InputError(fmt::format("flexible load '{}' has a negative magnitude", f.id));
        for (const auto& w : f.windows) {
            if (w.begin >= w.end || w.end > horizon) {
                throw InputError(fmt::format("flexible load '{}' window [{}, {}) outside the horizon", f.id, w.begin, w.end));
            }
        }
    }
    std::map<std::string, std::vector<bool>> claimed;
    for (const auto& e : forced_events) {
        const auto* f = flexible_load(e.building);
        if (!f) throw InputError(fmt::format("'{}' is not a flexible load", e.building));
        if (e.window.begin >= e.window.end || e.window.end > horizon) throw InputError("DSM event window outside the horizon");
        if (e.magnitude_kw < 0.0) throw InputError("DSM event magnitude must be non-negative");
        auto& mask = claimed.try_emplace(e.building, horizon, false).first->second;
        for (size_t t = e.window.begin; t < e.window.end; ++t) {
            if (mask[t]) throw InputError(fmt::format("overlapping DSM events for '{}'", e.building));
            mask[t] = true;
        }
    }
}

std::vector<double> forced_adjustment(const DispatchProblem& p, const DsmEvent& e)
{
    const auto* f = p.flexible_load(e.building);
    if (!f) throw InputError(fmt::format("'{}' is not a flexible load", e.building));
    if (e.magnitude_kw > f->magnitude_kw + 1e-9) {
        throw InfeasibleError(fmt::format("event magnitude {} kW exceeds the {} kW flexibility of '{}'", e.magnitude_kw,
                                          f->magnitude_kw, e.building));
    }
    const auto& demand = p.demand_kw.at(e.building);
    std::vector<double> out(p.horizon, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> dem, ren;
    if (e.direction == DsmDirection::balance) {
        dem = p.total_demand();
        ren = p.total_renewable();
    }
    for (size_t t = e.window.begin; t < e.window.end && t < p.horizon; ++t) {
        double v = 0.0;
        switch (e.direction) {
        case DsmDirection::reduce: v = -e.magnitude_kw; break;
        case DsmDirection::increase: v = e.magnitude_kw; break;
        case DsmDirection::balance: v = std::clamp(ren[t] - dem[t], 0.0, e.magnitude_kw); break;
        }
        if (demand[t] + v < -1e-9) {
            throw InfeasibleError(fmt::format("cannot reduce '{}' by {} kW at interval {}: demand is {} kW", e.building,
                                              -v, t, demand[t]));
        }
        if (f->max_kw > 0.0 && demand[t] + v > f->max_kw + 1e-9) {
            throw InfeasibleError(fmt::format("raising '{}' by {} kW at interval {} exceeds its {} kW ceiling",
                                              e.building, v, t, f->max_kw));
        }
        out[t] = v;
    }
    return out;
}

namespace {

double interval_co2(const DispatchProblem& p, const DispatchSchedule& s, size_t t)
{
    const double dt = p.dt_hours();
    double kg = p.grid_intensity[t] * s.grid_import_kw[t] * dt;
    for (const auto& [id, series] : p.renewable_kw) kg += p.emission_factor(id) * series[t] * dt;
    for (const auto& [id, series] : p.demand_kw) {
        double load = series[t];
        if (const auto it = s.flex_adjust_kw.find(id); it != s.flex_adjust_kw.end()) load += it->second[t];
        kg += p.emission_factor(id) * load * dt;
    }
    if (p.battery && !s.battery_kw.empty()) {
        kg += p.emission_factor(p.battery->id) * std::max(-s.battery_kw[t], 0.0) * dt;
    }
    return kg;
}

} // namespace

double schedule_co2(const DispatchProblem& p, const DispatchSchedule& s)
{
    double total = 0.0;
    for (size_t t = 0; t < p.horizon; ++t) total += interval_co2(p, s, t);
    return total;
}

std::vector<double> schedule_interval_co2(const DispatchProblem& p, const DispatchSchedule& s)
{
    std::vector<double> out(p.horizon);
    for (size_t t = 0; t < p.horizon; ++t) out[t] = interval_co2(p, s, t);
    return out;
}

void finalize_schedule(const DispatchProblem& p, DispatchSchedule& s)
{
    const size_t T = p.horizon;
    const double dt = p.dt_hours();
    s.battery_kw.resize(T, 0.0);
    for (const auto& f : p.flexible_loads) s.flex_adjust_kw[f.id].resize(T, 0.0);
    s.soc_kwh.assign(T, 0.0);
    if (p.battery) {
        const auto& b = *p.battery;
        double soc = b.soc_kwh;
        for (size_t t = 0; t < T; ++t) {
            double kw = std::clamp(s.battery_kw[t], -b.power_limit_kw, b.power_limit_kw);
            double next = kw >= 0.0 ? soc + b.eta_charge * kw * dt : soc + kw * dt / b.eta_discharge;
            if (next > b.capacity_kwh) {
                kw = (b.capacity_kwh - soc) / (b.eta_charge * dt);
                next = b.capacity_kwh;
            } else if (next < 0.0) {
                kw = -soc * b.eta_discharge / dt;
                next = 0.0;
            }
            s.battery_kw[t] = kw;
            s.soc_kwh[t] = next;
            soc = next;
        }
    } else {
        std::fill(s.battery_kw.begin(), s.battery_kw.end(), 0.0);
    }
    const auto dem = p.total_demand();
    const auto ren = p.total_renewable();
    s.grid_import_kw.assign(T, 0.0);
    s.grid_export_kw.assign(T, 0.0);
    for (size_t t = 0; t < T; ++t) {
        double net = dem[t] + s.battery_kw[t] - ren[t];
        for (const auto& [id, adj] : s.flex_adjust_kw) net += adj[t];
        s.grid_import_kw[t] = std::max(0.0, net);
        s.grid_export_kw[t] = std::max(0.0, -net);
    }
    s.total_co2_kg = schedule_co2(p, s);
}

DispatchSchedule baseline_schedule(const DispatchProblem& p)
{
    p.validate();
    DispatchSchedule s;
    s.strategy = "baseline";
    finalize_schedule(p, s);
    return s;
}

namespace {

// Battery idle, flexible loads held only to the forced events.
DispatchSchedule idle_schedule(const DispatchProblem& p)
{
    DispatchSchedule s;
    for (const auto& f : p.flexible_loads) s.flex_adjust_kw[f.id].assign(p.horizon, 0.0);
    for (const auto& e : p.forced_events) {
        const auto forced = forced_adjustment(p, e);
        auto& adj = s.flex_adjust_kw[e.building];
        for (size_t t = 0; t < p.horizon; ++t) {
            if (!std::isnan(forced[t])) adj[t] = forced[t];
        }
    }
    finalize_schedule(p, s);
    return s;
}

} // namespace

StrategyRegistry::StrategyRegistry()
{
    strategies_.push_back(make_greedy_strategy());
    strategies_.push_back(make_lp_strategy());
}

StrategyRegistry& StrategyRegistry::instance()
{
    static StrategyRegistry registry;
    return registry;
}

void StrategyRegistry::add(std::unique_ptr<DispatchStrategy> strategy)
{
    for (auto& s : strategies_) {
        if (s->name() == strategy->name()) {
            s = std::move(strategy);
            return;
        }
    }
    strategies_.push_back(std::move(strategy));
}

const DispatchStrategy& StrategyRegistry::get(std::string_view name) const
{
    for (const auto& s : strategies_) {
        if (s->name() == name) return *s;
    }
    throw InputError(fmt::format("unknown dispatch strategy '{}'", name));
}

std::vector<std::string> StrategyRegistry::names() const
{
    std::vector<std::string> out;
    for (const auto& s : strategies_) out.emplace_back(s->name());
    return out;
}

DispatchSchedule optimize_co2(const DispatchProblem& p, std::string_view strategy)
{
    const auto& impl = StrategyRegistry::instance().get(strategy);
    p.validate();
    auto idle = idle_schedule(p);
    auto s = impl.solve(p);
    finalize_schedule(p, s);
    s.strategy = std::string(strategy);
    if (s.total_co2_kg > idle.total_co2_kg) {
        idle.strategy = s.strategy;
        return idle;
    }
    return s;
}

std::vector<DsmEvent> day_ahead_dsm(const DispatchProblem& p, const std::vector<std::string>& buildings,
                                    std::string_view strategy)
{
    for (const auto& b : buildings) {
        if (!p.flexible_load(b)) throw InputError(fmt::format("'{}' is not a flexible load", b));
    }
    const auto schedule = optimize_co2(p, strategy);
    const auto dem = p.total_demand();
    const auto ren = p.total_renewable();
    constexpr double kTol = 1e-6;
    std::vector<DsmEvent> events;
    for (const auto& b : buildings) {
        const auto& adj = schedule.flex_adjust_kw.at(b);
        size_t t = 0;
        while (t < p.horizon) {
            if (std::abs(adj[t]) <= kTol) {
                ++t;
                continue;
            }
            const bool up = adj[t] > 0.0;
            DsmEvent e;
            e.mode = DsmMode::day_ahead;
            e.building = b;
            e.window.begin = t;
            bool surplus = true;
            while (t < p.horizon && std::abs(adj[t]) > kTol && (adj[t] > 0.0) == up) {
                e.magnitude_kw = std::max(e.magnitude_kw, std::abs(adj[t]));
                surplus = surplus && ren[t] > dem[t];
                ++t;
            }
            e.window.end = t;
            e.direction = up ? (surplus ? DsmDirection::balance : DsmDirection::increase) : DsmDirection::reduce;
            events.push_back(std::move(e));
        }
    }
    return events;
}

DispatchProblem residual_problem(const DispatchProblem& p, size_t from, double soc_kwh)
{
    if (from > p.horizon) throw InputError("residual start beyond the horizon");
    DispatchProblem r = p;
    const size_t T = p.horizon - from;
    r.horizon = T;
    r.start = p.start + Minutes(static_cast<long>(from) * p.interval_minutes);
    auto slice = [&](std::vector<double>& v) { v.erase(v.begin(), v.begin() + static_cast<long>(from)); };
    slice(r.grid_intensity);
    for (auto& [id, v] : r.demand_kw) slice(v);
    for (auto& [id, v] : r.renewable_kw) slice(v);
    if (r.battery) {
        auto& b = *r.battery;
        const double target = p.battery->terminal_target();
        b.soc_kwh = std::clamp(soc_kwh, 0.0, b.capacity_kwh);
        const double reachable = b.soc_kwh + b.power_limit_kw * b.eta_charge * p.dt_hours() * static_cast<double>(T);
        b.terminal_soc_kwh = std::min({target, reachable, b.capacity_kwh});
    }
    for (auto& f : r.flexible_loads) {
        const auto windows = p.windows_of(f);
        f.windows.clear();
        for (const auto& w : windows) {
            if (w.end <= from) continue;
            f.windows.push_back({std::max(w.begin, from) - from, w.end - from});
        }
        // A load whose windows have all elapsed may no longer shift.
        if (f.windows.empty()) f.magnitude_kw = 0.0;
    }
    r.forced_events.clear();
    for (auto e : p.forced_events) {
        if (e.window.end <= from) continue;
        e.window.begin = std::max(e.window.begin, from) - from;
        e.window.end -= from;
        r.forced_events.push_back(e);
    }
    return r;
}

ScheduleTail ad_hoc_dsm(const DispatchSnapshot& current, const DsmEvent& event)
{
    if (event.mode != DsmMode::ad_hoc) throw InputError("ad_hoc_dsm requires an ad_hoc event");
    const auto& p = current.problem;
    if (event.window.begin >= event.window.end) throw InputError("DSM event window is empty");
    if (event.window.begin < current.current_interval) {
        throw InputError(fmt::format("DSM event window starts at interval {}, which is in the past (now {})",
                                     event.window.begin, current.current_interval));
    }
    if (event.window.end > p.horizon) throw InputError("DSM event window extends beyond the horizon");
    if (event.magnitude_kw < 0.0) throw InputError("DSM event magnitude must be non-negative");
    if (!p.flexible_load(event.building)) throw InputError(fmt::format("'{}' is not a flexible load", event.building));

    ScheduleTail tail;
    tail.from_interval = current.current_interval;
    tail.problem = residual_problem(p, current.current_interval, current.soc_kwh);
    if (event.magnitude_kw > 0.0) {
        DsmEvent shifted = event;
        shifted.window.begin -= current.current_interval;
        shifted.window.end -= current.current_interval;
        // An explicit event supersedes earlier ones for the same building.
        auto& forced = tail.problem.forced_events;
        forced.erase(std::remove_if(forced.begin(), forced.end(),
                                    [&](const DsmEvent& e) {
                                        return e.building == shifted.building &&
                                               e.window.begin < shifted.window.end &&
                                               shifted.window.begin < e.window.end;
                                    }),
                     forced.end());
        forced_adjustment(tail.problem, shifted); // raises when infeasible
        forced.push_back(shifted);
    }
    tail.schedule = optimize_co2(tail.problem, current.strategy);
    return tail;
}

} // namespace sles
