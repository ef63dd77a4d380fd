#include "sles/twin.hpp"

#include "sles/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace sles {

using nlohmann::json;

size_t BaselineConfig::horizon() const
{
    if (interval_minutes <= 0 || 1440 % interval_minutes != 0) {
        throw InputError(fmt::format("interval of {} minutes does not divide a day", interval_minutes));
    }
    return days * static_cast<size_t>(1440 / interval_minutes);
}

bool Scenario::empty() const
{
    return !weather && demand_scale.empty() && add_assets.empty() && remove_assets.empty() && rerate_kw.empty() &&
           switch_states.empty() && !carbon_intensity && !strategy;
}

std::string fingerprint(const json& doc)
{
    const std::string text = doc.dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

BaselineConfig config_from_json(const json& doc, NetworkTopology network)
{
    BaselineConfig c{std::move(network)};
    try {
        if (doc.contains("start")) c.start = parse_instant(doc.at("start").get<std::string>());
        c.interval_minutes = doc.value("interval_minutes", c.interval_minutes);
        c.days = doc.value("days", c.days);
        c.meter_count = doc.value("meter_count", c.meter_count);
        c.electric_annual_kwh = doc.value("electric_annual_kwh", c.electric_annual_kwh);
        c.heat_annual_kwh = doc.value("heat_annual_kwh", c.heat_annual_kwh);
        c.gas_annual_kwh = doc.value("gas_annual_kwh", c.gas_annual_kwh);
        c.strategy = doc.value("strategy", c.strategy);
        c.forecast_sigma = doc.value("forecast_sigma", c.forecast_sigma);
        c.displaced_intensity = doc.value("displaced_intensity", c.displaced_intensity);
    } catch (const json::exception& ex) {
        throw ParseError(fmt::format("malformed run configuration: {}", ex.what()));
    }
    if (c.days == 0) throw InputError("run needs at least one day");
    if (c.forecast_sigma < 0.0) throw InputError("forecast_sigma must be non-negative");
    (void)c.horizon();
    return c;
}

json to_json(const BaselineConfig& c)
{
    return {{"network", to_json(c.network)},
            {"start", format_instant(c.start)},
            {"interval_minutes", c.interval_minutes},
            {"days", c.days},
            {"meter_count", c.meter_count},
            {"electric_annual_kwh", c.electric_annual_kwh},
            {"heat_annual_kwh", c.heat_annual_kwh},
            {"gas_annual_kwh", c.gas_annual_kwh},
            {"strategy", c.strategy},
            {"forecast_sigma", c.forecast_sigma},
            {"displaced_intensity", c.displaced_intensity}};
}

Scenario scenario_from_json(const json& doc)
{
    try {
        Scenario s;
        s.name = doc.value("name", s.name);
        const json& o = doc.contains("overrides") ? doc.at("overrides") : json::object();
        if (!o.is_object()) throw ParseError("scenario overrides must be an object");
        static const std::set<std::string> known{"weather",       "demand_scale",  "add_assets",       "remove_assets",
                                                 "rerate_kw",     "switch_states", "carbon_intensity", "strategy"};
        for (const auto& [k, v] : o.items()) {
            if (!known.contains(k)) throw ParseError(fmt::format("unknown scenario override '{}'", k));
        }
        if (o.contains("weather")) {
            std::vector<WeatherRecord> w;
            for (const auto& r : o.at("weather")) {
                w.push_back({parse_instant(r.at("timestamp").get<std::string>()), r.at("ghi_w_m2").get<double>(),
                             r.at("wind_ms").get<double>(), r.value("temp_c", 10.0)});
            }
            s.weather = std::move(w);
        }
        if (o.contains("demand_scale")) s.demand_scale = o.at("demand_scale").get<std::map<std::string, double>>();
        if (o.contains("add_assets")) {
            for (const auto& a : o.at("add_assets")) s.add_assets.push_back(asset_from_json(a));
        }
        if (o.contains("remove_assets")) s.remove_assets = o.at("remove_assets").get<std::vector<std::string>>();
        if (o.contains("rerate_kw")) s.rerate_kw = o.at("rerate_kw").get<std::map<std::string, double>>();
        if (o.contains("switch_states")) {
            for (const auto& [line, state] : o.at("switch_states").items()) {
                s.switch_states[line] = switch_state_from_string(state.get<std::string>());
            }
        }
        if (o.contains("carbon_intensity")) s.carbon_intensity = o.at("carbon_intensity").get<std::vector<double>>();
        if (o.contains("strategy")) s.strategy = o.at("strategy").get<std::string>();
        return s;
    } catch (const json::exception& ex) {
        throw ParseError(fmt::format("malformed scenario: {}", ex.what()));
    }
}

json to_json(const Scenario& s)
{
    json o = json::object();
    if (s.weather) {
        json w = json::array();
        for (const auto& r : *s.weather) {
            w.push_back({{"timestamp", format_instant(r.timestamp)},
                         {"ghi_w_m2", r.ghi_w_m2},
                         {"wind_ms", r.wind_ms},
                         {"temp_c", r.temp_c}});
        }
        o["weather"] = w;
    }
    if (!s.demand_scale.empty()) o["demand_scale"] = s.demand_scale;
    if (!s.add_assets.empty()) {
        json a = json::array();
        for (const auto& x : s.add_assets) a.push_back(to_json(x));
        o["add_assets"] = a;
    }
    if (!s.remove_assets.empty()) o["remove_assets"] = s.remove_assets;
    if (!s.rerate_kw.empty()) o["rerate_kw"] = s.rerate_kw;
    if (!s.switch_states.empty()) {
        json sw = json::object();
        for (const auto& [line, state] : s.switch_states) sw[line] = to_string(state);
        o["switch_states"] = sw;
    }
    if (s.carbon_intensity) o["carbon_intensity"] = *s.carbon_intensity;
    if (s.strategy) o["strategy"] = *s.strategy;
    return {{"name", s.name}, {"overrides", o}};
}

BaselineConfig apply_overrides(const BaselineConfig& base, const Scenario& s)
{
    const auto& net = base.network;
    auto assets = net.assets();
    for (const auto& id : s.remove_assets) {
        const auto it = std::find_if(assets.begin(), assets.end(), [&](const Asset& a) { return a.id == id; });
        if (it == assets.end()) throw ReferenceError(fmt::format("cannot remove unknown asset '{}'", id));
        assets.erase(it);
    }
    for (const auto& [id, kw] : s.rerate_kw) {
        const auto it = std::find_if(assets.begin(), assets.end(), [&id = id](const Asset& a) { return a.id == id; });
        if (it == assets.end()) throw ReferenceError(fmt::format("cannot re-rate unknown asset '{}'", id));
        if (!(kw > 0.0)) throw InputError(fmt::format("new rating of '{}' must be positive", id));
        if (auto* pv = std::get_if<PvParams>(&it->params)) {
            const double k = kw / it->rating_kw;
            pv->dc_kw *= k;
            pv->ac_cap_kw *= k;
        }
        it->rating_kw = kw;
    }
    assets.insert(assets.end(), s.add_assets.begin(), s.add_assets.end());

    auto lines = net.lines();
    for (const auto& [id, state] : s.switch_states) {
        const auto it = std::find_if(lines.begin(), lines.end(), [&id = id](const Line& l) { return l.id == id; });
        if (it == lines.end()) throw ReferenceError(fmt::format("switch override names unknown line '{}'", id));
        it->switch_state = state;
    }
    BaselineConfig out = base;
    out.network = NetworkTopology(net.buses(), std::move(lines), std::move(assets), net.base_mva());
    for (const auto& [id, factor] : s.demand_scale) {
        const auto idx = out.network.find_asset(id);
        if (!idx || !is_load(out.network.assets()[*idx].kind)) {
            throw ReferenceError(fmt::format("demand scaling names '{}', which is not a load asset", id));
        }
        if (!(factor >= 0.0) || !std::isfinite(factor)) {
            throw InputError(fmt::format("demand scale for '{}' must be a non-negative number", id));
        }
    }
    if (s.strategy) {
        (void)StrategyRegistry::instance().get(*s.strategy);
        out.strategy = *s.strategy;
    }
    return out;
}

std::string provenance_hash(const BaselineConfig& config, const Scenario& s, uint64_t seed)
{
    return fingerprint({{"config", to_json(config)}, {"scenario", to_json(s)}, {"seed", seed}});
}

PipelineInputs prepare_inputs(const BaselineConfig& config, const Scenario& s, uint64_t seed)
{
    const auto& net = config.network;
    const size_t T = config.horizon();
    GenerationSpec spec;
    spec.meter_count = config.meter_count;
    spec.start = config.start;
    spec.end = config.start + Minutes(static_cast<long>(T) * config.interval_minutes);
    spec.interval_minutes = config.interval_minutes;
    spec.electric_annual_kwh = config.electric_annual_kwh;
    spec.heat_annual_kwh = config.heat_annual_kwh;
    spec.gas_annual_kwh = config.gas_annual_kwh;
    spec.loads = load_shares(net);

    PipelineInputs in;
    in.data = generate_synthetic_profiles(spec, seed);
    if (s.weather) {
        if (s.weather->size() != T) {
            throw InputError(fmt::format("weather override has {} records, run needs {}", s.weather->size(), T));
        }
        in.data.weather = *s.weather;
    }
    if (s.carbon_intensity) {
        if (s.carbon_intensity->size() != T) {
            throw InputError(fmt::format("carbon override has {} values, run needs {}", s.carbon_intensity->size(), T));
        }
        for (double x : *s.carbon_intensity) {
            if (!(x >= 0.0)) throw InputError("carbon intensities must be non-negative");
        }
        in.data.carbon_intensity.values = *s.carbon_intensity;
    }

    auto demand = in.data.demand_kw_by_asset();
    for (const auto& a : net.assets()) {
        if (is_load(a.kind) && !demand.contains(a.id)) demand[a.id].assign(T, 0.0);
    }
    for (const auto& [id, factor] : s.demand_scale) {
        for (double& v : demand.at(id)) v *= factor;
    }
    in.actuals.demand_kw = std::move(demand);
    in.actuals.renewable_kw = renewable_kw_by_asset(net, in.data.weather);
    in.actuals.grid_intensity = in.data.carbon_intensity.values;

    // Forecasts are the actuals seen through seeded multiplicative noise.
    std::mt19937_64 rng(seed ^ 0x5deece66dULL);
    std::normal_distribution<double> z(0.0, 1.0);
    auto blur = [&](const std::map<std::string, std::vector<double>>& src) {
        std::map<std::string, std::vector<double>> out;
        for (const auto& [id, v] : src) {
            auto& w = out[id];
            w.reserve(v.size());
            for (double x : v) w.push_back(std::max(0.0, x * (1.0 + config.forecast_sigma * z(rng))));
        }
        return out;
    };
    in.forecast.demand_kw = blur(in.actuals.demand_kw);
    in.forecast.renewable_kw = blur(in.actuals.renewable_kw);
    in.forecast.grid_intensity = in.actuals.grid_intensity;
    return in;
}

DispatchProblem dispatch_problem_for(const NetworkTopology& net, const DispatchActuals& forecast, Instant start,
                            int interval_minutes, size_t from, size_t length, std::optional<double> soc)
{
    DispatchProblem p;
    p.start = start + Minutes(static_cast<long>(from) * interval_minutes);
    p.interval_minutes = interval_minutes;
    p.horizon = length;
    auto slice = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(from + length));
    };
    p.grid_intensity = slice(forecast.grid_intensity);
    for (const auto& [id, v] : forecast.demand_kw) p.demand_kw[id] = slice(v);
    for (const auto& [id, v] : forecast.renewable_kw) p.renewable_kw[id] = slice(v);
    for (const auto& a : net.assets()) {
        if (a.emission_factor_kg_per_kwh != 0.0) p.emission_factors[a.id] = a.emission_factor_kg_per_kwh;
        if (a.kind == AssetKind::battery && !p.battery) {
            const auto& bp = a.get<BatteryParams>();
            BatteryState b;
            b.id = a.id;
            b.capacity_kwh = bp.capacity_kwh;
            b.power_limit_kw = a.rating_kw;
            b.eta_charge = bp.eta_charge;
            b.eta_discharge = bp.eta_discharge;
            b.soc_kwh = std::clamp(soc.value_or(bp.initial_soc_kwh), 0.0, bp.capacity_kwh);
            b.emission_factor = a.emission_factor_kg_per_kwh;
            p.battery = b;
        }
        if (a.kind == AssetKind::flexible_load && p.demand_kw.contains(a.id)) {
            const double frac = a.get<FlexParams>().shiftable_fraction;
            if (frac > 0.0) p.flexible_loads.push_back({a.id, frac * a.rating_kw, 0.0, {}});
        }
    }
    return p;
}

namespace {

struct PipelineRun {
    ExecutedTimeline timeline;
    DispatchSchedule schedule;
    double baseline_co2_kg = 0.0;
};

PipelineRun dispatch_and_execute(const BaselineConfig& config, const PipelineInputs& in)
{
    const auto& net = config.network;
    const size_t T = config.horizon();
    const size_t per_day = static_cast<size_t>(1440 / config.interval_minutes);
    const double dt = config.interval_minutes / 60.0;

    PipelineRun run;
    auto& tl = run.timeline;
    tl.start = config.start;
    tl.interval_minutes = config.interval_minutes;
    for (const auto& [id, v] : in.actuals.demand_kw) tl.baseline_demand_kw[id] = v;
    tl.generation_kw = in.actuals.renewable_kw;
    std::optional<double> soc, idle_soc;
    for (const auto& a : net.assets()) {
        if (a.kind == AssetKind::battery) {
            tl.battery_id = a.id;
            soc = idle_soc = a.get<BatteryParams>().initial_soc_kwh;
            break;
        }
    }
    auto& sched = run.schedule;
    sched.strategy = config.strategy;

    std::map<std::string, double> adj, dem, ren, none;
    for (size_t day = 0; day * per_day < T; ++day) {
        const size_t from = day * per_day;
        const size_t len = std::min(per_day, T - from);
        const auto p = dispatch_problem_for(net, in.forecast, config.start, config.interval_minutes, from, len, soc);
        const auto s = optimize_co2(p, config.strategy);
        for (size_t k = 0; k < len; ++k) {
            const size_t t = from + k;
            adj.clear();
            for (const auto& [id, v] : s.flex_adjust_kw) adj[id] = v[k];
            for (const auto& [id, v] : in.actuals.demand_kw) dem[id] = v[t];
            for (const auto& [id, v] : in.actuals.renewable_kw) ren[id] = v[t];
            const double intensity = in.actuals.grid_intensity[t];
            auto step = simulate_interval(net, t, soc.value_or(0.0), s.battery_kw[k], adj, dem, ren, intensity, dt);
            if (soc) soc = step.outcome.soc_kwh;
            for (const auto& [id, kw] : step.realized_demand_kw) tl.realized_demand_kw[id].push_back(kw);
            tl.total_co2_kg += step.outcome.co2_kg;
            tl.intervals.push_back(step.outcome);
            tl.clamps.insert(tl.clamps.end(), step.clamps.begin(), step.clamps.end());

            const auto idle = simulate_interval(net, t, idle_soc.value_or(0.0), 0.0, none, dem, ren, intensity, dt);
            run.baseline_co2_kg += idle.outcome.co2_kg;

            sched.battery_kw.push_back(s.battery_kw[k]);
            for (const auto& [id, v] : s.flex_adjust_kw) sched.flex_adjust_kw[id].push_back(v[k]);
            sched.grid_import_kw.push_back(s.grid_import_kw[k]);
            sched.grid_export_kw.push_back(s.grid_export_kw[k]);
            sched.soc_kwh.push_back(s.soc_kwh[k]);
        }
        sched.total_co2_kg += s.total_co2_kg;
    }
    return run;
}

PowerFlowSummary flow_summary(const NetworkTopology& net, const ExecutedTimeline& tl)
{
    PowerFlowSummary out;
    std::set<std::string> violated;
    const DcPowerFlow pf(net);
    const auto& live = pf.energized();
    std::vector<double> inj(net.buses().size());
    for (size_t t = 0; t < tl.intervals.size(); ++t) {
        std::fill(inj.begin(), inj.end(), 0.0);
        for (const auto& [bus, kw] : interval_injections(net, tl, t)) {
            const size_t i = *net.find_bus(bus);
            if (live[i]) inj[i] = kw;
        }
        const auto flows = pf.solve_flows(inj);
        bool any = false;
        for (size_t li = 0; li < flows.size(); ++li) {
            const auto& l = net.lines()[li];
            const double loading = 100.0 * std::abs(flows[li]) / l.capacity_kw;
            if (loading > out.worst_loading_pct + 1e-12 || (out.worst_line.empty() && loading > 0.0)) {
                if (loading > out.worst_loading_pct) {
                    out.worst_loading_pct = loading;
                    out.worst_line = l.id;
                }
            }
            if (std::abs(flows[li]) > l.capacity_kw) {
                violated.insert(l.id);
                any = true;
            }
        }
        if (any) ++out.violation_intervals;
    }
    out.violated_lines.assign(violated.begin(), violated.end());
    return out;
}

template <typename F>
auto with_context(const std::string& scenario, F&& f)
{
    auto wrap = [&](const std::exception& e) { return fmt::format("scenario '{}': {}", scenario, e.what()); };
    try {
        return f();
    } catch (const ReferenceError& e) {
        throw ReferenceError(wrap(e));
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(wrap(e));
    } catch (const ParseError& e) {
        throw ParseError(wrap(e));
    } catch (const InputError& e) {
        throw InputError(wrap(e));
    } catch (const SingularSystemError& e) {
        throw SingularSystemError(wrap(e));
    } catch (const Error& e) {
        throw Error(wrap(e));
    }
}

} // namespace

ScenarioResult run_scenario(const BaselineConfig& config, const Scenario& s, uint64_t seed)
{
    return with_context(s.name, [&] {
        const auto applied = apply_overrides(config, s);
        const auto inputs = prepare_inputs(applied, s, seed);
        auto run = dispatch_and_execute(applied, inputs);

        ScenarioResult r;
        r.scenario = s.name;
        r.seed = seed;
        r.provenance = provenance_hash(config, s, seed);
        r.window = {applied.start,
                    applied.start + Minutes(static_cast<long>(applied.horizon()) * applied.interval_minutes)};
        r.kpis = timeline_kpis(run.timeline, 0, run.timeline.intervals.size(), applied.displaced_intensity);
        r.powerflow = flow_summary(applied.network, run.timeline);
        r.dispatch.strategy = applied.strategy;
        r.dispatch.total_co2_kg = run.timeline.total_co2_kg;
        r.dispatch.baseline_co2_kg = run.baseline_co2_kg;
        r.dispatch.clamp_events = run.timeline.clamps.size();
        r.timeline = std::move(run.timeline);
        r.schedule = std::move(run.schedule);
        return r;
    });
}

bool ScenarioDiff::is_zero() const
{
    for (const auto& k : kpis) {
        if (k.self_sufficiency_pct != 0.0 || k.self_consumption_pct != 0.0 || k.renewables_used_kwh != 0.0 ||
            k.energy_saved_kwh != 0.0 || k.carbon_saved_kg != 0.0) {
            return false;
        }
    }
    return co2_kg == 0.0 && baseline_co2_kg == 0.0 && worst_loading_pct == 0.0 && added_violations.empty() &&
           removed_violations.empty();
}

ScenarioDiff compare(const ScenarioResult& a, const ScenarioResult& b)
{
    if (!(a.window == b.window)) {
        throw InputError(fmt::format("cannot compare results over different windows ({} vs {})",
                                     format_instant(a.window.start), format_instant(b.window.start)));
    }
    std::map<std::string, const KpiReport*> bk;
    for (const auto& k : b.kpis) bk[k.entity] = &k;
    if (bk.size() != a.kpis.size()) throw InputError("cannot compare results with different entity sets");
    ScenarioDiff d;
    d.from = a.scenario;
    d.to = b.scenario;
    for (const auto& ka : a.kpis) {
        const auto it = bk.find(ka.entity);
        if (it == bk.end()) throw InputError(fmt::format("entity '{}' missing from '{}'", ka.entity, b.scenario));
        const auto& kb = *it->second;
        d.kpis.push_back({ka.entity, kb.self_sufficiency_pct - ka.self_sufficiency_pct,
                          kb.self_consumption_pct - ka.self_consumption_pct,
                          kb.renewables_used_kwh - ka.renewables_used_kwh, kb.energy_saved_kwh - ka.energy_saved_kwh,
                          kb.carbon_saved_kg - ka.carbon_saved_kg});
    }
    d.co2_kg = b.dispatch.total_co2_kg - a.dispatch.total_co2_kg;
    d.baseline_co2_kg = b.dispatch.baseline_co2_kg - a.dispatch.baseline_co2_kg;
    d.worst_loading_pct = b.powerflow.worst_loading_pct - a.powerflow.worst_loading_pct;
    const auto& va = a.powerflow.violated_lines;
    const auto& vb = b.powerflow.violated_lines;
    std::set_difference(vb.begin(), vb.end(), va.begin(), va.end(), std::back_inserter(d.added_violations));
    std::set_difference(va.begin(), va.end(), vb.begin(), vb.end(), std::back_inserter(d.removed_violations));
    return d;
}

ScenarioComparison run_comparison(const BaselineConfig& config, const Scenario& s, uint64_t seed)
{
    Scenario base;
    base.name = "baseline";
    ScenarioComparison c{run_scenario(config, base, seed), run_scenario(config, s, seed), {}};
    c.diff = compare(c.baseline, c.result);
    return c;
}

// ---------------------------------------------------------------------------

NetworkMod network_mod_from_json(const json& doc)
{
    try {
        NetworkMod m;
        const auto kind = doc.at("kind").get<std::string>();
        if (kind == "set_switch") {
            m.kind = NetworkMod::Kind::set_switch;
            m.line_id = doc.at("line_id").get<std::string>();
            m.state = switch_state_from_string(doc.at("state").get<std::string>());
        } else if (kind == "add_line") {
            m.kind = NetworkMod::Kind::add_line;
            m.line = line_from_json(doc.at("line"));
            m.line_id = m.line->id;
        } else if (kind == "remove_line") {
            m.kind = NetworkMod::Kind::remove_line;
            m.line_id = doc.at("line_id").get<std::string>();
        } else if (kind == "set_capacity") {
            m.kind = NetworkMod::Kind::set_capacity;
            m.line_id = doc.at("line_id").get<std::string>();
            m.capacity_kw = doc.at("capacity_kw").get<double>();
        } else {
            throw ParseError(fmt::format("unknown network modification '{}'", kind));
        }
        return m;
    } catch (const json::exception& ex) {
        throw ParseError(fmt::format("malformed network modification: {}", ex.what()));
    }
}

json to_json(const NetworkMod& m)
{
    switch (m.kind) {
    case NetworkMod::Kind::set_switch:
        return {{"kind", "set_switch"}, {"line_id", m.line_id}, {"state", to_string(m.state)}};
    case NetworkMod::Kind::add_line: return {{"kind", "add_line"}, {"line", to_json(*m.line)}};
    case NetworkMod::Kind::remove_line: return {{"kind", "remove_line"}, {"line_id", m.line_id}};
    case NetworkMod::Kind::set_capacity:
        return {{"kind", "set_capacity"}, {"line_id", m.line_id}, {"capacity_kw", m.capacity_kw}};
    }
    return {};
}

NetworkTopology apply_mods(const NetworkTopology& net, const std::vector<NetworkMod>& mods)
{
    auto lines = net.lines();
    auto find = [&](const std::string& id) {
        const auto it = std::find_if(lines.begin(), lines.end(), [&](const Line& l) { return l.id == id; });
        if (it == lines.end()) throw ReferenceError(fmt::format("modification names unknown line '{}'", id));
        return it;
    };
    for (const auto& m : mods) {
        switch (m.kind) {
        case NetworkMod::Kind::set_switch: find(m.line_id)->switch_state = m.state; break;
        case NetworkMod::Kind::add_line:
            if (!m.line) throw InputError("add_line needs a line");
            lines.push_back(*m.line);
            break;
        case NetworkMod::Kind::remove_line: lines.erase(find(m.line_id)); break;
        case NetworkMod::Kind::set_capacity:
            if (!(m.capacity_kw > 0.0)) throw InputError("line capacity must be positive");
            find(m.line_id)->capacity_kw = m.capacity_kw;
            break;
        }
    }
    return net.with_lines(std::move(lines));
}

WhatIfReport test_network_mod(const NetworkTopology& live, const std::vector<NetworkMod>& mods)
{
    const auto net = apply_mods(live, mods);
    WhatIfReport r;
    r.validation = validate_topology(net);
    const auto before = energized_buses(live);
    const auto after = energized_buses(net);
    std::set_difference(before.begin(), before.end(), after.begin(), after.end(),
                        std::back_inserter(r.deenergized_buses));

    if (r.validation.radial_violations.empty()) {
        r.limit_violations = check_line_limits(dc_power_flow(net, rated_load_injections(net)), net);
    } else {
        // Meshed configurations are still solvable by the DC model.
        try {
            r.limit_violations = check_line_limits(dc_power_flow(net, rated_load_injections(net)), net);
        } catch (const SingularSystemError&) {
        }
    }
    for (const auto& b : net.buses()) {
        if (!after.contains(b.id)) {
            r.fault_skipped.push_back(b.id);
            continue;
        }
        try {
            r.fault_currents.push_back(fault_current_3ph(net, b.id));
        } catch (const InputError&) {
            r.fault_skipped.push_back(b.id);
        }
    }
    for (const auto& l : net.lines()) {
        if (!l.closed()) continue;
        const auto plan = restore_after_outage(net, l.id);
        OutageReadiness o{l.id, plan.unserved_kw, plan.unserved_kw <= 1e-9, plan.limit_safe};
        if (o.fully_restored) ++r.restorable_outages;
        r.worst_unserved_kw = std::max(r.worst_unserved_kw, plan.unserved_kw);
        r.readiness.push_back(o);
    }
    return r;
}

// ---------------------------------------------------------------------------

json to_json(const ScenarioResult& r)
{
    json kpis = json::array();
    for (const auto& k : r.kpis) kpis.push_back(to_json(k));
    json clamps = json::array();
    for (const auto& c : r.timeline.clamps) {
        clamps.push_back({{"interval", c.interval},
                          {"asset", c.asset},
                          {"requested_kw", c.requested_kw},
                          {"applied_kw", c.applied_kw},
                          {"reason", c.reason}});
    }
    return {{"scenario", r.scenario},
            {"seed", r.seed},
            {"provenance", r.provenance},
            {"window_start", format_instant(r.window.start)},
            {"window_end", format_instant(r.window.end)},
            {"kpis", kpis},
            {"powerflow",
             {{"worst_loading_pct", r.powerflow.worst_loading_pct},
              {"worst_line", r.powerflow.worst_line},
              {"violated_lines", r.powerflow.violated_lines},
              {"violation_intervals", r.powerflow.violation_intervals}}},
            {"dispatch",
             {{"strategy", r.dispatch.strategy},
              {"total_co2_kg", r.dispatch.total_co2_kg},
              {"baseline_co2_kg", r.dispatch.baseline_co2_kg},
              {"clamp_events", r.dispatch.clamp_events},
              {"clamps", clamps}}}};
}

json to_json(const ScenarioDiff& d)
{
    json kpis = json::array();
    for (const auto& k : d.kpis) {
        kpis.push_back({{"entity", k.entity},
                        {"self_sufficiency_pct", k.self_sufficiency_pct},
                        {"self_consumption_pct", k.self_consumption_pct},
                        {"renewables_used_kwh", k.renewables_used_kwh},
                        {"energy_saved_kwh", k.energy_saved_kwh},
                        {"carbon_saved_kg", k.carbon_saved_kg}});
    }
    return {{"from", d.from},
            {"to", d.to},
            {"kpis", kpis},
            {"co2_kg", d.co2_kg},
            {"baseline_co2_kg", d.baseline_co2_kg},
            {"worst_loading_pct", d.worst_loading_pct},
            {"added_violations", d.added_violations},
            {"removed_violations", d.removed_violations},
            {"zero", d.is_zero()}};
}

json to_json(const WhatIfReport& r)
{
    json faults = json::array();
    for (const auto& f : r.fault_currents) faults.push_back(to_json(f));
    json ready = json::array();
    for (const auto& o : r.readiness) {
        ready.push_back({{"line_id", o.line_id},
                         {"unserved_kw", o.unserved_kw},
                         {"fully_restored", o.fully_restored},
                         {"limit_safe", o.limit_safe}});
    }
    return {{"validation", to_json(r.validation)},
            {"deenergized_buses", r.deenergized_buses},
            {"limit_violations", to_json(r.limit_violations)},
            {"fault_currents", faults},
            {"fault_skipped", r.fault_skipped},
            {"readiness", ready},
            {"worst_unserved_kw", r.worst_unserved_kw},
            {"restorable_outages", r.restorable_outages}};
}

json to_json(const ScenarioComparison& c)
{
    return {{"baseline", to_json(c.baseline)}, {"result", to_json(c.result)}, {"diff", to_json(c.diff)}};
}

} // namespace sles
