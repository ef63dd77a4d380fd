#pragma once

#include "sles/dispatch.hpp"
#include "sles/metrics.hpp"
#include "sles/network.hpp"
#include "sles/powerflow.hpp"
#include "sles/telemetry.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sles {

// Everything a pipeline run needs apart from the scenario and seed.
struct BaselineConfig {
    NetworkTopology network;
    Instant start{};
    int interval_minutes = 30;
    size_t days = 7;
    size_t meter_count = 1500;
    double electric_annual_kwh = 10.5e6;
    double heat_annual_kwh = 35.0e6;
    double gas_annual_kwh = 17.5e6;
    std::string strategy = "lp";
    // Relative sigma of the multiplicative forecast error.
    double forecast_sigma = 0.05;
    double displaced_intensity = kDefaultDisplacedIntensity;

    size_t horizon() const;
};

BaselineConfig config_from_json(const nlohmann::json& doc, NetworkTopology network);
nlohmann::json to_json(const BaselineConfig& c);

// Closed set of what-if overrides.
struct Scenario {
    std::string name = "baseline";
    std::optional<std::vector<WeatherRecord>> weather;
    std::map<std::string, double> demand_scale; // load asset -> factor
    std::vector<Asset> add_assets;
    std::vector<std::string> remove_assets;
    std::map<std::string, double> rerate_kw; // asset -> new rating
    std::map<std::string, SwitchState> switch_states;
    std::optional<std::vector<double>> carbon_intensity;
    std::optional<std::string> strategy;

    bool empty() const;
};

Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Scenario& s);

// Network and config after applying the structural overrides of `s`.
BaselineConfig apply_overrides(const BaselineConfig& base, const Scenario& s);

struct PowerFlowSummary {
    double worst_loading_pct = 0.0;
    std::string worst_line;
    std::vector<std::string> violated_lines; // sorted
    size_t violation_intervals = 0;
    size_t unsolved_intervals = 0;
};

struct DispatchSummary {
    std::string strategy;
    double total_co2_kg = 0.0;    // realized with the optimized schedule
    double baseline_co2_kg = 0.0; // realized with idle battery and no DSM
    size_t clamp_events = 0;
};

struct ScenarioResult {
    std::string scenario;
    uint64_t seed = 0;
    std::string provenance;
    TimeWindow window;
    std::vector<KpiReport> kpis; // load assets, then "campus"
    PowerFlowSummary powerflow;
    DispatchSummary dispatch;
    ExecutedTimeline timeline;
    DispatchSchedule schedule;
};

// Inputs of a run before dispatch: telemetry-derived actuals and forecasts.
struct PipelineInputs {
    Dataset data;
    DispatchActuals actuals;
    DispatchActuals forecast;
};

// Dispatch problem for intervals [from, from + length) of a run, built from
// forecasts and the network's battery and flexible loads. `soc` overrides the
// battery's configured initial charge.
DispatchProblem dispatch_problem_for(const NetworkTopology& net, const DispatchActuals& forecast, Instant start,
                                     int interval_minutes, size_t from, size_t length, std::optional<double> soc);

PipelineInputs prepare_inputs(const BaselineConfig& config, const Scenario& s, uint64_t seed);
ScenarioResult run_scenario(const BaselineConfig& config, const Scenario& s, uint64_t seed);

std::string provenance_hash(const BaselineConfig& config, const Scenario& s, uint64_t seed);

struct KpiDelta {
    std::string entity;
    double self_sufficiency_pct = 0.0;
    double self_consumption_pct = 0.0;
    double renewables_used_kwh = 0.0;
    double energy_saved_kwh = 0.0;
    double carbon_saved_kg = 0.0;
};

struct ScenarioDiff {
    std::string from;
    std::string to;
    std::vector<KpiDelta> kpis;
    double co2_kg = 0.0;
    double baseline_co2_kg = 0.0;
    double worst_loading_pct = 0.0;
    std::vector<std::string> added_violations;
    std::vector<std::string> removed_violations;

    bool is_zero() const;
};

ScenarioDiff compare(const ScenarioResult& a, const ScenarioResult& b);

// A scenario run next to the baseline it is measured against. Shared by the
// CLI and the service so both produce the same document.
struct ScenarioComparison {
    ScenarioResult baseline;
    ScenarioResult result;
    ScenarioDiff diff;
};

ScenarioComparison run_comparison(const BaselineConfig& config, const Scenario& s, uint64_t seed);

// ---------------------------------------------------------------------------
// Network modifications tested on a copy

struct NetworkMod {
    enum class Kind { set_switch, add_line, remove_line, set_capacity };
    Kind kind = Kind::set_switch;
    std::string line_id;
    SwitchState state = SwitchState::closed; // set_switch
    std::optional<Line> line;                // add_line
    double capacity_kw = 0.0;                // set_capacity
};

NetworkMod network_mod_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const NetworkMod& m);

// Throws ReferenceError for unknown lines and InputError for malformed mods.
NetworkTopology apply_mods(const NetworkTopology& net, const std::vector<NetworkMod>& mods);

struct OutageReadiness {
    std::string line_id;
    double unserved_kw = 0.0;
    bool fully_restored = false;
    bool limit_safe = true;
};

struct WhatIfReport {
    ValidationReport validation;
    std::vector<std::string> deenergized_buses; // fed before, not after
    std::vector<LineViolation> limit_violations; // rated loads
    std::vector<FaultResult> fault_currents;
    std::vector<std::string> fault_skipped; // meshed or unfed buses
    std::vector<OutageReadiness> readiness; // one per closed line
    double worst_unserved_kw = 0.0;
    size_t restorable_outages = 0;
};

WhatIfReport test_network_mod(const NetworkTopology& net, const std::vector<NetworkMod>& mods);

nlohmann::json to_json(const ScenarioResult& r);
nlohmann::json to_json(const ScenarioDiff& d);
nlohmann::json to_json(const WhatIfReport& r);
nlohmann::json to_json(const ScenarioComparison& c);

// FNV-1a over the compact serialization of a document.
std::string fingerprint(const nlohmann::json& doc);

} // namespace sles
