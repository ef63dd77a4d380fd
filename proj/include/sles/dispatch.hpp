#pragma once

#include "sles/time.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sles {

class NetworkTopology;

// Half-open interval index range [begin, end).
struct IntervalRange {
    size_t begin = 0;
    size_t end = 0;
    size_t size() const { return end > begin ? end - begin : 0; }
    bool contains(size_t t) const { return t >= begin && t < end; }
    bool operator==(const IntervalRange&) const = default;
};

struct BatteryState {
    std::string id;
    double soc_kwh = 0.0;
    double capacity_kwh = 2000.0;
    double power_limit_kw = 1000.0;
    double eta_charge = 0.95;
    double eta_discharge = 0.95;
    // End-of-horizon SoC floor; defaults to the starting SoC.
    std::optional<double> terminal_soc_kwh;
    double emission_factor = 0.0;

    double terminal_target() const { return terminal_soc_kwh.value_or(soc_kwh); }
};

struct FlexibleLoad {
    std::string id;
    double magnitude_kw = 0.0; // bound on |adjustment|
    double max_kw = 0.0;       // adjusted demand ceiling; 0 means unbounded
    // Energy-neutral shifting windows; empty means the whole horizon.
    std::vector<IntervalRange> windows;
};

enum class DsmMode { day_ahead, ad_hoc };
enum class DsmDirection { increase, reduce, balance };
std::string_view to_string(DsmMode m);
std::string_view to_string(DsmDirection d);
DsmMode dsm_mode_from_string(std::string_view s);
DsmDirection dsm_direction_from_string(std::string_view s);

struct DsmEvent {
    DsmMode mode = DsmMode::day_ahead;
    DsmDirection direction = DsmDirection::reduce;
    std::string building;
    IntervalRange window;
    double magnitude_kw = 0.0;
    bool operator==(const DsmEvent&) const = default;
};

struct DispatchProblem {
    Instant start{};
    int interval_minutes = 30;
    size_t horizon = 0;
    std::map<std::string, std::vector<double>> demand_kw;    // per load asset
    std::map<std::string, std::vector<double>> renewable_kw; // per PV/wind asset
    std::vector<double> grid_intensity;                      // kgCO2/kWh
    std::optional<BatteryState> battery;
    std::vector<FlexibleLoad> flexible_loads;
    std::map<std::string, double> emission_factors; // per asset, kgCO2/kWh
    // Ad hoc events imposed as hard constraints on the schedule.
    std::vector<DsmEvent> forced_events;

    double dt_hours() const { return interval_minutes / 60.0; }
    double emission_factor(const std::string& asset) const;
    std::vector<double> total_demand() const;
    std::vector<double> total_renewable() const;
    const FlexibleLoad* flexible_load(std::string_view id) const;
    // Windows of `load`, defaulting to the whole horizon.
    std::vector<IntervalRange> windows_of(const FlexibleLoad& load) const;

    // Throws InputError on inconsistent lengths or bounds.
    void validate() const;
};

struct DispatchSchedule {
    std::string strategy;
    std::vector<double> battery_kw; // charge positive
    std::map<std::string, std::vector<double>> flex_adjust_kw;
    std::vector<double> grid_import_kw;
    std::vector<double> grid_export_kw;
    std::vector<double> soc_kwh; // end of each interval
    double total_co2_kg = 0.0;
};

// Forced per-interval adjustment implied by an ad hoc event (NaN where the
// event does not apply).
std::vector<double> forced_adjustment(const DispatchProblem& p, const DsmEvent& e);

// Recomputes SoC, grid exchange and CO2 of a schedule from its setpoints,
// trimming battery setpoints by at most rounding noise so SoC stays in bounds.
void finalize_schedule(const DispatchProblem& p, DispatchSchedule& s);
double schedule_co2(const DispatchProblem& p, const DispatchSchedule& s);
std::vector<double> schedule_interval_co2(const DispatchProblem& p, const DispatchSchedule& s);

DispatchSchedule baseline_schedule(const DispatchProblem& p);

// Pluggable optimizer. Implementations return setpoints; optimize_co2 owns
// finalization and the no-worse-than-idle guarantee.
class DispatchStrategy {
public:
    virtual ~DispatchStrategy() = default;
    virtual std::string_view name() const = 0;
    virtual DispatchSchedule solve(const DispatchProblem& p) const = 0;
};

class StrategyRegistry {
public:
    static StrategyRegistry& instance();
    void add(std::unique_ptr<DispatchStrategy> strategy);
    const DispatchStrategy& get(std::string_view name) const;
    std::vector<std::string> names() const;

private:
    StrategyRegistry();
    std::vector<std::unique_ptr<DispatchStrategy>> strategies_;
};

std::unique_ptr<DispatchStrategy> make_greedy_strategy();
std::unique_ptr<DispatchStrategy> make_lp_strategy();

DispatchSchedule optimize_co2(const DispatchProblem& p, std::string_view strategy);

std::vector<DsmEvent> day_ahead_dsm(const DispatchProblem& p, const std::vector<std::string>& buildings,
                                    std::string_view strategy = "lp");

// Snapshot of the running dispatch consumed by ad hoc DSM.
struct DispatchSnapshot {
    DispatchProblem problem;
    DispatchSchedule schedule;
    size_t current_interval = 0;
    double soc_kwh = 0.0;
    std::string strategy = "lp";
};

struct ScheduleTail {
    size_t from_interval = 0;
    DispatchSchedule schedule; // covers [from_interval, horizon)
    DispatchProblem problem;   // the residual problem that was solved
};

DispatchProblem residual_problem(const DispatchProblem& p, size_t from, double soc_kwh);
ScheduleTail ad_hoc_dsm(const DispatchSnapshot& current, const DsmEvent& event);

// ---------------------------------------------------------------------------
// Executing a schedule against actual inputs

struct DispatchActuals {
    std::map<std::string, std::vector<double>> demand_kw;
    std::map<std::string, std::vector<double>> renewable_kw;
    std::vector<double> grid_intensity;
};

struct ClampEvent {
    size_t interval = 0;
    std::string asset;
    double requested_kw = 0.0;
    double applied_kw = 0.0;
    std::string reason;
};

struct IntervalOutcome {
    double demand_kw = 0.0;          // realized, after DSM
    double baseline_demand_kw = 0.0; // actual demand without DSM
    double generation_kw = 0.0;
    double battery_kw = 0.0;
    double import_kw = 0.0;
    double export_kw = 0.0;
    double soc_kwh = 0.0;
    double co2_kg = 0.0;
};

struct ExecutedTimeline {
    Instant start{};
    int interval_minutes = 30;
    std::vector<IntervalOutcome> intervals;
    std::map<std::string, std::vector<double>> realized_demand_kw;
    std::map<std::string, std::vector<double>> baseline_demand_kw;
    std::map<std::string, std::vector<double>> generation_kw;
    std::string battery_id;
    std::vector<ClampEvent> clamps;
    double total_co2_kg = 0.0;

    double dt_hours() const { return interval_minutes / 60.0; }
};

// Battery parameters and emission factors are taken from the network.
ExecutedTimeline simulate_schedule(const NetworkTopology& net, const DispatchSchedule& s,
                                   const DispatchActuals& actuals, Instant start = {}, int interval_minutes = 30);

// Signed per-bus injections (kW) of interval t for the power-flow solver.
std::map<std::string, double> interval_injections(const NetworkTopology& net, const ExecutedTimeline& tl, size_t t);

// Per-interval step shared by batch simulation and the live service.
struct StepResult {
    IntervalOutcome outcome;
    double applied_battery_kw = 0.0;
    std::map<std::string, double> realized_demand_kw;
    std::vector<ClampEvent> clamps;
};
StepResult simulate_interval(const NetworkTopology& net, size_t t, double soc_kwh, double battery_setpoint_kw,
                             const std::map<std::string, double>& flex_adjust_kw,
                             const std::map<std::string, double>& actual_demand_kw,
                             const std::map<std::string, double>& actual_renewable_kw, double intensity,
                             double dt_hours);

// ---------------------------------------------------------------------------
// Serialization

DispatchProblem problem_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const DispatchProblem& p);
nlohmann::json to_json(const DispatchSchedule& s);
nlohmann::json to_json(const DsmEvent& e);
DsmEvent dsm_event_from_json(const nlohmann::json& doc);
std::string schedule_csv(const DispatchProblem& p, const DispatchSchedule& s);
// Same columns for realized intervals.
std::string timeline_csv(const ExecutedTimeline& tl);

} // namespace sles
