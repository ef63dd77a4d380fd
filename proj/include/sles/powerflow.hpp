#pragma once

#include "sles/network.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sles {

// Net injection per non-slack bus in kW; generation positive, load negative.
using InjectionSet = std::map<std::string, double>;

struct PowerFlowSolution {
    std::map<std::string, double> angles_rad;    // energized buses only; slack = 0
    std::map<std::string, double> line_flows_kw; // every line; from -> to positive
    double slack_injection_kw = 0.0;             // import (+) / export (-)
};

struct LineViolation {
    std::string line_id;
    double flow_kw = 0.0; // absolute
    double capacity_kw = 0.0;
    bool operator==(const LineViolation&) const = default;
};

struct FaultResult {
    std::string bus;
    double fault_current_ka = 0.0;
    double thevenin_x_pu = 0.0;
};

struct SwitchAction {
    std::string line_id;
    SwitchState state = SwitchState::closed;
    bool operator==(const SwitchAction&) const = default;
};

struct RestorationPlan {
    std::vector<SwitchAction> actions;
    std::set<std::string> restored_buses;
    double unserved_kw = 0.0;
    // False when the returned configuration overloads a line, or when a plan
    // restoring more load existed but was rejected on line limits.
    bool limit_safe = true;
    // The best plan turned down on line limits, with its overloads.
    std::vector<SwitchAction> rejected_actions;
    std::vector<LineViolation> rejected_violations;
};

// Factorizes the reduced susceptance matrix once for a topology so that many
// injection sets can be solved against it.
class DcPowerFlow {
public:
    explicit DcPowerFlow(const NetworkTopology& net);
    ~DcPowerFlow();
    DcPowerFlow(DcPowerFlow&&) noexcept;
    DcPowerFlow& operator=(DcPowerFlow&&) noexcept;

    PowerFlowSolution solve(const InjectionSet& injections) const;

    // Index-based solve for hot loops: injections by bus index (slack and
    // de-energized entries must be zero). Returns flows by line index.
    std::vector<double> solve_flows(const std::vector<double>& injection_kw_by_bus) const;

    const std::vector<bool>& energized() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

PowerFlowSolution dc_power_flow(const NetworkTopology& net, const InjectionSet& injections);
std::vector<LineViolation> check_line_limits(const PowerFlowSolution& sol, const NetworkTopology& net);

constexpr double kDefaultSourceReactancePu = 0.05;
FaultResult fault_current_3ph(const NetworkTopology& net, std::string_view bus,
                              double source_x_pu = kDefaultSourceReactancePu);

struct RestorationOptions {
    size_t max_actions = 3;
    // Bus loads used for the limit check; defaults to load-asset ratings.
    std::optional<InjectionSet> injections;
    // Lines already known to be faulted; never proposed for closing.
    std::set<std::string> out_of_service;
};

// The network as seen right after `failed` (a line or bus id) trips.
NetworkTopology isolate_element(const NetworkTopology& net, std::string_view failed);

RestorationPlan restore_after_outage(const NetworkTopology& net, std::string_view failed,
                                     const RestorationOptions& options = {});

// Loads at their ratings as negative injections on every energized non-slack bus.
InjectionSet rated_load_injections(const NetworkTopology& net);

nlohmann::json to_json(const PowerFlowSolution& sol);
nlohmann::json to_json(const RestorationPlan& plan);
nlohmann::json to_json(const FaultResult& fault);
nlohmann::json to_json(const std::vector<LineViolation>& violations);

} // namespace sles
