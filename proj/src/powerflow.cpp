#include "sles/powerflow.hpp"

#include "sles/error.hpp"

#include <cmath>
#include <deque>
#include <functional>

#include <Eigen/Dense>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace sles {

struct DcPowerFlow::Impl {
    explicit Impl(const NetworkTopology& n) : net(n) {}
    NetworkTopology net;
    std::vector<bool> energized;
    std::vector<long> reduced_index; // bus index -> row in B, -1 for slack / de-energized
    size_t n_reduced = 0;
    Eigen::LDLT<Eigen::MatrixXd> factor;
    double kw_per_pu = 0.0;
    // Copies of the per-line data needed after construction.
    std::vector<size_t> from_idx, to_idx;
    std::vector<double> reactance;
    std::vector<bool> active;
};

DcPowerFlow::DcPowerFlow(const NetworkTopology& net) : impl_(std::make_unique<Impl>(net))
{
    auto& d = *impl_;
    d.energized = energized_mask(net);
    d.kw_per_pu = net.base_mva() * 1000.0;
    const size_t n = net.buses().size();
    d.reduced_index.assign(n, -1);
    for (size_t i = 0; i < n; ++i) {
        if (d.energized[i] && i != net.grid_source_index()) {
            d.reduced_index[i] = static_cast<long>(d.n_reduced++);
        }
    }
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.n_reduced), static_cast<Eigen::Index>(d.n_reduced));
    const auto& lines = net.lines();
    d.from_idx.resize(lines.size());
    d.to_idx.resize(lines.size());
    d.reactance.resize(lines.size());
    d.active.resize(lines.size());
    for (size_t li = 0; li < lines.size(); ++li) {
        const auto& l = lines[li];
        const size_t f = *net.find_bus(l.from_bus);
        const size_t t = *net.find_bus(l.to_bus);
        d.from_idx[li] = f;
        d.to_idx[li] = t;
        d.reactance[li] = l.reactance_pu;
        d.active[li] = l.closed() && d.energized[f] && d.energized[t];
        if (!d.active[li]) continue;
        const double y = 1.0 / l.reactance_pu;
        const long rf = d.reduced_index[f];
        const long rt = d.reduced_index[t];
        if (rf >= 0) b(rf, rf) += y;
        if (rt >= 0) b(rt, rt) += y;
        if (rf >= 0 && rt >= 0) {
            b(rf, rt) -= y;
            b(rt, rf) -= y;
        }
    }
    if (d.n_reduced > 0) {
        d.factor.compute(b);
        const auto diag = d.factor.vectorD();
        const double scale = b.diagonal().cwiseAbs().maxCoeff();
        if (d.factor.info() != Eigen::Success || !d.factor.isPositive() ||
            diag.minCoeff() <= 1e-12 * std::max(scale, 1.0)) {
            throw SingularSystemError("susceptance matrix is singular: an energized component is isolated from the slack");
        }
    }
}

DcPowerFlow::~DcPowerFlow() = default;
DcPowerFlow::DcPowerFlow(DcPowerFlow&&) noexcept = default;
DcPowerFlow& DcPowerFlow::operator=(DcPowerFlow&&) noexcept = default;

const std::vector<bool>& DcPowerFlow::energized() const { return impl_->energized; }

std::vector<double> DcPowerFlow::solve_flows(const std::vector<double>& injection_kw_by_bus) const
{
    const auto& d = *impl_;
    std::vector<double> theta(d.energized.size(), 0.0);
    if (d.n_reduced > 0) {
        Eigen::VectorXd p(static_cast<Eigen::Index>(d.n_reduced));
        for (size_t i = 0; i < d.energized.size(); ++i) {
            if (d.reduced_index[i] >= 0) p(d.reduced_index[i]) = injection_kw_by_bus[i] / d.kw_per_pu;
        }
        const Eigen::VectorXd x = d.factor.solve(p);
        for (size_t i = 0; i < d.energized.size(); ++i) {
            if (d.reduced_index[i] >= 0) theta[i] = x(d.reduced_index[i]);
        }
    }
    std::vector<double> flows(d.active.size(), 0.0);
    for (size_t li = 0; li < flows.size(); ++li) {
        if (!d.active[li]) continue;
        flows[li] = (theta[d.from_idx[li]] - theta[d.to_idx[li]]) / d.reactance[li] * d.kw_per_pu;
    }
    return flows;
}

PowerFlowSolution DcPowerFlow::solve(const InjectionSet& injections) const
{
    const auto& d = *impl_;
    const auto& net = d.net;
    std::vector<double> by_bus(d.energized.size(), 0.0);
    double total = 0.0;
    for (const auto& [bus_id, kw] : injections) {
        const auto idx = net.find_bus(bus_id);
        if (!idx) throw ReferenceError(fmt::format("injection on unknown bus '{}'", bus_id));
        if (*idx == net.grid_source_index()) {
            throw InputError(fmt::format("injection keyed on slack bus '{}'", bus_id));
        }
        if (!d.energized[*idx]) {
            throw InputError(fmt::format("injection on de-energized bus '{}'", bus_id));
        }
        by_bus[*idx] += kw;
        total += kw;
    }

    PowerFlowSolution sol;
    std::vector<double> theta(d.energized.size(), 0.0);
    if (d.n_reduced > 0) {
        Eigen::VectorXd p(static_cast<Eigen::Index>(d.n_reduced));
        for (size_t i = 0; i < by_bus.size(); ++i) {
            if (d.reduced_index[i] >= 0) p(d.reduced_index[i]) = by_bus[i] / d.kw_per_pu;
        }
        const Eigen::VectorXd x = d.factor.solve(p);
        for (size_t i = 0; i < by_bus.size(); ++i) {
            if (d.reduced_index[i] >= 0) theta[i] = x(d.reduced_index[i]);
        }
    }
    for (size_t i = 0; i < by_bus.size(); ++i) {
        if (d.energized[i]) sol.angles_rad[net.buses()[i].id] = theta[i];
    }
    for (size_t li = 0; li < d.active.size(); ++li) {
        const double flow =
            d.active[li] ? (theta[d.from_idx[li]] - theta[d.to_idx[li]]) / d.reactance[li] * d.kw_per_pu : 0.0;
        sol.line_flows_kw[net.lines()[li].id] = flow;
    }
    sol.slack_injection_kw = -total;
    return sol;
}

PowerFlowSolution dc_power_flow(const NetworkTopology& net, const InjectionSet& injections)
{
    return DcPowerFlow(net).solve(injections);
}

std::vector<LineViolation> check_line_limits(const PowerFlowSolution& sol, const NetworkTopology& net)
{
    std::vector<LineViolation> out;
    for (const auto& l : net.lines()) {
        const auto it = sol.line_flows_kw.find(l.id);
        if (it == sol.line_flows_kw.end()) continue;
        const double flow = std::abs(it->second);
        if (flow > l.capacity_kw) out.push_back({l.id, flow, l.capacity_kw});
    }
    return out;
}

namespace {

// Lines whose removal disconnects the closed-switch graph.
std::vector<bool> bridge_lines(const NetworkTopology& net)
{
    const size_t n = net.buses().size();
    std::vector<std::vector<std::pair<size_t, size_t>>> adj(n);
    for (size_t li = 0; li < net.lines().size(); ++li) {
        const auto& l = net.lines()[li];
        if (!l.closed()) continue;
        const size_t a = *net.find_bus(l.from_bus);
        const size_t b = *net.find_bus(l.to_bus);
        adj[a].emplace_back(b, li);
        adj[b].emplace_back(a, li);
    }
    std::vector<bool> bridge(net.lines().size(), false);
    std::vector<long> disc(n, -1), low(n, 0);
    long timer = 0;
    std::function<void(size_t, long)> dfs = [&](size_t u, long via) {
        disc[u] = low[u] = timer++;
        for (const auto& [v, li] : adj[u]) {
            if (static_cast<long>(li) == via) continue;
            if (disc[v] < 0) {
                dfs(v, static_cast<long>(li));
                low[u] = std::min(low[u], low[v]);
                if (low[v] > disc[u]) bridge[li] = true;
            } else {
                low[u] = std::min(low[u], disc[v]);
            }
        }
    };
    for (size_t i = 0; i < n; ++i) {
        if (disc[i] < 0) dfs(i, -1);
    }
    return bridge;
}

} // namespace

FaultResult fault_current_3ph(const NetworkTopology& net, std::string_view bus_id, double source_x_pu)
{
    const auto target = net.find_bus(bus_id);
    if (!target) throw ReferenceError(fmt::format("unknown bus '{}'", bus_id));
    const auto mask = energized_mask(net);
    if (!mask[*target]) throw InputError(fmt::format("bus '{}' is de-energized", bus_id));

    const size_t n = net.buses().size();
    std::vector<std::vector<std::pair<size_t, size_t>>> adj(n);
    for (size_t li = 0; li < net.lines().size(); ++li) {
        const auto& l = net.lines()[li];
        if (!l.closed()) continue;
        const size_t a = *net.find_bus(l.from_bus);
        const size_t b = *net.find_bus(l.to_bus);
        adj[a].emplace_back(b, li);
        adj[b].emplace_back(a, li);
    }
    std::vector<long> via(n, -1), prev(n, -1);
    std::vector<bool> seen(n, false);
    std::deque<size_t> queue{net.grid_source_index()};
    seen[net.grid_source_index()] = true;
    while (!queue.empty()) {
        const size_t u = queue.front();
        queue.pop_front();
        for (const auto& [v, li] : adj[u]) {
            if (seen[v]) continue;
            seen[v] = true;
            prev[v] = static_cast<long>(u);
            via[v] = static_cast<long>(li);
            queue.push_back(v);
        }
    }
    const auto bridges = bridge_lines(net);
    double x = source_x_pu;
    for (size_t v = *target; v != net.grid_source_index(); v = static_cast<size_t>(prev[v])) {
        const auto li = static_cast<size_t>(via[v]);
        if (!bridges[li]) {
            throw InputError(fmt::format("path to bus '{}' is not unique (line '{}' lies on a loop)", bus_id,
                                         net.lines()[li].id));
        }
        x += net.lines()[li].reactance_pu;
    }
    const double kv = net.buses()[*target].nominal_kv;
    const double base_ka = net.base_mva() / (std::sqrt(3.0) * kv);
    return {std::string(bus_id), base_ka / x, x};
}

nlohmann::json to_json(const PowerFlowSolution& sol)
{
    return {{"angles_rad", sol.angles_rad},
            {"line_flows_kw", sol.line_flows_kw},
            {"slack_injection_kw", sol.slack_injection_kw}};
}

nlohmann::json to_json(const std::vector<LineViolation>& violations)
{
    auto out = nlohmann::json::array();
    for (const auto& v : violations) {
        out.push_back({{"line_id", v.line_id}, {"flow_kw", v.flow_kw}, {"capacity_kw", v.capacity_kw}});
    }
    return out;
}

nlohmann::json to_json(const FaultResult& f)
{
    return {{"bus", f.bus}, {"fault_current_ka", f.fault_current_ka}, {"thevenin_x_pu", f.thevenin_x_pu}};
}

nlohmann::json to_json(const RestorationPlan& plan)
{
    auto actions = nlohmann::json::array();
    for (const auto& a : plan.actions) actions.push_back({{"line_id", a.line_id}, {"state", to_string(a.state)}});
    auto rejected = nlohmann::json::array();
    for (const auto& a : plan.rejected_actions) {
        rejected.push_back({{"line_id", a.line_id}, {"state", to_string(a.state)}});
    }
    return {{"actions", actions},
            {"restored_buses", plan.restored_buses},
            {"unserved_kw", plan.unserved_kw},
            {"limit_safe", plan.limit_safe},
            {"rejected_actions", rejected},
            {"rejected_violations", to_json(plan.rejected_violations)}};
}

} // namespace sles
