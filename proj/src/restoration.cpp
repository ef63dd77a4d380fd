#include "sles/powerflow.hpp"

#include "sles/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include <fmt/core.h>

namespace sles {

InjectionSet rated_load_injections(const NetworkTopology& net)
{
    InjectionSet out;
    const auto mask = energized_mask(net);
    for (size_t i = 0; i < net.buses().size(); ++i) {
        if (i == net.grid_source_index() || !mask[i]) continue;
        const double load = bus_load_kw(net, net.buses()[i].id);
        if (load > 0.0) out[net.buses()[i].id] = -load;
    }
    return out;
}

NetworkTopology isolate_element(const NetworkTopology& net, std::string_view failed)
{
    auto lines = net.lines();
    if (const auto li = net.find_line(failed)) {
        lines[*li].switch_state = SwitchState::open;
    } else if (net.find_bus(failed)) {
        for (auto& l : lines) {
            if (l.from_bus == failed || l.to_bus == failed) l.switch_state = SwitchState::open;
        }
    } else {
        throw ReferenceError(fmt::format("unknown element '{}'", failed));
    }
    return net.with_lines(std::move(lines));
}

namespace {

struct Evaluator {
    const NetworkTopology& base; // post-outage topology
    std::vector<std::pair<size_t, size_t>> ends; // line -> (from, to) bus indices
    std::vector<double> bus_load; // positive kW demand per bus index
    std::vector<double> bus_injection;
    std::vector<bool> target; // buses that were fed before the outage
    long failed_bus = -1;

    double unserved(const std::vector<bool>& energized) const
    {
        double total = 0.0;
        for (size_t i = 0; i < bus_load.size(); ++i) {
            if ((target[i] && !energized[i]) || static_cast<long>(i) == failed_bus) total += bus_load[i];
        }
        return total;
    }

    std::vector<bool> energize(const std::vector<bool>& closed) const
    {
        const size_t n = bus_load.size();
        std::vector<std::vector<size_t>> adj(n);
        for (size_t li = 0; li < closed.size(); ++li) {
            if (!closed[li]) continue;
            adj[ends[li].first].push_back(ends[li].second);
            adj[ends[li].second].push_back(ends[li].first);
        }
        std::vector<bool> seen(n, false);
        std::deque<size_t> queue{base.grid_source_index()};
        seen[base.grid_source_index()] = true;
        while (!queue.empty()) {
            const size_t u = queue.front();
            queue.pop_front();
            for (size_t v : adj[u]) {
                if (!seen[v]) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        return seen;
    }

    bool radial(const std::vector<bool>& closed) const
    {
        std::vector<size_t> parent(bus_load.size());
        std::iota(parent.begin(), parent.end(), size_t{0});
        auto find = [&](size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (size_t li = 0; li < closed.size(); ++li) {
            if (!closed[li]) continue;
            const size_t a = find(ends[li].first);
            const size_t b = find(ends[li].second);
            if (a == b) return false;
            parent[a] = b;
        }
        return true;
    }

    std::vector<LineViolation> violations(const std::vector<bool>& closed, const std::vector<bool>& energized) const
    {
        auto lines = base.lines();
        for (size_t li = 0; li < lines.size(); ++li) {
            lines[li].switch_state = closed[li] ? SwitchState::closed : SwitchState::open;
        }
        const auto config = base.with_lines(std::move(lines));
        const DcPowerFlow pf(config);
        std::vector<double> inj(bus_injection.size(), 0.0);
        for (size_t i = 0; i < inj.size(); ++i) {
            if (energized[i] && i != base.grid_source_index()) inj[i] = bus_injection[i];
        }
        const auto flows = pf.solve_flows(inj);
        std::vector<LineViolation> out;
        for (size_t li = 0; li < flows.size(); ++li) {
            const auto& l = config.lines()[li];
            if (std::abs(flows[li]) > l.capacity_kw) out.push_back({l.id, std::abs(flows[li]), l.capacity_kw});
        }
        return out;
    }
};

// Advances `idx` to the next k-combination of [0, n) in lexicographic order.
bool next_combination(std::vector<size_t>& idx, size_t n)
{
    const size_t k = idx.size();
    for (size_t i = k; i-- > 0;) {
        if (idx[i] < n - k + i) {
            ++idx[i];
            for (size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
            return true;
        }
    }
    return false;
}

} // namespace

RestorationPlan restore_after_outage(const NetworkTopology& net, std::string_view failed,
                                     const RestorationOptions& options)
{
    const auto pre_energized = energized_mask(net);
    const auto post = isolate_element(net, failed);

    Evaluator ev{post, {}, {}, {}, {}, -1};
    const size_t n = post.buses().size();
    for (const auto& l : post.lines()) ev.ends.emplace_back(*post.find_bus(l.from_bus), *post.find_bus(l.to_bus));
    if (const auto b = post.find_bus(failed)) ev.failed_bus = static_cast<long>(*b);

    const InjectionSet injections = options.injections ? *options.injections : [&] {
        InjectionSet all;
        for (size_t i = 0; i < n; ++i) {
            const double load = bus_load_kw(net, net.buses()[i].id);
            if (i != net.grid_source_index() && load > 0.0) all[net.buses()[i].id] = -load;
        }
        return all;
    }();
    ev.bus_injection.assign(n, 0.0);
    ev.bus_load.assign(n, 0.0);
    for (const auto& [bus_id, kw] : injections) {
        const auto idx = post.find_bus(bus_id);
        if (!idx) throw ReferenceError(fmt::format("injection on unknown bus '{}'", bus_id));
        ev.bus_injection[*idx] += kw;
    }
    for (size_t i = 0; i < n; ++i) ev.bus_load[i] = std::max(-ev.bus_injection[i], 0.0);
    ev.target = pre_energized;
    if (ev.failed_bus >= 0) ev.target[static_cast<size_t>(ev.failed_bus)] = false;

    // Switchable lines: everything except the faulted element and its
    // neighbours (for a bus fault), sorted by id for deterministic ties.
    std::vector<size_t> candidates;
    for (size_t li = 0; li < post.lines().size(); ++li) {
        const auto& l = post.lines()[li];
        const bool is_failed = l.id == failed || l.from_bus == failed || l.to_bus == failed ||
                               options.out_of_service.contains(l.id);
        if (!is_failed) candidates.push_back(li);
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](size_t a, size_t b) { return post.lines()[a].id < post.lines()[b].id; });

    std::vector<bool> base_closed(post.lines().size());
    for (size_t li = 0; li < base_closed.size(); ++li) base_closed[li] = post.lines()[li].closed();

    // No configuration can beat the one with every usable line closed.
    auto all_closed = base_closed;
    for (size_t li : candidates) all_closed[li] = true;
    const double bound = ev.unserved(ev.energize(all_closed));

    const auto post_energized = ev.energize(base_closed);
    constexpr double kInf = std::numeric_limits<double>::infinity();
    constexpr double kEps = 1e-9;
    double best_unserved = kInf;
    std::vector<size_t> best_toggle;
    std::vector<bool> best_energized;
    bool found = false;
    double rejected_unserved = kInf;
    std::vector<size_t> rejected_toggle;
    std::vector<LineViolation> rejected_violations;

    const size_t cap = std::min(options.max_actions, candidates.size());
    for (size_t k = 0; k <= cap; ++k) {
        if (found && best_unserved <= bound + kEps) break;
        std::vector<size_t> idx(k);
        std::iota(idx.begin(), idx.end(), size_t{0});
        do {
            auto closed = base_closed;
            for (size_t i : idx) closed[candidates[i]] = !closed[candidates[i]];
            if (!ev.radial(closed)) continue;
            const auto energized = ev.energize(closed);
            const double unserved = ev.unserved(energized);
            if (unserved >= best_unserved - kEps) continue;
            auto viol = ev.violations(closed, energized);
            std::vector<size_t> toggled;
            for (size_t i : idx) toggled.push_back(candidates[i]);
            if (!viol.empty()) {
                if (unserved < rejected_unserved - kEps) {
                    rejected_unserved = unserved;
                    rejected_toggle = toggled;
                    rejected_violations = std::move(viol);
                }
                continue;
            }
            best_unserved = unserved;
            best_toggle = std::move(toggled);
            best_energized = energized;
            found = true;
            if (best_unserved <= bound + kEps) break;
        } while (k > 0 && next_combination(idx, candidates.size()));
    }

    auto to_actions = [&](const std::vector<size_t>& toggles) {
        std::vector<SwitchAction> closes, opens;
        for (size_t li : toggles) {
            const auto& l = post.lines()[li];
            (l.closed() ? opens : closes).push_back({l.id, l.closed() ? SwitchState::open : SwitchState::closed});
        }
        auto by_id = [](const SwitchAction& a, const SwitchAction& b) { return a.line_id < b.line_id; };
        std::sort(closes.begin(), closes.end(), by_id);
        std::sort(opens.begin(), opens.end(), by_id);
        closes.insert(closes.end(), opens.begin(), opens.end());
        return closes;
    };

    RestorationPlan plan;
    if (!found) {
        plan.limit_safe = false;
        plan.unserved_kw = ev.unserved(post_energized);
    } else {
        plan.actions = to_actions(best_toggle);
        plan.unserved_kw = best_unserved;
        for (size_t i = 0; i < n; ++i) {
            if (ev.target[i] && !post_energized[i] && best_energized[i]) plan.restored_buses.insert(post.buses()[i].id);
        }
    }
    if (rejected_unserved < best_unserved - kEps) {
        plan.limit_safe = false;
        plan.rejected_actions = to_actions(rejected_toggle);
        plan.rejected_violations = std::move(rejected_violations);
    }
    return plan;
}

} // namespace sles
