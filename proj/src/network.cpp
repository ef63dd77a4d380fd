#include "sles/network.hpp"

#include "sles/error.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include <fmt/core.h>

namespace sles {

std::string_view to_string(BusKind k)
{
    switch (k) {
    case BusKind::grid_source: return "grid_source";
    case BusKind::substation: return "substation";
    case BusKind::load_bus: return "load_bus";
    }
    return "?";
}

std::string_view to_string(SwitchState s) { return s == SwitchState::closed ? "closed" : "open"; }

std::string_view to_string(AssetKind k)
{
    switch (k) {
    case AssetKind::pv: return "pv";
    case AssetKind::wind: return "wind";
    case AssetKind::battery: return "battery";
    case AssetKind::fixed_load: return "fixed_load";
    case AssetKind::flexible_load: return "flexible_load";
    case AssetKind::ev_charger: return "ev_charger";
    case AssetKind::grid_connection: return "grid_connection";
    }
    return "?";
}

BusKind bus_kind_from_string(std::string_view s)
{
    if (s == "grid_source") return BusKind::grid_source;
    if (s == "substation") return BusKind::substation;
    if (s == "load_bus") return BusKind::load_bus;
    throw ParseError(fmt::format("unknown bus kind '{}'", s));
}

SwitchState switch_state_from_string(std::string_view s)
{
    if (s == "closed") return SwitchState::closed;
    if (s == "open") return SwitchState::open;
    throw ParseError(fmt::format("unknown switch state '{}'", s));
}

AssetKind asset_kind_from_string(std::string_view s)
{
    for (auto k : {AssetKind::pv, AssetKind::wind, AssetKind::battery, AssetKind::fixed_load,
                   AssetKind::flexible_load, AssetKind::ev_charger, AssetKind::grid_connection}) {
        if (to_string(k) == s) return k;
    }
    throw ParseError(fmt::format("unknown asset kind '{}'", s));
}

NetworkTopology::NetworkTopology(std::vector<Bus> buses, std::vector<Line> lines, std::vector<Asset> assets,
                                 double base_mva)
    : buses_(std::move(buses)), lines_(std::move(lines)), assets_(std::move(assets)), base_mva_(base_mva)
{
    if (!(base_mva_ > 0.0)) {
        throw InputError(fmt::format("base_mva must be positive, got {}", base_mva_));
    }
    size_t sources = 0;
    for (size_t i = 0; i < buses_.size(); ++i) {
        const auto& b = buses_[i];
        if (!bus_index_.emplace(b.id, i).second) {
            throw CardinalityError(fmt::format("duplicate bus id '{}'", b.id));
        }
        if (b.nominal_kv <= 0.0) {
            throw InputError(fmt::format("bus '{}' has non-positive nominal_kv", b.id));
        }
        if (b.kind == BusKind::grid_source) {
            source_index_ = i;
            ++sources;
        }
    }
    if (sources != 1) {
        throw CardinalityError(fmt::format("network needs exactly one grid_source bus, found {}", sources));
    }
    for (size_t i = 0; i < lines_.size(); ++i) {
        const auto& l = lines_[i];
        if (!line_index_.emplace(l.id, i).second) {
            throw CardinalityError(fmt::format("duplicate line id '{}'", l.id));
        }
        for (const auto& end : {l.from_bus, l.to_bus}) {
            if (!bus_index_.contains(end)) {
                throw ReferenceError(fmt::format("line '{}' references unknown bus '{}'", l.id, end));
            }
        }
        if (l.from_bus == l.to_bus) {
            throw InputError(fmt::format("line '{}' connects bus '{}' to itself", l.id, l.from_bus));
        }
        if (!(l.reactance_pu > 0.0)) {
            throw InputError(fmt::format("line '{}' needs reactance_pu > 0", l.id));
        }
        if (!(l.capacity_kw > 0.0)) {
            throw InputError(fmt::format("line '{}' needs capacity_kw > 0", l.id));
        }
    }
    for (size_t i = 0; i < assets_.size(); ++i) {
        const auto& a = assets_[i];
        if (!asset_index_.emplace(a.id, i).second) {
            throw CardinalityError(fmt::format("duplicate asset id '{}'", a.id));
        }
        if (!bus_index_.contains(a.bus)) {
            throw ReferenceError(fmt::format("asset '{}' references unknown bus '{}'", a.id, a.bus));
        }
        if (a.rating_kw < 0.0) {
            throw InputError(fmt::format("asset '{}' has negative rating_kw", a.id));
        }
        if (a.emission_factor_kg_per_kwh < 0.0) {
            throw InputError(fmt::format("asset '{}' has negative emission factor", a.id));
        }
        if (const auto* b = std::get_if<BatteryParams>(&a.params)) {
            if (!(b->eta_charge > 0.0 && b->eta_charge <= 1.0) ||
                !(b->eta_discharge > 0.0 && b->eta_discharge <= 1.0)) {
                throw InputError(fmt::format("battery '{}' efficiencies must lie in (0,1]", a.id));
            }
            if (b->capacity_kwh < 0.0 || b->initial_soc_kwh < 0.0 || b->initial_soc_kwh > b->capacity_kwh) {
                throw InputError(fmt::format("battery '{}' has inconsistent capacity/initial SoC", a.id));
            }
        }
        if (const auto* p = std::get_if<PvParams>(&a.params)) {
            if (!(p->derate > 0.0 && p->derate <= 1.0) || p->dc_kw < 0.0 || p->ac_cap_kw < 0.0) {
                throw InputError(fmt::format("pv '{}' has invalid parameters", a.id));
            }
        }
        if (const auto* w = std::get_if<WindParams>(&a.params)) {
            if (!(0.0 < w->cut_in_ms && w->cut_in_ms < w->rated_ms && w->rated_ms < w->cut_out_ms)) {
                throw InputError(fmt::format("wind '{}' needs 0 < cut_in < rated < cut_out", a.id));
            }
        }
        if (const auto* f = std::get_if<FlexParams>(&a.params)) {
            if (f->shiftable_fraction < 0.0 || f->shiftable_fraction > 1.0) {
                throw InputError(fmt::format("flexible load '{}' needs shiftable_fraction in [0,1]", a.id));
            }
        }
    }
}

std::optional<size_t> NetworkTopology::find_bus(std::string_view id) const
{
    auto it = bus_index_.find(std::string(id));
    if (it == bus_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<size_t> NetworkTopology::find_line(std::string_view id) const
{
    auto it = line_index_.find(std::string(id));
    if (it == line_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<size_t> NetworkTopology::find_asset(std::string_view id) const
{
    auto it = asset_index_.find(std::string(id));
    if (it == asset_index_.end()) return std::nullopt;
    return it->second;
}

const Bus& NetworkTopology::bus(std::string_view id) const
{
    if (auto i = find_bus(id)) return buses_[*i];
    throw ReferenceError(fmt::format("unknown bus '{}'", id));
}

const Line& NetworkTopology::line(std::string_view id) const
{
    if (auto i = find_line(id)) return lines_[*i];
    throw ReferenceError(fmt::format("unknown line '{}'", id));
}

const Asset& NetworkTopology::asset(std::string_view id) const
{
    if (auto i = find_asset(id)) return assets_[*i];
    throw ReferenceError(fmt::format("unknown asset '{}'", id));
}

std::vector<const Asset*> NetworkTopology::assets_at(std::string_view bus_id) const
{
    std::vector<const Asset*> out;
    for (const auto& a : assets_) {
        if (a.bus == bus_id) out.push_back(&a);
    }
    return out;
}

size_t NetworkTopology::count_buses(BusKind kind) const
{
    return static_cast<size_t>(
        std::count_if(buses_.begin(), buses_.end(), [kind](const Bus& b) { return b.kind == kind; }));
}

NetworkTopology NetworkTopology::with_lines(std::vector<Line> lines) const
{
    return NetworkTopology(buses_, std::move(lines), assets_, base_mva_);
}

NetworkTopology NetworkTopology::with_assets(std::vector<Asset> assets) const
{
    return NetworkTopology(buses_, lines_, std::move(assets), base_mva_);
}

bool NetworkTopology::operator==(const NetworkTopology& other) const
{
    return buses_ == other.buses_ && lines_ == other.lines_ && assets_ == other.assets_ &&
           base_mva_ == other.base_mva_;
}

namespace {

struct Adjacency {
    // For each bus index: (neighbor bus index, line index) over closed lines.
    std::vector<std::vector<std::pair<size_t, size_t>>> edges;
};

Adjacency closed_adjacency(const NetworkTopology& net)
{
    Adjacency adj;
    adj.edges.resize(net.buses().size());
    for (size_t li = 0; li < net.lines().size(); ++li) {
        const auto& l = net.lines()[li];
        if (!l.closed()) continue;
        const size_t a = *net.find_bus(l.from_bus);
        const size_t b = *net.find_bus(l.to_bus);
        adj.edges[a].emplace_back(b, li);
        adj.edges[b].emplace_back(a, li);
    }
    return adj;
}

} // namespace

std::vector<bool> energized_mask(const NetworkTopology& net)
{
    const auto adj = closed_adjacency(net);
    std::vector<bool> seen(net.buses().size(), false);
    std::deque<size_t> queue{net.grid_source_index()};
    seen[net.grid_source_index()] = true;
    while (!queue.empty()) {
        const size_t u = queue.front();
        queue.pop_front();
        for (const auto& [v, li] : adj.edges[u]) {
            if (!seen[v]) {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    return seen;
}

std::set<std::string> energized_buses(const NetworkTopology& net)
{
    const auto mask = energized_mask(net);
    std::set<std::string> out;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.insert(net.buses()[i].id);
    }
    return out;
}

NetworkTopology apply_switch_action(const NetworkTopology& net, std::string_view line_id, SwitchState state)
{
    const auto idx = net.find_line(line_id);
    if (!idx) {
        throw ReferenceError(fmt::format("unknown line '{}'", line_id));
    }
    auto lines = net.lines();
    lines[*idx].switch_state = state;
    return net.with_lines(std::move(lines));
}

double bus_load_kw(const NetworkTopology& net, std::string_view bus_id)
{
    double total = 0.0;
    for (const auto& a : net.assets()) {
        if (a.bus == bus_id && is_load(a.kind)) total += a.rating_kw;
    }
    return total;
}

ValidationReport validate_topology(const NetworkTopology& net)
{
    ValidationReport report;
    const size_t n = net.buses().size();

    // Radiality: build a spanning forest over closed lines; every closed line
    // joining two buses already in the same tree closes one fundamental cycle.
    std::vector<std::vector<std::pair<size_t, size_t>>> forest(n);
    std::vector<size_t> parent(n);
    std::iota(parent.begin(), parent.end(), size_t{0});
    auto find = [&](size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (size_t li = 0; li < net.lines().size(); ++li) {
        const auto& l = net.lines()[li];
        if (!l.closed()) continue;
        const size_t a = *net.find_bus(l.from_bus);
        const size_t b = *net.find_bus(l.to_bus);
        const size_t ra = find(a);
        const size_t rb = find(b);
        if (ra != rb) {
            parent[ra] = rb;
            forest[a].emplace_back(b, li);
            forest[b].emplace_back(a, li);
            continue;
        }
        // Path a -> b inside the forest, then the closing line.
        std::vector<long> via_line(n, -1);
        std::vector<long> prev(n, -1);
        std::vector<bool> seen(n, false);
        std::deque<size_t> queue{a};
        seen[a] = true;
        while (!queue.empty() && !seen[b]) {
            const size_t u = queue.front();
            queue.pop_front();
            for (const auto& [v, e] : forest[u]) {
                if (seen[v]) continue;
                seen[v] = true;
                prev[v] = static_cast<long>(u);
                via_line[v] = static_cast<long>(e);
                queue.push_back(v);
            }
        }
        std::vector<std::string> cycle;
        for (size_t v = b; v != a; v = static_cast<size_t>(prev[v])) {
            cycle.push_back(net.lines()[static_cast<size_t>(via_line[v])].id);
        }
        std::reverse(cycle.begin(), cycle.end());
        cycle.push_back(l.id);
        report.radial_violations.push_back(std::move(cycle));
    }

    const auto mask = energized_mask(net);
    for (size_t i = 0; i < n; ++i) {
        if (!mask[i]) report.unreachable_buses.push_back(net.buses()[i].id);
    }

    // Downstream load per line, using the BFS tree from the source. Only
    // meaningful for the radial part; lines closing loops are not tree edges.
    const auto adj = closed_adjacency(net);
    std::vector<long> tree_line(n, -1);
    std::vector<size_t> order;
    std::vector<bool> seen(n, false);
    std::deque<size_t> queue{net.grid_source_index()};
    seen[net.grid_source_index()] = true;
    std::vector<size_t> tree_parent(n, n);
    while (!queue.empty()) {
        const size_t u = queue.front();
        queue.pop_front();
        order.push_back(u);
        for (const auto& [v, li] : adj.edges[u]) {
            if (seen[v]) continue;
            seen[v] = true;
            tree_parent[v] = u;
            tree_line[v] = static_cast<long>(li);
            queue.push_back(v);
        }
    }
    std::vector<double> subtree_load(n, 0.0);
    for (size_t i = 0; i < n; ++i) subtree_load[i] = bus_load_kw(net, net.buses()[i].id);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const size_t v = *it;
        if (tree_parent[v] == n) continue;
        subtree_load[tree_parent[v]] += subtree_load[v];
        const auto& l = net.lines()[static_cast<size_t>(tree_line[v])];
        if (l.capacity_kw < subtree_load[v]) {
            report.capacity_warnings.push_back({l.id, l.capacity_kw, subtree_load[v]});
        }
    }
    std::sort(report.capacity_warnings.begin(), report.capacity_warnings.end(),
              [](const auto& x, const auto& y) { return x.line_id < y.line_id; });
    return report;
}

} // namespace sles
