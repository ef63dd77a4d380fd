#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sles {

enum class BusKind { grid_source, substation, load_bus };
enum class SwitchState { closed, open };
enum class AssetKind { pv, wind, battery, fixed_load, flexible_load, ev_charger, grid_connection };

std::string_view to_string(BusKind k);
std::string_view to_string(SwitchState s);
std::string_view to_string(AssetKind k);
BusKind bus_kind_from_string(std::string_view s);
SwitchState switch_state_from_string(std::string_view s);
AssetKind asset_kind_from_string(std::string_view s);

inline bool is_load(AssetKind k)
{
    return k == AssetKind::fixed_load || k == AssetKind::flexible_load || k == AssetKind::ev_charger;
}

inline bool is_renewable(AssetKind k) { return k == AssetKind::pv || k == AssetKind::wind; }

struct Bus {
    std::string id;
    std::string name;
    BusKind kind = BusKind::load_bus;
    double nominal_kv = 11.0;

    bool operator==(const Bus&) const = default;
};

struct Line {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    double reactance_pu = 0.0;
    double capacity_kw = 0.0;
    SwitchState switch_state = SwitchState::closed;

    bool closed() const { return switch_state == SwitchState::closed; }
    bool operator==(const Line&) const = default;
};

struct PvParams {
    double dc_kw = 0.0;
    double ac_cap_kw = 0.0;
    double derate = 1.0;
    bool operator==(const PvParams&) const = default;
};

struct WindParams {
    double cut_in_ms = 3.0;
    double rated_ms = 12.0;
    double cut_out_ms = 25.0;
    bool operator==(const WindParams&) const = default;
};

struct BatteryParams {
    double capacity_kwh = 2000.0;
    double eta_charge = 0.95;
    double eta_discharge = 0.95;
    double initial_soc_kwh = 1000.0;
    bool operator==(const BatteryParams&) const = default;
};

struct FlexParams {
    double shiftable_fraction = 0.0;
    bool operator==(const FlexParams&) const = default;
};

using AssetParams = std::variant<std::monostate, PvParams, WindParams, BatteryParams, FlexParams>;

struct Asset {
    std::string id;
    std::string bus;
    AssetKind kind = AssetKind::fixed_load;
    double rating_kw = 0.0;
    double emission_factor_kg_per_kwh = 0.0;
    AssetParams params;

    template <typename T>
    const T& get() const { return std::get<T>(params); }
    bool operator==(const Asset&) const = default;
};

// Immutable campus network. Construction validates cross references and the
// single-grid-source rule; every "modification" returns a new value.
class NetworkTopology {
public:
    NetworkTopology(std::vector<Bus> buses, std::vector<Line> lines, std::vector<Asset> assets,
                    double base_mva = 10.0);

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    const std::vector<Asset>& assets() const { return assets_; }
    double base_mva() const { return base_mva_; }

    const Bus& grid_source() const { return buses_[source_index_]; }
    size_t grid_source_index() const { return source_index_; }

    std::optional<size_t> find_bus(std::string_view id) const;
    std::optional<size_t> find_line(std::string_view id) const;
    std::optional<size_t> find_asset(std::string_view id) const;
    const Bus& bus(std::string_view id) const;
    const Line& line(std::string_view id) const;
    const Asset& asset(std::string_view id) const;

    std::vector<const Asset*> assets_at(std::string_view bus_id) const;
    size_t count_buses(BusKind kind) const;

    NetworkTopology with_lines(std::vector<Line> lines) const;
    NetworkTopology with_assets(std::vector<Asset> assets) const;

    bool operator==(const NetworkTopology& other) const;

private:
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::vector<Asset> assets_;
    double base_mva_;
    size_t source_index_ = 0;
    std::unordered_map<std::string, size_t> bus_index_;
    std::unordered_map<std::string, size_t> line_index_;
    std::unordered_map<std::string, size_t> asset_index_;
};

struct ValidationReport {
    // Each cycle is the ordered list of line ids forming one independent loop.
    std::vector<std::vector<std::string>> radial_violations;
    std::vector<std::string> unreachable_buses;
    struct CapacityWarning {
        std::string line_id;
        double capacity_kw = 0.0;
        double downstream_kw = 0.0;
        bool operator==(const CapacityWarning&) const = default;
    };
    std::vector<CapacityWarning> capacity_warnings;

    bool empty() const
    {
        return radial_violations.empty() && unreachable_buses.empty() && capacity_warnings.empty();
    }
    bool operator==(const ValidationReport&) const = default;
};

NetworkTopology load_network(const nlohmann::json& document);
NetworkTopology load_network_file(const std::string& path);
nlohmann::json to_json(const NetworkTopology& net);
Line line_from_json(const nlohmann::json& doc);
Asset asset_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Line& line);
nlohmann::json to_json(const Asset& asset);

ValidationReport validate_topology(const NetworkTopology& net);
NetworkTopology apply_switch_action(const NetworkTopology& net, std::string_view line_id, SwitchState state);
std::set<std::string> energized_buses(const NetworkTopology& net);

// Index-based variant used on hot paths; entry i is true when bus i is fed.
std::vector<bool> energized_mask(const NetworkTopology& net);

// Sum of load-asset ratings per bus id.
double bus_load_kw(const NetworkTopology& net, std::string_view bus_id);

nlohmann::json to_json(const ValidationReport& report);

} // namespace sles
