#include "sles/network.hpp"

#include "sles/error.hpp"

#include <fstream>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace sles {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, std::string_view where)
{
    if (!obj.is_object() || !obj.contains(key)) {
        throw ParseError(fmt::format("{}: missing field '{}'", where, key));
    }
    return obj.at(key);
}

std::string req_string(const json& obj, const char* key, std::string_view where)
{
    const auto& v = require(obj, key, where);
    if (!v.is_string()) throw ParseError(fmt::format("{}: field '{}' must be a string", where, key));
    return v.get<std::string>();
}

double req_number(const json& obj, const char* key, std::string_view where)
{
    const auto& v = require(obj, key, where);
    if (!v.is_number()) throw ParseError(fmt::format("{}: field '{}' must be a number", where, key));
    return v.get<double>();
}

double opt_number(const json& obj, const char* key, double fallback, std::string_view where)
{
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ParseError(fmt::format("{}: field '{}' must be a number", where, key));
    return v.get<double>();
}

AssetParams parse_params(AssetKind kind, const json& extra, std::string_view where)
{
    switch (kind) {
    case AssetKind::pv:
        return PvParams{req_number(extra, "dc_kw", where), req_number(extra, "ac_cap_kw", where),
                        opt_number(extra, "derate", 1.0, where)};
    case AssetKind::wind: {
        WindParams w;
        w.cut_in_ms = opt_number(extra, "cut_in", w.cut_in_ms, where);
        w.rated_ms = opt_number(extra, "rated", w.rated_ms, where);
        w.cut_out_ms = opt_number(extra, "cut_out", w.cut_out_ms, where);
        return w;
    }
    case AssetKind::battery: {
        BatteryParams b;
        b.capacity_kwh = opt_number(extra, "capacity_kwh", b.capacity_kwh, where);
        b.eta_charge = opt_number(extra, "eta_charge", b.eta_charge, where);
        b.eta_discharge = opt_number(extra, "eta_discharge", b.eta_discharge, where);
        b.initial_soc_kwh = opt_number(extra, "initial_soc_kwh", b.capacity_kwh / 2.0, where);
        return b;
    }
    case AssetKind::flexible_load:
        return FlexParams{opt_number(extra, "shiftable_fraction", 0.0, where)};
    default:
        return std::monostate{};
    }
}

json params_to_json(const Asset& a)
{
    json extra = json::object();
    extra["emission_factor_kg_per_kwh"] = a.emission_factor_kg_per_kwh;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PvParams>) {
                extra["dc_kw"] = p.dc_kw;
                extra["ac_cap_kw"] = p.ac_cap_kw;
                extra["derate"] = p.derate;
            } else if constexpr (std::is_same_v<T, WindParams>) {
                extra["cut_in"] = p.cut_in_ms;
                extra["rated"] = p.rated_ms;
                extra["cut_out"] = p.cut_out_ms;
            } else if constexpr (std::is_same_v<T, BatteryParams>) {
                extra["capacity_kwh"] = p.capacity_kwh;
                extra["eta_charge"] = p.eta_charge;
                extra["eta_discharge"] = p.eta_discharge;
                extra["initial_soc_kwh"] = p.initial_soc_kwh;
            } else if constexpr (std::is_same_v<T, FlexParams>) {
                extra["shiftable_fraction"] = p.shiftable_fraction;
            }
        },
        a.params);
    return extra;
}

} // namespace

Line line_from_json(const json& jl)
{
    if (!jl.is_object()) throw ParseError("line must be an object");
    Line l;
    l.id = req_string(jl, "id", "line");
    const auto where = fmt::format("line '{}'", l.id);
    l.from_bus = req_string(jl, "from_bus", where);
    l.to_bus = req_string(jl, "to_bus", where);
    l.reactance_pu = req_number(jl, "reactance_pu", where);
    l.capacity_kw = req_number(jl, "capacity_kw", where);
    l.switch_state = jl.contains("switch_state") ? switch_state_from_string(req_string(jl, "switch_state", where))
                                                 : SwitchState::closed;
    return l;
}

Asset asset_from_json(const json& ja)
{
    if (!ja.is_object()) throw ParseError("asset must be an object");
    Asset a;
    a.id = req_string(ja, "id", "asset");
    const auto where = fmt::format("asset '{}'", a.id);
    a.bus = req_string(ja, "bus", where);
    a.kind = asset_kind_from_string(req_string(ja, "kind", where));
    a.rating_kw = req_number(ja, "rating_kw", where);
    const json extra = ja.contains("extra") ? ja.at("extra") : json::object();
    if (!extra.is_object()) throw ParseError(fmt::format("{}: 'extra' must be an object", where));
    a.emission_factor_kg_per_kwh = opt_number(extra, "emission_factor_kg_per_kwh", 0.0, where);
    a.params = parse_params(a.kind, extra, where);
    return a;
}

json to_json(const Line& l)
{
    return {{"id", l.id},
            {"from_bus", l.from_bus},
            {"to_bus", l.to_bus},
            {"reactance_pu", l.reactance_pu},
            {"capacity_kw", l.capacity_kw},
            {"switch_state", to_string(l.switch_state)}};
}

json to_json(const Asset& a)
{
    return {{"id", a.id}, {"bus", a.bus}, {"kind", to_string(a.kind)}, {"rating_kw", a.rating_kw}, {"extra", params_to_json(a)}};
}

NetworkTopology load_network(const json& doc)
{
    if (!doc.is_object()) throw ParseError("network document must be an object");
    for (const char* key : {"buses", "lines", "assets"}) {
        if (!doc.contains(key) || !doc.at(key).is_array()) {
            throw ParseError(fmt::format("network document needs array '{}'", key));
        }
    }
    std::vector<Bus> buses;
    for (const auto& jb : doc.at("buses")) {
        Bus b;
        b.id = req_string(jb, "id", "bus");
        const auto where = fmt::format("bus '{}'", b.id);
        b.name = jb.contains("name") ? req_string(jb, "name", where) : b.id;
        b.kind = bus_kind_from_string(req_string(jb, "kind", where));
        b.nominal_kv = opt_number(jb, "nominal_kv", 11.0, where);
        buses.push_back(std::move(b));
    }
    std::vector<Line> lines;
    for (const auto& jl : doc.at("lines")) lines.push_back(line_from_json(jl));
    std::vector<Asset> assets;
    for (const auto& ja : doc.at("assets")) assets.push_back(asset_from_json(ja));
    const double base = doc.contains("base_mva") ? req_number(doc, "base_mva", "network") : 10.0;
    return NetworkTopology(std::move(buses), std::move(lines), std::move(assets), base);
}

NetworkTopology load_network_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(fmt::format("cannot open network file '{}'", path));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("{}: {}", path, e.what()));
    }
    return load_network(doc);
}

json to_json(const NetworkTopology& net)
{
    json doc;
    doc["base_mva"] = net.base_mva();
    doc["buses"] = json::array();
    for (const auto& b : net.buses()) {
        doc["buses"].push_back(
            {{"id", b.id}, {"name", b.name}, {"kind", to_string(b.kind)}, {"nominal_kv", b.nominal_kv}});
    }
    doc["lines"] = json::array();
    for (const auto& l : net.lines()) doc["lines"].push_back(to_json(l));
    doc["assets"] = json::array();
    for (const auto& a : net.assets()) doc["assets"].push_back(to_json(a));
    return doc;
}

json to_json(const ValidationReport& r)
{
    json doc;
    doc["radial_violations"] = r.radial_violations;
    doc["unreachable_buses"] = r.unreachable_buses;
    doc["capacity_warnings"] = json::array();
    for (const auto& w : r.capacity_warnings) {
        doc["capacity_warnings"].push_back(
            {{"line_id", w.line_id}, {"capacity_kw", w.capacity_kw}, {"downstream_kw", w.downstream_kw}});
    }
    return doc;
}

} // namespace sles
