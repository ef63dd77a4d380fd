#include "sles/error.hpp"
#include "sles/network.hpp"

#include "../support/random_networks.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <deque>
#include <fstream>
#include <map>

using namespace sles;
using nlohmann::json;

namespace {

std::string data(const std::string& name) { return std::string(SLES_DATA_DIR) + "/" + name; }

json threebus_doc()
{
    std::ifstream in(data("threebus.json"));
    return json::parse(in);
}

// Independent reachability: repeated relaxation over the closed line list.
std::set<std::string> reachable(const NetworkTopology& net)
{
    std::set<std::string> seen{net.grid_source().id};
    for (bool grew = true; grew;) {
        grew = false;
        for (const auto& l : net.lines()) {
            if (!l.closed()) continue;
            const bool f = seen.count(l.from_bus) > 0, t = seen.count(l.to_bus) > 0;
            if (f != t) {
                seen.insert(f ? l.to_bus : l.from_bus);
                grew = true;
            }
        }
    }
    return seen;
}

} // namespace

TEST_CASE("three-bus fixture loads")
{
    const auto net = load_network_file(data("threebus.json"));
    CHECK(net.buses().size() == 3);
    CHECK(net.lines().size() == 2);
    CHECK(net.grid_source().id == "G");
    CHECK(net.base_mva() == 10.0);
    CHECK(validate_topology(net).empty());
    CHECK(bus_load_kw(net, "B") == 1000.0);
}

TEST_CASE("keele fixture shape")
{
    const auto net = load_network_file(data("keele.json"));
    CHECK(net.count_buses(BusKind::substation) == 25);
    CHECK(net.count_buses(BusKind::grid_source) == 1);
    CHECK(net.count_buses(BusKind::load_bus) == 30);
    size_t ev = 0;
    for (const auto& a : net.assets()) ev += a.kind == AssetKind::ev_charger;
    CHECK(ev == 20);
    const auto& pv = net.asset("solar_farm");
    CHECK(pv.get<PvParams>().dc_kw == 5500.0);
    CHECK(pv.get<PvParams>().ac_cap_kw == 4400.0);
    CHECK(net.asset("wind_turbines").rating_kw == 1900.0);
    CHECK(net.asset("battery").rating_kw == 1000.0);
    const auto report = validate_topology(net);
    CHECK(report.radial_violations.empty());
    CHECK(report.unreachable_buses.empty());
    CHECK(energized_buses(net).size() == net.buses().size());
}

TEST_CASE("load errors")
{
    SUBCASE("dangling bus reference")
    {
        auto doc = threebus_doc();
        doc["lines"][1]["to_bus"] = "Z";
        CHECK_THROWS_AS(load_network(doc), ReferenceError);
    }
    SUBCASE("asset on unknown bus")
    {
        auto doc = threebus_doc();
        doc["assets"][0]["bus"] = "Z";
        CHECK_THROWS_AS(load_network(doc), ReferenceError);
    }
    SUBCASE("no grid source")
    {
        auto doc = threebus_doc();
        doc["buses"][0]["kind"] = "substation";
        CHECK_THROWS_AS(load_network(doc), CardinalityError);
    }
    SUBCASE("two grid sources")
    {
        auto doc = threebus_doc();
        doc["buses"][1]["kind"] = "grid_source";
        CHECK_THROWS_AS(load_network(doc), CardinalityError);
    }
    SUBCASE("duplicate bus id")
    {
        auto doc = threebus_doc();
        doc["buses"][2]["id"] = "A";
        CHECK_THROWS_AS(load_network(doc), CardinalityError);
    }
    SUBCASE("bad enum and missing field")
    {
        auto doc = threebus_doc();
        doc["lines"][0]["switch_state"] = "ajar";
        CHECK_THROWS_AS(load_network(doc), ParseError);
        doc = threebus_doc();
        doc["lines"][0].erase("reactance_pu");
        CHECK_THROWS_AS(load_network(doc), ParseError);
        CHECK_THROWS_AS(load_network(json::array()), ParseError);
    }
    SUBCASE("line invariants")
    {
        auto doc = threebus_doc();
        doc["lines"][0]["reactance_pu"] = 0.0;
        CHECK_THROWS_AS(load_network(doc), InputError);
        doc = threebus_doc();
        doc["lines"][0]["to_bus"] = "G";
        CHECK_THROWS_AS(load_network(doc), InputError);
        doc = threebus_doc();
        doc["lines"][0]["capacity_kw"] = -1.0;
        CHECK_THROWS_AS(load_network(doc), InputError);
    }
    SUBCASE("asset invariants")
    {
        auto doc = threebus_doc();
        doc["assets"][0]["rating_kw"] = -5.0;
        CHECK_THROWS_AS(load_network(doc), InputError);
        doc = threebus_doc();
        doc["assets"].push_back({{"id", "bess"}, {"bus", "A"}, {"kind", "battery"}, {"rating_kw", 100.0},
                                 {"extra", {{"capacity_kwh", 200.0}, {"eta_charge", 1.2}}}});
        CHECK_THROWS_AS(load_network(doc), InputError);
    }
    CHECK_THROWS_AS(load_network_file(data("missing.json")), ParseError);
}

TEST_CASE("closed ring reports its cycle")
{
    const auto net = load_network_file(data("ring.json"));
    const auto report = validate_topology(net);
    REQUIRE(report.radial_violations.size() == 1);
    auto cycle = report.radial_violations[0];
    std::sort(cycle.begin(), cycle.end());
    CHECK(cycle == std::vector<std::string>{"L1", "L2", "L3"});
    CHECK(report.unreachable_buses.empty());
    CHECK_FALSE(report.empty());

    const auto opened = apply_switch_action(net, "L2", SwitchState::open);
    CHECK(validate_topology(opened).radial_violations.empty());
    CHECK(energized_buses(opened) == energized_buses(net));
}

TEST_CASE("open switch isolates B")
{
    const auto net = load_network_file(data("threebus.json"));
    const auto opened = apply_switch_action(net, "L2", SwitchState::open);
    CHECK(validate_topology(opened).unreachable_buses == std::vector<std::string>{"B"});
    CHECK(energized_buses(opened) == std::set<std::string>{"G", "A"});
    CHECK(net.line("L2").closed());
    CHECK(energized_buses(net).size() == 3);
}

TEST_CASE("capacity warnings use downstream ratings")
{
    auto doc = threebus_doc();
    doc["lines"][0]["capacity_kw"] = 900.0;
    const auto report = validate_topology(load_network(doc));
    REQUIRE(report.capacity_warnings.size() == 1);
    CHECK(report.capacity_warnings[0] == ValidationReport::CapacityWarning{"L1", 900.0, 1000.0});
}

TEST_CASE("switch actions")
{
    const auto net = load_network_file(data("threebus.json"));
    CHECK(apply_switch_action(net, "L1", SwitchState::closed) == net);
    CHECK_THROWS_AS(apply_switch_action(net, "L99", SwitchState::open), ReferenceError);
}

TEST_CASE("property: energization matches an independent traversal and is monotone")
{
    for (uint64_t seed = 1; seed <= 200; ++seed) {
        CAPTURE(seed);
        const auto net = gen::random_network(seed, 3 + seed % 12, seed % 5, 0.3);
        const auto e = energized_buses(net);
        REQUIRE(e == reachable(net));
        CHECK(e.count(net.grid_source().id) == 1);
        const auto& l = net.lines()[seed % net.lines().size()];
        const auto closed = apply_switch_action(net, l.id, SwitchState::closed);
        const auto opened = apply_switch_action(net, l.id, SwitchState::open);
        const auto ec = energized_buses(closed);
        const auto eo = energized_buses(opened);
        CHECK(std::includes(ec.begin(), ec.end(), e.begin(), e.end()));
        CHECK(std::includes(e.begin(), e.end(), eo.begin(), eo.end()));

        const auto toggled = apply_switch_action(net, l.id, l.closed() ? SwitchState::open : SwitchState::closed);
        CHECK(apply_switch_action(toggled, l.id, l.switch_state) == net);
    }
}

TEST_CASE("property: spanning trees are radial and cycle count matches the cyclomatic number")
{
    for (uint64_t seed = 1; seed <= 200; ++seed) {
        CAPTURE(seed);
        const auto tree = gen::random_network(seed, 2 + seed % 20, 0);
        const auto r = validate_topology(tree);
        CHECK(r.radial_violations.empty());
        CHECK(r.unreachable_buses.empty());

        const auto meshed = gen::random_network(seed, 2 + seed % 20, seed % 6, 1.0);
        // Connected graph: independent cycles = closed lines - buses + 1.
        size_t closed = 0;
        for (const auto& l : meshed.lines()) closed += l.closed();
        const auto rm = validate_topology(meshed);
        CHECK(rm.radial_violations.size() == closed - meshed.buses().size() + 1);
        for (const auto& cycle : rm.radial_violations) CHECK(cycle.size() >= 2);
    }
}

TEST_CASE("property: serialize then load round-trips")
{
    const auto keele = load_network_file(data("keele.json"));
    CHECK(load_network(to_json(keele)) == keele);
    for (uint64_t seed = 1; seed <= 50; ++seed) {
        const auto net = gen::random_network(seed, 2 + seed % 15, seed % 4, 0.5);
        CHECK(load_network(to_json(net)) == net);
        CHECK(load_network(json::parse(to_json(net).dump())) == net);
    }
}
