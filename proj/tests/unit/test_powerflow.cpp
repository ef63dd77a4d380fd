#include "sles/error.hpp"
#include "sles/network.hpp"
#include "sles/powerflow.hpp"

#include "../support/random_networks.hpp"
#include "../support/restoration_oracle.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <random>

using namespace sles;

namespace {

std::string data(const std::string& name) { return std::string(SLES_DATA_DIR) + "/" + name; }

NetworkTopology two_bus(double x = 0.1, double capacity = 2000.0)
{
    return NetworkTopology({{"G", "G", BusKind::grid_source, 11.0}, {"A", "A", BusKind::substation, 11.0}},
                           {{"L1", "G", "A", x, capacity, SwitchState::closed}}, {});
}

// Reference DC solve with plain Gaussian elimination on the reduced B matrix.
std::map<std::string, double> reference_angles(const NetworkTopology& net, const InjectionSet& inj)
{
    const auto live = energized_buses(net);
    std::vector<std::string> ids;
    for (const auto& b : net.buses()) {
        if (live.count(b.id) && b.kind != BusKind::grid_source) ids.push_back(b.id);
    }
    const size_t n = ids.size();
    std::map<std::string, size_t> at;
    for (size_t i = 0; i < n; ++i) at[ids[i]] = i;
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (const auto& l : net.lines()) {
        if (!l.closed() || !live.count(l.from_bus)) continue;
        const double y = 1.0 / l.reactance_pu;
        const auto f = at.find(l.from_bus), t = at.find(l.to_bus);
        if (f != at.end()) a[f->second][f->second] += y;
        if (t != at.end()) a[t->second][t->second] += y;
        if (f != at.end() && t != at.end()) {
            a[f->second][t->second] -= y;
            a[t->second][f->second] -= y;
        }
    }
    for (const auto& [bus, kw] : inj) a[at.at(bus)][n] = kw / (net.base_mva() * 1000.0);
    for (size_t c = 0; c < n; ++c) {
        size_t p = c;
        for (size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        }
        std::swap(a[c], a[p]);
        for (size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::map<std::string, double> theta{{net.grid_source().id, 0.0}};
    for (size_t i = 0; i < n; ++i) theta[ids[i]] = a[i][n] / a[i][i];
    return theta;
}

InjectionSet random_injections(const NetworkTopology& net, std::mt19937_64& rng, double scale = 500.0)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    InjectionSet inj;
    const auto live = energized_buses(net);
    for (const auto& b : net.buses()) {
        if (b.kind != BusKind::grid_source && live.count(b.id)) inj[b.id] = scale * u(rng);
    }
    return inj;
}

// Net flow leaving each bus through its lines plus its injection.
double worst_imbalance(const NetworkTopology& net, const InjectionSet& inj, const PowerFlowSolution& sol)
{
    std::map<std::string, double> balance;
    for (const auto& [bus, kw] : inj) balance[bus] += kw;
    balance[net.grid_source().id] += sol.slack_injection_kw;
    for (const auto& l : net.lines()) {
        const double f = sol.line_flows_kw.at(l.id);
        balance[l.from_bus] -= f;
        balance[l.to_bus] += f;
    }
    double worst = 0.0;
    for (const auto& [bus, b] : balance) worst = std::max(worst, std::abs(b));
    return worst;
}

InjectionSet peak_injections(const NetworkTopology& net, double factor)
{
    auto inj = rated_load_injections(net);
    for (auto& [bus, kw] : inj) kw *= factor;
    return inj;
}

} // namespace

TEST_CASE("two-bus hand case")
{
    const auto sol = dc_power_flow(two_bus(), {{"A", -1000.0}});
    // 1000 kW on a 10 MVA base is 0.1 pu; theta = -0.1 * 0.1.
    CHECK(std::abs(sol.angles_rad.at("A") - (-0.01)) <= 1e-9);
    CHECK(sol.angles_rad.at("G") == 0.0);
    CHECK(std::abs(sol.line_flows_kw.at("L1") - 1000.0) <= 1e-9);
    CHECK(std::abs(sol.slack_injection_kw - 1000.0) <= 1e-9);
}

TEST_CASE("zero injections and input errors")
{
    const auto net = load_network_file(data("keele.json"));
    const auto sol = dc_power_flow(net, {});
    for (const auto& [bus, th] : sol.angles_rad) CHECK(th == 0.0);
    for (const auto& [line, f] : sol.line_flows_kw) CHECK(f == 0.0);
    CHECK(sol.slack_injection_kw == 0.0);

    const auto three = load_network_file(data("threebus.json"));
    const auto cut = apply_switch_action(three, "L2", SwitchState::open);
    CHECK_THROWS_AS(dc_power_flow(cut, {{"B", -10.0}}), InputError);
    CHECK_THROWS_AS(dc_power_flow(three, {{"Q", -10.0}}), ReferenceError);
    CHECK_THROWS_AS(dc_power_flow(three, {{"G", -10.0}}), InputError);
    // De-energized buses get no angle; their lines carry nothing.
    const auto s = dc_power_flow(cut, {{"A", -10.0}});
    CHECK(s.angles_rad.count("B") == 0);
    CHECK(s.line_flows_kw.at("L2") == 0.0);
}

TEST_CASE("line limit check")
{
    const auto ok = two_bus(0.1, 2000.0);
    CHECK(check_line_limits(dc_power_flow(ok, {{"A", -1000.0}}), ok).empty());
    const auto v = check_line_limits(dc_power_flow(ok, {{"A", -2500.0}}), ok);
    REQUIRE(v.size() == 1);
    CHECK(v[0].line_id == "L1");
    CHECK(v[0].flow_kw == doctest::Approx(2500.0).epsilon(1e-12));
    CHECK(v[0].capacity_kw == 2000.0);
    // Reverse flow counts by magnitude.
    CHECK(check_line_limits(dc_power_flow(ok, {{"A", 2500.0}}), ok).size() == 1);
}

TEST_CASE("keele under peak demand: violations equal a direct scan")
{
    const auto net = load_network_file(data("keele.json"));
    for (double factor : {1.0, 3.0, 12.0, 25.0}) {
        CAPTURE(factor);
        const auto sol = dc_power_flow(net, peak_injections(net, factor));
        std::vector<std::string> scan;
        for (const auto& l : net.lines()) {
            if (std::abs(sol.line_flows_kw.at(l.id)) > l.capacity_kw) scan.push_back(l.id);
        }
        std::vector<std::string> got;
        for (const auto& v : check_line_limits(sol, net)) got.push_back(v.line_id);
        std::sort(got.begin(), got.end());
        std::sort(scan.begin(), scan.end());
        CHECK(got == scan);
        if (factor == 25.0) CHECK_FALSE(scan.empty());
    }
}

TEST_CASE("fault current")
{
    const auto net = load_network_file(data("threebus.json"));
    // Source 0.05 + L1 0.05 + L2 0.10 = 0.2 pu; base current 10e6 / (sqrt(3) * 11000) = 524.86 A.
    const auto f = fault_current_3ph(net, "B");
    CHECK(f.thevenin_x_pu == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(std::abs(f.fault_current_ka - 2.624) <= 0.001);
    CHECK(f.fault_current_ka == doctest::Approx(5.0 * 10e6 / (std::sqrt(3.0) * 11000.0) / 1000.0).epsilon(1e-12));
    const auto g = fault_current_3ph(net, "G");
    CHECK(g.thevenin_x_pu == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(std::abs(g.fault_current_ka - 10.50) <= 0.005);
    CHECK(fault_current_3ph(net, "B", 0.1).fault_current_ka < f.fault_current_ka);

    CHECK_THROWS_AS(fault_current_3ph(apply_switch_action(net, "L2", SwitchState::open), "B"), InputError);
    CHECK_THROWS_AS(fault_current_3ph(net, "nowhere"), ReferenceError);
    CHECK_THROWS_AS(fault_current_3ph(load_network_file(data("ring.json")), "B"), InputError);

    const auto keele = load_network_file(data("keele.json"));
    for (const auto& b : keele.buses()) CHECK(fault_current_3ph(keele, b.id).fault_current_ka > 0.0);
}

TEST_CASE("property: solver agrees with a reference elimination, conserves flow, balances the slack")
{
    for (uint64_t seed = 1; seed <= 150; ++seed) {
        CAPTURE(seed);
        std::mt19937_64 rng(seed);
        const auto net = gen::random_network(seed, 2 + seed % 25, seed % 6, 0.5);
        const auto inj = random_injections(net, rng);
        const auto sol = dc_power_flow(net, inj);
        const auto ref = reference_angles(net, inj);
        REQUIRE(ref.size() == sol.angles_rad.size());
        for (const auto& [bus, th] : ref) CHECK(sol.angles_rad.at(bus) == doctest::Approx(th).epsilon(1e-9).scale(1e-9));
        CHECK(worst_imbalance(net, inj, sol) <= 1e-6);
        double sum = 0.0;
        for (const auto& [bus, kw] : inj) sum += kw;
        CHECK(std::abs(sol.slack_injection_kw + sum) <= 1e-9 * std::max(1.0, std::abs(sum)));
        CHECK(sol.angles_rad.at(net.grid_source().id) == 0.0);
    }
}

TEST_CASE("property: superposition over keele")
{
    const auto net = load_network_file(data("keele.json"));
    const DcPowerFlow pf(net);
    std::mt19937_64 rng(2024);
    for (int k = 0; k < 100; ++k) {
        const auto a = random_injections(net, rng, 800.0);
        const auto b = random_injections(net, rng, 800.0);
        InjectionSet ab = a;
        for (const auto& [bus, kw] : b) ab[bus] += kw;
        const auto sa = pf.solve(a), sb = pf.solve(b), sab = pf.solve(ab);
        for (const auto& [line, f] : sab.line_flows_kw) {
            CHECK(std::abs(f - sa.line_flows_kw.at(line) - sb.line_flows_kw.at(line)) <= 1e-6);
        }
        for (const auto& [bus, th] : sab.angles_rad) {
            CHECK(std::abs(th - sa.angles_rad.at(bus) - sb.angles_rad.at(bus)) <= 1e-9);
        }
        CHECK(worst_imbalance(net, ab, sab) <= 1e-6);
    }
}

TEST_CASE("property: relabeling buses leaves angles unchanged")
{
    for (uint64_t seed = 1; seed <= 60; ++seed) {
        std::mt19937_64 rng(seed);
        const auto net = gen::random_network(seed, 3 + seed % 15, seed % 4, 0.5);
        const auto inj = random_injections(net, rng);
        const auto sol = dc_power_flow(net, inj);

        auto buses = net.buses();
        std::shuffle(buses.begin(), buses.end(), rng);
        auto rename = [](const std::string& id) { return "x_" + id; };
        for (auto& b : buses) b.id = rename(b.id);
        auto lines = net.lines();
        for (auto& l : lines) {
            l.from_bus = rename(l.from_bus);
            l.to_bus = rename(l.to_bus);
        }
        const NetworkTopology relabeled(buses, lines, {}, net.base_mva());
        InjectionSet inj2;
        for (const auto& [bus, kw] : inj) inj2[rename(bus)] = kw;
        const auto sol2 = dc_power_flow(relabeled, inj2);
        for (const auto& [bus, th] : sol.angles_rad) {
            CHECK(sol2.angles_rad.at(rename(bus)) == doctest::Approx(th).epsilon(1e-9).scale(1e-9));
        }
    }
}

TEST_CASE("restoration on the loop fixture")
{
    const auto net = load_network_file(data("restoration/loop_tie.json"));
    const auto plan = restore_after_outage(net, "L2");
    REQUIRE(plan.actions.size() == 1);
    CHECK(plan.actions[0] == SwitchAction{"T1", SwitchState::closed});
    CHECK(plan.restored_buses == std::set<std::string>{"B"});
    CHECK(plan.unserved_kw == 0.0);
    CHECK(plan.limit_safe);

    const auto none = restore_after_outage(load_network_file(data("restoration/loop_no_tie.json")), "L2");
    CHECK(none.actions.empty());
    CHECK(none.unserved_kw == 500.0);
    CHECK(none.restored_buses.empty());

    const auto tight = restore_after_outage(load_network_file(data("restoration/tight_tie.json")), "L2");
    CHECK(tight.actions.empty());
    CHECK(tight.unserved_kw == 500.0);
    CHECK_FALSE(tight.limit_safe);
    REQUIRE(tight.rejected_actions.size() == 1);
    CHECK(tight.rejected_actions[0].line_id == "T1");
    REQUIRE_FALSE(tight.rejected_violations.empty());
    CHECK(tight.rejected_violations[0].line_id == "T1");

    CHECK_THROWS_AS(restore_after_outage(net, "nothing"), ReferenceError);
    const auto j = to_json(plan);
    CHECK(j.at("unserved_kw") == 0.0);
}

TEST_CASE("restoration matches exhaustive enumeration on shipped fixtures")
{
    for (const char* name : {"loop_tie", "loop_no_tie", "tight_tie", "six_line", "two_ties"}) {
        const auto net = load_network_file(data(std::string("restoration/") + name + ".json"));
        REQUIRE(net.lines().size() <= 6);
        std::vector<std::string> elements;
        for (const auto& l : net.lines()) elements.push_back(l.id);
        for (const auto& b : net.buses()) {
            if (b.kind != BusKind::grid_source) elements.push_back(b.id);
        }
        for (const auto& failed : elements) {
            CAPTURE(name);
            CAPTURE(failed);
            const auto plan = restore_after_outage(net, failed);
            const auto want = oracle::enumerate(net, failed);
            CHECK(plan.unserved_kw == doctest::Approx(want.best_unserved));
            CHECK(plan.actions.size() == want.min_actions);
            CHECK(plan.limit_safe == (want.best_any_unserved >= want.best_unserved - 1e-9));
            const auto after = oracle::apply_plan(net, failed, plan);
            CHECK(oracle::radial(after));
            CHECK(oracle::limit_safe(after));
            CHECK(oracle::unserved(net, after, failed) == doctest::Approx(plan.unserved_kw));
            const auto live = energized_buses(after);
            for (const auto& b : plan.restored_buses) CHECK(live.count(b) == 1);
        }
    }
}

TEST_CASE("restoration picks the lexicographically first tie on equal plans")
{
    const auto net = load_network_file(data("restoration/two_ties.json"));
    const auto plan = restore_after_outage(net, "L3");
    INFO(nlohmann::json(to_json(plan)).dump());
    REQUIRE_FALSE(plan.actions.empty());
    CHECK(plan.actions.front().state == SwitchState::closed);
}

TEST_CASE("property: restoration on random networks matches enumeration")
{
    const auto t0 = std::chrono::steady_clock::now();
    for (uint64_t seed = 1; seed <= 60; ++seed) {
        const auto net = gen::random_network(seed, 4 + seed % 3, 1 + seed % 2, 0.0);
        if (net.lines().size() > 6) continue;
        const auto& failed = net.lines()[seed % net.lines().size()].id;
        CAPTURE(seed);
        CAPTURE(failed);
        const auto plan = restore_after_outage(net, failed);
        const auto want = oracle::enumerate(net, failed);
        CHECK(plan.unserved_kw == doctest::Approx(want.best_unserved));
        CHECK(plan.actions.size() == want.min_actions);
        const auto after = oracle::apply_plan(net, failed, plan);
        CHECK(oracle::radial(after));
        CHECK(oracle::limit_safe(after));
    }
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));
}

TEST_CASE("keele outage of a feeder head is restored through ties")
{
    const auto net = load_network_file(data("keele.json"));
    const auto& first = net.lines().front();
    const auto plan = restore_after_outage(net, first.id);
    CHECK(plan.limit_safe);
    CHECK(plan.actions.size() <= 3);
    const auto after = oracle::apply_plan(net, first.id, plan);
    CHECK(oracle::radial(after));
    CHECK(oracle::limit_safe(after));
    CHECK(oracle::unserved(net, after, first.id) == doctest::Approx(plan.unserved_kw));
}
