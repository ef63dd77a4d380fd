#include "sles/error.hpp"
#include "sles/gateway.hpp"

#include "../support/storm.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>

using namespace sles;
using nlohmann::json;

namespace {

std::string data(const std::string& name) { return std::string(SLES_DATA_DIR) + "/" + name; }

std::shared_ptr<const LiveInputs> inputs()
{
    static const auto in = [] {
        BaselineConfig c{load_network_file(data("keele.json"))};
        c.start = parse_instant("2021-06-14T00:00:00Z");
        c.days = 1;
        c.meter_count = 200;
        return LiveInputs::make(std::move(c), 42);
    }();
    return in;
}

OperatorAction action(ActionKind kind, json payload)
{
    OperatorAction a;
    a.kind = kind;
    a.payload = std::move(payload);
    a.requested_at = parse_instant("2021-06-14T00:00:00Z");
    return a;
}

std::shared_ptr<const LiveState> advance(const LiveInputs& in, std::shared_ptr<const LiveState> s, size_t n)
{
    for (size_t i = 0; i < n; ++i) s = advance_interval(in, *s).state;
    return s;
}

} // namespace

TEST_CASE("action documents are validated against their kind")
{
    const auto ok = action_from_json({{"kind", "switch_action"}, {"payload", {{"line_id", "L1"}, {"state", "open"}}},
                                      {"actor", "op"}, {"requested_at", "2021-06-14T10:00:00Z"}});
    CHECK(ok.kind == ActionKind::switch_action);
    CHECK(ok.actor == "op");
    CHECK(action_from_json(to_json(ok)).payload == ok.payload);

    CHECK_THROWS_AS(action_from_json({{"kind", "reboot"}, {"payload", json::object()}}), ParseError);
    CHECK_THROWS_AS(action_from_json({{"kind", "switch_action"}, {"payload", {{"line_id", "L1"}}}}), ParseError);
    CHECK_THROWS_AS(action_from_json({{"kind", "switch_action"}, {"payload", {{"line_id", 3}, {"state", "open"}}}}),
                    ParseError);
    CHECK_THROWS_AS(action_from_json({{"kind", "switch_action"}, {"payload", {{"line_id", "L1"}, {"state", "ajar"}}}}),
                    ParseError);
    CHECK_THROWS_AS(action_from_json({{"kind", "ad_hoc_dsm"}, {"payload", {{"building", "x"}}}}), ParseError);
    CHECK_THROWS_AS(action_from_json({{"kind", "inject_outage"}, {"payload", json::object()}}), ParseError);
    CHECK_THROWS_AS(action_from_json({{"kind", "commit_network_mod"}, {"payload", {{"mods", {{{"kind", "paint"}}}}}}}),
                    ParseError);
    CHECK_THROWS_AS(action_from_json(json::array()), ParseError);
    CHECK(action_kind_from_string("apply_restoration_plan") == ActionKind::apply_restoration_plan);
    CHECK(event_kind_from_string("restoration_proposed") == EventKind::restoration_proposed);
}

TEST_CASE("intervals emit a reading event and follow the batch simulation")
{
    const auto& in = *inputs();
    auto s = initial_state(in);
    CHECK(s->next_seq == 0);
    CHECK(s->cursor == 0);
    const auto tr = advance_interval(in, *s);
    REQUIRE_FALSE(tr.events.empty());
    CHECK(tr.events[0].kind == EventKind::reading);
    CHECK(tr.events[0].seq == 0);
    CHECK(tr.events[0].timestamp == in.config.start);
    CHECK(tr.state->cursor == 1);
    CHECK(tr.state->next_seq == tr.events.size());
    // The input state is untouched.
    CHECK(s->cursor == 0);

    // Without operator actions the live run executes the same plan as the batch pipeline.
    const auto end = advance(in, s, in.config.horizon());
    const auto batch = run_scenario(in.config, Scenario{}, in.seed);
    CHECK(end->executed.total_co2_kg == doctest::Approx(batch.timeline.total_co2_kg).epsilon(1e-9));
    CHECK_THROWS_AS(advance_interval(in, *end), InputError);

    const auto reports = live_kpis(in, *end, 0);
    CHECK(reports.back().entity == "campus");
    CHECK(reports.back().renewables_used_kwh == doctest::Approx(batch.kpis.back().renewables_used_kwh).epsilon(1e-9));
    const auto last4 = live_kpis(in, *end, 4);
    CHECK(last4.back().window.end - last4.back().window.start == std::chrono::hours(2));
}

TEST_CASE("rejected actions leave the state hash unchanged")
{
    Gateway gw(inputs(), {});
    gw.step().get();
    const auto before = state_hash(*gw.snapshot());
    const auto size = gw.log().size();
    const auto ack = gw.submit(action(ActionKind::switch_action, {{"line_id", "L99"}, {"state", "open"}})).get();
    CHECK_FALSE(ack.accepted);
    CHECK(ack.error.find("L99") != std::string::npos);
    CHECK(state_hash(*gw.snapshot()) == before);
    CHECK(gw.log().size() == size);

    const auto none = gw.submit(action(ActionKind::apply_restoration_plan, json::object())).get();
    CHECK_FALSE(none.accepted);
    CHECK(state_hash(*gw.snapshot()) == before);
}

TEST_CASE("snapshots while idle match the log's post-state and each other")
{
    Gateway gw(inputs(), {});
    for (int i = 0; i < 3; ++i) gw.step().get();
    gw.submit(action(ActionKind::switch_action, {{"line_id", "T-S07-S13"}, {"state", "closed"}})).get();
    const auto a = gw.snapshot();
    const auto b = gw.snapshot();
    CHECK(state_hash(*a) == state_hash(*b));
    CHECK(state_hash(*a) == state_hash(*replay_log(gw.inputs(), gw.log().all())));
    CHECK(a->actions_applied == 1);
    CHECK(a->network.line("T-S07-S13").closed());
    const auto view = state_view(*a, gw.queue_depth());
    CHECK(view.at("substations") == 25);
    CHECK(view.at("seq") == a->next_seq);
    CHECK(view.at("state_hash") == state_hash(*a));
    CHECK(view.at("buses").size() == a->network.buses().size());
}

TEST_CASE("ad hoc DSM equals a direct dispatch call on the same snapshot")
{
    const auto& in = *inputs();
    const auto s = advance(in, initial_state(in), 10);
    const json payload = {{"mode", "ad_hoc"}, {"direction", "reduce"}, {"building", "student_union"},
                          {"window", {12, 16}}, {"magnitude_kw", 30.0}};
    const auto tr = apply_action(in, *s, action(ActionKind::ad_hoc_dsm, payload));

    auto event = dsm_event_from_json(payload);
    event.window.begin -= s->plan_from;
    event.window.end -= s->plan_from;
    const auto direct = ad_hoc_dsm(dispatch_snapshot(*s, in.config.strategy), event);
    const auto& tail = tr.result.at("schedule_tail");
    CHECK(tail.at("fingerprint") == fingerprint(to_json(direct.schedule)));
    CHECK(tail.at("from_interval") == 10);
    CHECK(tr.state->schedule.total_co2_kg == direct.schedule.total_co2_kg);
    REQUIRE(tr.events.size() >= 1);
    CHECK(tr.events[0].kind == EventKind::action_applied);
    CHECK(tr.events[0].seq == s->next_seq);

    // The reduction is executed in the next intervals.
    const auto after = advance(in, tr.state, 6);
    const auto& su = after->executed.realized_demand_kw.at("student_union");
    const auto& base = after->executed.baseline_demand_kw.at("student_union");
    const auto& adj = direct.schedule.flex_adjust_kw.at("student_union");
    for (size_t t = 12; t < 16; ++t) {
        CHECK(adj[t - 10] < 0.0);
        CHECK(su[t] == doctest::Approx(std::max(0.0, base[t] + adj[t - 10])));
    }

    auto past = payload;
    past["window"] = {2, 4};
    CHECK_THROWS_AS(apply_action(in, *s, action(ActionKind::ad_hoc_dsm, past)), InputError);
}

TEST_CASE("outage proposes the direct restoration plan and applying it restores service")
{
    const auto& in = *inputs();
    const auto s = advance(in, initial_state(in), 3);
    const auto tr = apply_action(in, *s, action(ActionKind::inject_outage, {{"line_id", "F1-S02"}}));
    const auto direct = restore_after_outage(s->network, "F1-S02");
    const auto it = std::find_if(tr.events.begin(), tr.events.end(),
                                 [](const Event& e) { return e.kind == EventKind::restoration_proposed; });
    REQUIRE(it != tr.events.end());
    CHECK(it->body.at("plan") == to_json(direct));
    CHECK(it->body.at("failed") == "F1-S02");
    CHECK(tr.state->out_of_service.count("F1-S02") == 1);
    CHECK_FALSE(tr.state->network.line("F1-S02").closed());
    CHECK_FALSE(tr.result.at("deenergized_buses").empty());
    REQUIRE(tr.state->pending_plan.has_value());

    // Loads beyond the open line are not served until the plan is applied.
    const auto dark = advance(in, tr.state, 1);
    const auto live = energized_buses(dark->network);
    for (const auto& a : dark->network.assets()) {
        if (!is_load(a.kind) || live.count(a.bus)) continue;
        CHECK(dark->executed.realized_demand_kw.at(a.id).back() == 0.0);
    }

    CHECK_THROWS_AS(apply_action(in, *dark, action(ActionKind::switch_action, {{"line_id", "F1-S02"}, {"state", "closed"}})),
                    InputError);
    CHECK_THROWS_AS(apply_action(in, *dark, action(ActionKind::apply_restoration_plan, {{"failed", "F2-S09"}})),
                    InputError);
    const auto fixed = apply_action(in, *dark, action(ActionKind::apply_restoration_plan, {{"failed", "F1-S02"}}));
    CHECK_FALSE(fixed.state->pending_plan.has_value());
    auto expected = isolate_element(s->network, "F1-S02");
    for (const auto& a : direct.actions) expected = apply_switch_action(expected, a.line_id, a.state);
    CHECK(fixed.state->network == expected);
    CHECK(energized_buses(fixed.state->network) == energized_buses(expected));

    // A network change clears a pending plan.
    const auto again = apply_action(in, *tr.state, action(ActionKind::switch_action, {{"line_id", "T-S19-S25"}, {"state", "open"}}));
    CHECK_FALSE(again.state->pending_plan.has_value());
    CHECK(again.result.at("pending_plan_cleared") == true);
}

TEST_CASE("network modifications commit through the queue")
{
    const auto& in = *inputs();
    const auto s = advance(in, initial_state(in), 1);
    const json mods = {{{"kind", "set_capacity"}, {"line_id", "LT-L03"}, {"capacity_kw", 1.0}}};
    const auto tr = apply_action(in, *s, action(ActionKind::commit_network_mod, {{"mods", mods}}));
    CHECK(tr.state->network.line("LT-L03").capacity_kw == 1.0);
    // The lateral now overloads, which the action reports straight away.
    const bool flagged = std::any_of(tr.events.begin(), tr.events.end(), [](const Event& e) {
        return e.kind == EventKind::violation && e.body.dump().find("LT-L03") != std::string::npos;
    });
    CHECK(flagged);
    const json bad = {{{"kind", "remove_line"}, {"line_id", "nope"}}};
    CHECK_THROWS_AS(apply_action(in, *s, action(ActionKind::commit_network_mod, {{"mods", bad}})), ReferenceError);
}

TEST_CASE("replay detects a tampered log")
{
    const auto& in = *inputs();
    auto s = initial_state(in);
    std::vector<Event> log;
    for (int i = 0; i < 4; ++i) {
        auto tr = advance_interval(in, *s);
        log.insert(log.end(), tr.events.begin(), tr.events.end());
        s = tr.state;
    }
    CHECK(state_hash(*replay_log(in, log)) == state_hash(*s));
    auto tampered = log;
    tampered[0].body["demand_kw"] = 1.0;
    CHECK_THROWS_AS(replay_log(in, tampered), Error);
    auto gap = log;
    gap.erase(gap.begin());
    CHECK_THROWS_AS(replay_log(in, gap), Error);
}

TEST_CASE("event log streams in order and persists as JSON lines")
{
    const std::string path = "gateway_test_events.jsonl";
    {
        Gateway gw(inputs(), {path, 0.0});
        for (int i = 0; i < 5; ++i) gw.step().get();
        const auto all = gw.log().all();
        REQUIRE(all.size() >= 5);
        const auto tail = gw.log().read_from(3, std::chrono::milliseconds(0));
        REQUIRE(tail.size() == all.size() - 3);
        CHECK(tail.front().seq == 3);
        CHECK(gw.log().read_from(all.size(), std::chrono::milliseconds(20)).empty());

        // A blocked reader wakes when the next interval lands.
        std::vector<Event> woke;
        std::thread waiter([&] { woke = gw.log().read_from(all.size(), std::chrono::seconds(5)); });
        gw.step().get();
        waiter.join();
        REQUIRE_FALSE(woke.empty());
        CHECK(woke.front().seq == all.size());
        gw.stop();
        CHECK_FALSE(gw.submit(action(ActionKind::apply_restoration_plan, json::object())).get().accepted);
    }
    std::ifstream in(path);
    std::string line;
    uint64_t expect = 0;
    while (std::getline(in, line)) {
        const auto e = event_from_json(json::parse(line));
        CHECK(e.seq == expect++);
    }
    CHECK(expect >= 6);
    std::remove(path.c_str());

    EventLog log;
    CHECK_THROWS_AS(log.append({Event{1, {}, EventKind::reading, json::object()}}), Error);
}

TEST_CASE("timed replay advances on its own")
{
    Gateway gw(inputs(), {std::nullopt, 1800.0 * 50});
    for (int i = 0; i < 200 && gw.snapshot()->cursor < 3; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    CHECK(gw.snapshot()->cursor >= 3);
    gw.stop();
}

TEST_CASE("seeded action storm is linearizable")
{
    const auto rep = storm::run(inputs(), 7, 120);
    CHECK(rep.accepted + rep.rejected == 120);
    CHECK(rep.accepted > 0);
    CHECK(rep.rejected > 0);
    CHECK(rep.steps == inputs()->config.horizon());
    CHECK(rep.gapless);
    CHECK(rep.replay_matches);
    CHECK(rep.snapshots_linearizable);
    CHECK(rep.per_client_fifo);
    CHECK(rep.seq_monotone);
    CHECK(rep.snapshots > 0);
}
