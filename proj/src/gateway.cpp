#include "sles/gateway.hpp"

#include "sles/error.hpp"

#include <algorithm>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

namespace sles {

using nlohmann::json;

std::string_view to_string(ActionKind k)
{
    switch (k) {
    case ActionKind::switch_action: return "switch_action";
    case ActionKind::commit_network_mod: return "commit_network_mod";
    case ActionKind::ad_hoc_dsm: return "ad_hoc_dsm";
    case ActionKind::inject_outage: return "inject_outage";
    case ActionKind::apply_restoration_plan: return "apply_restoration_plan";
    }
    return "?";
}

std::string_view to_string(EventKind k)
{
    switch (k) {
    case EventKind::reading: return "reading";
    case EventKind::action_applied: return "action_applied";
    case EventKind::violation: return "violation";
    case EventKind::clamp: return "clamp";
    case EventKind::restoration_proposed: return "restoration_proposed";
    }
    return "?";
}

ActionKind action_kind_from_string(std::string_view s)
{
    for (auto k : {ActionKind::switch_action, ActionKind::commit_network_mod, ActionKind::ad_hoc_dsm,
                   ActionKind::inject_outage, ActionKind::apply_restoration_plan}) {
        if (to_string(k) == s) return k;
    }
    throw ParseError(fmt::format("unknown action kind '{}'", s));
}

EventKind event_kind_from_string(std::string_view s)
{
    for (auto k : {EventKind::reading, EventKind::action_applied, EventKind::violation, EventKind::clamp,
                   EventKind::restoration_proposed}) {
        if (to_string(k) == s) return k;
    }
    throw ParseError(fmt::format("unknown event kind '{}'", s));
}

namespace {

const json& need(const json& payload, const char* key, json::value_t type, std::string_view kind)
{
    if (!payload.contains(key)) throw ParseError(fmt::format("{} payload needs '{}'", kind, key));
    const auto& v = payload.at(key);
    const bool ok = type == json::value_t::number_float ? v.is_number() : v.type() == type;
    if (!ok) throw ParseError(fmt::format("{} payload field '{}' has the wrong type", kind, key));
    return v;
}

std::vector<NetworkMod> mods_of(const json& payload)
{
    std::vector<NetworkMod> mods;
    for (const auto& m : need(payload, "mods", json::value_t::array, "commit_network_mod")) {
        mods.push_back(network_mod_from_json(m));
    }
    return mods;
}

std::string outage_element(const json& payload)
{
    if (payload.contains("element")) return need(payload, "element", json::value_t::string, "inject_outage");
    return need(payload, "line_id", json::value_t::string, "inject_outage");
}

void check_payload(ActionKind kind, const json& p)
{
    if (!p.is_object()) throw ParseError("action payload must be an object");
    const auto name = to_string(kind);
    switch (kind) {
    case ActionKind::switch_action:
        need(p, "line_id", json::value_t::string, name);
        switch_state_from_string(need(p, "state", json::value_t::string, name).get<std::string>());
        break;
    case ActionKind::commit_network_mod: mods_of(p); break;
    case ActionKind::ad_hoc_dsm: dsm_event_from_json(p); break;
    case ActionKind::inject_outage: outage_element(p); break;
    case ActionKind::apply_restoration_plan:
        if (p.contains("failed")) need(p, "failed", json::value_t::string, name);
        break;
    }
}

} // namespace

OperatorAction action_from_json(const json& doc)
{
    if (!doc.is_object()) throw ParseError("action must be an object");
    try {
        OperatorAction a;
        a.kind = action_kind_from_string(doc.at("kind").get<std::string>());
        a.payload = doc.value("payload", json::object());
        a.actor = doc.value("actor", a.actor);
        if (doc.contains("requested_at")) a.requested_at = parse_instant(doc.at("requested_at").get<std::string>());
        check_payload(a.kind, a.payload);
        return a;
    } catch (const json::exception& ex) {
        throw ParseError(fmt::format("malformed action: {}", ex.what()));
    }
}

json to_json(const OperatorAction& a)
{
    return {{"kind", to_string(a.kind)},
            {"payload", a.payload},
            {"actor", a.actor},
            {"requested_at", format_instant(a.requested_at)}};
}

json to_json(const Event& e)
{
    return {{"seq", e.seq}, {"timestamp", format_instant(e.timestamp)}, {"kind", to_string(e.kind)}, {"body", e.body}};
}

Event event_from_json(const json& doc)
{
    try {
        return {doc.at("seq").get<uint64_t>(), parse_instant(doc.at("timestamp").get<std::string>()),
                event_kind_from_string(doc.at("kind").get<std::string>()), doc.at("body")};
    } catch (const json::exception& ex) {
        throw ParseError(fmt::format("malformed event: {}", ex.what()));
    }
}

std::shared_ptr<const LiveInputs> LiveInputs::make(BaselineConfig config, uint64_t seed)
{
    auto inputs = prepare_inputs(config, Scenario{}, seed);
    return std::make_shared<const LiveInputs>(LiveInputs{std::move(config), seed, std::move(inputs)});
}

// ---------------------------------------------------------------------------

namespace {

size_t per_day(const LiveInputs& in) { return static_cast<size_t>(1440 / in.config.interval_minutes); }

void plan_day(const LiveInputs& in, LiveState& s)
{
    const size_t T = in.config.horizon();
    const size_t len = std::min(per_day(in), T - s.cursor);
    s.problem = dispatch_problem_for(s.network, in.inputs.forecast, in.config.start, in.config.interval_minutes,
                                     s.cursor, len, s.soc_kwh);
    s.schedule = optimize_co2(s.problem, in.config.strategy);
    s.plan_from = s.cursor;
}

// Events get their sequence numbers from the state they are produced against.
struct Emitter {
    LiveState& s;
    Instant at;
    std::vector<Event> events;

    uint64_t emit(EventKind kind, json body)
    {
        const uint64_t seq = s.next_seq++;
        events.push_back({seq, at, kind, std::move(body)});
        return seq;
    }
};

std::optional<PowerFlowSolution> current_flows(const LiveState& s)
{
    if (s.cursor == 0) return std::nullopt;
    try {
        return dc_power_flow(s.network, interval_injections(s.network, s.executed, s.cursor - 1));
    } catch (const Error&) {
        return std::nullopt;
    }
}

void flag_violations(Emitter& em, size_t interval)
{
    const auto sol = current_flows(em.s);
    if (!sol) return;
    const auto v = check_line_limits(*sol, em.s.network);
    if (!v.empty()) em.emit(EventKind::violation, {{"interval", interval}, {"violations", to_json(v)}});
}

void change_network(LiveState& s, NetworkTopology net, json& result)
{
    s.network = std::move(net);
    if (s.pending_plan) {
        s.pending_plan.reset();
        s.pending_for.clear();
        result["pending_plan_cleared"] = true;
    }
}

void guard_out_of_service(const LiveState& s, const std::string& line, SwitchState state)
{
    if (state == SwitchState::closed && s.out_of_service.contains(line)) {
        throw InputError(fmt::format("line '{}' is out of service and cannot be closed", line));
    }
}

json tail_reference(const ScheduleTail& tail, size_t from)
{
    return {{"from_interval", from},
            {"fingerprint", fingerprint(to_json(tail.schedule))},
            {"total_co2_kg", tail.schedule.total_co2_kg},
            {"battery_kw", tail.schedule.battery_kw},
            {"flex_adjust_kw", tail.schedule.flex_adjust_kw}};
}

} // namespace

DispatchSnapshot dispatch_snapshot(const LiveState& s, const std::string& strategy)
{
    return {s.problem, s.schedule, s.cursor - s.plan_from, s.soc_kwh.value_or(0.0), strategy};
}

std::shared_ptr<const LiveState> initial_state(const LiveInputs& in)
{
    auto s = std::make_shared<LiveState>(in.config.network);
    s->time = in.config.start;
    for (const auto& a : s->network.assets()) {
        if (a.kind == AssetKind::battery) {
            s->soc_kwh = a.get<BatteryParams>().initial_soc_kwh;
            s->executed.battery_id = a.id;
            break;
        }
    }
    s->executed.start = in.config.start;
    s->executed.interval_minutes = in.config.interval_minutes;
    for (const auto& [id, v] : in.inputs.actuals.demand_kw) {
        s->executed.realized_demand_kw[id];
        s->executed.baseline_demand_kw[id];
    }
    for (const auto& [id, v] : in.inputs.actuals.renewable_kw) s->executed.generation_kw[id];
    if (in.config.horizon() > 0) plan_day(in, *s);
    return s;
}

Transition advance_interval(const LiveInputs& in, const LiveState& prev)
{
    const size_t T = in.config.horizon();
    if (prev.cursor >= T) throw InputError("replay has reached the end of the horizon");
    auto next = std::make_shared<LiveState>(prev);
    auto& s = *next;
    Emitter em{s, prev.time, {}};
    const size_t t = prev.cursor;
    const size_t k = t - prev.plan_from;
    const double dt = in.config.interval_minutes / 60.0;

    const auto live = energized_mask(s.network);
    auto fed = [&](const Asset& a) { return live[*s.network.find_bus(a.bus)]; };
    std::map<std::string, double> dem, ren, adj;
    for (const auto& [id, v] : in.inputs.actuals.demand_kw) dem[id] = v[t];
    for (const auto& [id, v] : in.inputs.actuals.renewable_kw) ren[id] = v[t];
    for (const auto& [id, v] : prev.schedule.flex_adjust_kw) adj[id] = v[k];
    double setpoint = prev.schedule.battery_kw.empty() ? 0.0 : prev.schedule.battery_kw[k];
    std::vector<ClampEvent> lost;
    for (const auto& a : s.network.assets()) {
        if (fed(a)) continue;
        if (dem.contains(a.id)) dem[a.id] = 0.0;
        if (ren.contains(a.id)) ren[a.id] = 0.0;
        if (adj.contains(a.id)) adj[a.id] = 0.0;
        if (a.kind == AssetKind::battery && setpoint != 0.0) {
            lost.push_back({t, a.id, setpoint, 0.0, "deenergized"});
            setpoint = 0.0;
        }
    }

    auto step = simulate_interval(s.network, t, s.soc_kwh.value_or(0.0), setpoint, adj, dem, ren,
                                  in.inputs.actuals.grid_intensity[t], dt);
    step.clamps.insert(step.clamps.begin(), lost.begin(), lost.end());
    const auto& o = step.outcome;
    if (s.soc_kwh) s.soc_kwh = o.soc_kwh;
    auto& tl = s.executed;
    tl.intervals.push_back(o);
    for (auto& [id, v] : tl.realized_demand_kw) v.push_back(step.realized_demand_kw.count(id) ? step.realized_demand_kw.at(id) : 0.0);
    for (auto& [id, v] : tl.baseline_demand_kw) v.push_back(dem.count(id) ? dem.at(id) : 0.0);
    for (auto& [id, v] : tl.generation_kw) v.push_back(ren.count(id) ? ren.at(id) : 0.0);
    tl.clamps.insert(tl.clamps.end(), step.clamps.begin(), step.clamps.end());
    tl.total_co2_kg += o.co2_kg;

    const uint64_t seq = em.emit(EventKind::reading, {{"interval", t},
                                                      {"demand_kw", o.demand_kw},
                                                      {"generation_kw", o.generation_kw},
                                                      {"battery_kw", o.battery_kw},
                                                      {"import_kw", o.import_kw},
                                                      {"export_kw", o.export_kw},
                                                      {"soc_kwh", o.soc_kwh},
                                                      {"co2_kg", o.co2_kg}});
    for (const auto& c : step.clamps) {
        em.emit(EventKind::clamp, {{"interval", c.interval},
                                   {"asset", c.asset},
                                   {"requested_kw", c.requested_kw},
                                   {"applied_kw", c.applied_kw},
                                   {"reason", c.reason}});
    }
    s.cursor = t + 1;
    flag_violations(em, t);
    s.time = prev.time + Minutes(in.config.interval_minutes);
    if (s.cursor < T && s.cursor % per_day(in) == 0) plan_day(in, s);
    return {next, std::move(em.events), {{"interval", t}, {"seq", seq}}};
}

Transition apply_action(const LiveInputs& in, const LiveState& prev, const OperatorAction& a)
{
    check_payload(a.kind, a.payload);
    auto next = std::make_shared<LiveState>(prev);
    auto& s = *next;
    const auto& p = a.payload;
    json result = json::object();
    std::vector<std::pair<EventKind, json>> follow;

    switch (a.kind) {
    case ActionKind::switch_action: {
        const auto line = p.at("line_id").get<std::string>();
        const auto state = switch_state_from_string(p.at("state").get<std::string>());
        guard_out_of_service(s, line, state);
        change_network(s, apply_switch_action(s.network, line, state), result);
        break;
    }
    case ActionKind::commit_network_mod: {
        const auto mods = mods_of(p);
        for (const auto& m : mods) {
            if (m.kind == NetworkMod::Kind::set_switch) guard_out_of_service(s, m.line_id, m.state);
        }
        auto net = apply_mods(s.network, mods);
        std::erase_if(s.out_of_service, [&](const std::string& id) { return !net.find_line(id); });
        change_network(s, std::move(net), result);
        break;
    }
    case ActionKind::ad_hoc_dsm: {
        auto event = dsm_event_from_json(p);
        if (event.window.begin < s.cursor) {
            throw InputError(fmt::format("DSM event window starts at interval {}, which is in the past (now {})",
                                         event.window.begin, s.cursor));
        }
        event.window.begin -= s.plan_from;
        event.window.end -= s.plan_from;
        const auto tail = ad_hoc_dsm(dispatch_snapshot(s, in.config.strategy), event);
        s.problem = tail.problem;
        s.schedule = tail.schedule;
        s.plan_from = s.cursor;
        result["schedule_tail"] = tail_reference(tail, s.cursor);
        break;
    }
    case ActionKind::inject_outage: {
        const auto element = outage_element(p);
        if (s.out_of_service.contains(element)) throw InputError(fmt::format("'{}' is already out of service", element));
        RestorationOptions opts;
        opts.out_of_service = s.out_of_service;
        const auto plan = restore_after_outage(s.network, element, opts);
        auto net = isolate_element(s.network, element);
        std::vector<std::string> opened;
        for (size_t i = 0; i < net.lines().size(); ++i) {
            if (s.network.lines()[i].closed() && !net.lines()[i].closed()) opened.push_back(net.lines()[i].id);
        }
        if (s.network.find_line(element)) {
            s.out_of_service.insert(element);
        } else {
            for (const auto& l : net.lines()) {
                if (l.from_bus == element || l.to_bus == element) s.out_of_service.insert(l.id);
            }
        }
        const auto before = energized_buses(s.network);
        const auto after = energized_buses(net);
        std::vector<std::string> lost;
        std::set_difference(before.begin(), before.end(), after.begin(), after.end(), std::back_inserter(lost));
        change_network(s, std::move(net), result);
        s.pending_plan = plan;
        s.pending_for = element;
        result["opened"] = opened;
        result["deenergized_buses"] = lost;
        follow.emplace_back(EventKind::restoration_proposed, json{{"failed", element}, {"plan", to_json(plan)}});
        break;
    }
    case ActionKind::apply_restoration_plan: {
        if (!s.pending_plan) throw InputError("no restoration plan is pending");
        if (p.contains("failed") && p.at("failed").get<std::string>() != s.pending_for) {
            throw InputError(fmt::format("pending plan is for '{}', not '{}'", s.pending_for,
                                         p.at("failed").get<std::string>()));
        }
        auto net = s.network;
        for (const auto& act : s.pending_plan->actions) {
            guard_out_of_service(s, act.line_id, act.state);
            net = apply_switch_action(net, act.line_id, act.state);
        }
        result["plan"] = to_json(*s.pending_plan);
        result["failed"] = s.pending_for;
        s.network = std::move(net);
        s.pending_plan.reset();
        s.pending_for.clear();
        break;
    }
    }

    ++s.actions_applied;
    Emitter em{s, s.time, {}};
    const uint64_t seq = em.emit(EventKind::action_applied, {{"action", to_json(a)}, {"result", result}});
    for (auto& [kind, body] : follow) em.emit(kind, std::move(body));
    flag_violations(em, s.cursor == 0 ? 0 : s.cursor - 1);
    result["seq"] = seq;
    return {next, std::move(em.events), result};
}

std::shared_ptr<const LiveState> replay_log(const LiveInputs& in, const std::vector<Event>& log)
{
    auto state = initial_state(in);
    size_t i = 0;
    while (i < log.size()) {
        const auto& e = log[i];
        if (e.seq != state->next_seq) {
            throw Error(fmt::format("log gap: expected seq {}, found {}", state->next_seq, e.seq));
        }
        Transition tr;
        if (e.kind == EventKind::reading) {
            tr = advance_interval(in, *state);
        } else if (e.kind == EventKind::action_applied) {
            tr = apply_action(in, *state, action_from_json(e.body.at("action")));
        } else {
            throw Error(fmt::format("event {} ({}) does not start a transition", e.seq, to_string(e.kind)));
        }
        for (const auto& got : tr.events) {
            if (i >= log.size() || !(to_json(got) == to_json(log[i]))) {
                throw Error(fmt::format("replay diverges from the log at seq {}", got.seq));
            }
            ++i;
        }
        state = tr.state;
    }
    return state;
}

std::vector<KpiReport> live_kpis(const LiveInputs& in, const LiveState& s, size_t intervals)
{
    const size_t n = s.executed.intervals.size();
    const size_t begin = intervals == 0 || intervals > n ? 0 : n - intervals;
    return timeline_kpis(s.executed, begin, n, in.config.displaced_intensity);
}

json to_json(const LiveState& s)
{
    json outcomes = json::array();
    for (const auto& o : s.executed.intervals) {
        outcomes.push_back({o.demand_kw, o.generation_kw, o.battery_kw, o.import_kw, o.export_kw, o.soc_kwh, o.co2_kg});
    }
    return {{"network", to_json(s.network)},
            {"out_of_service", s.out_of_service},
            {"cursor", s.cursor},
            {"time", format_instant(s.time)},
            {"soc_kwh", s.soc_kwh ? json(*s.soc_kwh) : json(nullptr)},
            {"plan_from", s.plan_from},
            {"problem", to_json(s.problem)},
            {"schedule", to_json(s.schedule)},
            {"pending_plan", s.pending_plan ? to_json(*s.pending_plan) : json(nullptr)},
            {"pending_for", s.pending_for},
            {"executed", outcomes},
            {"clamps", s.executed.clamps.size()},
            {"next_seq", s.next_seq},
            {"actions_applied", s.actions_applied}};
}

std::string state_hash(const LiveState& s) { return fingerprint(to_json(s)); }

json state_view(const LiveState& s, size_t queue_depth)
{
    const auto live = energized_buses(s.network);
    json loading = json::object();
    if (const auto sol = current_flows(s)) {
        for (const auto& l : s.network.lines()) {
            const double f = sol->line_flows_kw.at(l.id);
            loading[l.id] = {{"flow_kw", f}, {"loading", std::abs(f) / l.capacity_kw}};
        }
    }
    json buses = json::array();
    for (const auto& b : s.network.buses()) {
        buses.push_back({{"id", b.id}, {"name", b.name}, {"kind", to_string(b.kind)}, {"energized", live.contains(b.id)}});
    }
    const size_t k = s.cursor - s.plan_from;
    json next = json::object();
    if (k < s.schedule.battery_kw.size()) {
        json flex = json::object();
        for (const auto& [id, v] : s.schedule.flex_adjust_kw) flex[id] = v[k];
        next = {{"battery_kw", s.schedule.battery_kw[k]}, {"flex_adjust_kw", flex}};
    }
    return {{"seq", s.next_seq},
            {"cursor", s.cursor},
            {"time", format_instant(s.time)},
            {"substations", s.network.count_buses(BusKind::substation)},
            {"buses", buses},
            {"line_loading", loading},
            {"soc_kwh", s.soc_kwh ? json(*s.soc_kwh) : json(nullptr)},
            {"next_setpoints", next},
            {"out_of_service", s.out_of_service},
            {"pending_plan", s.pending_plan ? json{{"failed", s.pending_for}, {"plan", to_json(*s.pending_plan)}}
                                            : json(nullptr)},
            {"actions_applied", s.actions_applied},
            {"co2_kg", s.executed.total_co2_kg},
            {"queue_depth", queue_depth},
            {"state_hash", state_hash(s)}};
}

// ---------------------------------------------------------------------------

EventLog::EventLog(std::optional<std::string> path)
{
    if (path) {
        file_.open(*path, std::ios::out | std::ios::trunc);
        if (!file_) throw Error(fmt::format("cannot open event log '{}'", *path));
    }
}

void EventLog::append(const std::vector<Event>& events)
{
    {
        std::lock_guard lock(mu_);
        for (const auto& e : events) {
            if (e.seq != events_.size()) {
                throw Error(fmt::format("event seq {} does not follow {}", e.seq, events_.size()));
            }
            events_.push_back(e);
            if (file_.is_open()) file_ << to_json(e).dump() << '\n';
        }
        if (file_.is_open()) file_.flush();
    }
    cv_.notify_all();
}

std::vector<Event> EventLog::read_from(uint64_t from, std::chrono::milliseconds timeout) const
{
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || events_.size() > from; });
    if (events_.size() <= from) return {};
    return {events_.begin() + static_cast<long>(from), events_.end()};
}

std::vector<Event> EventLog::all() const
{
    std::lock_guard lock(mu_);
    return events_;
}

uint64_t EventLog::size() const
{
    std::lock_guard lock(mu_);
    return events_.size();
}

void EventLog::close()
{
    {
        std::lock_guard lock(mu_);
        closed_ = true;
        if (file_.is_open()) file_.close();
    }
    cv_.notify_all();
}

Gateway::Gateway(std::shared_ptr<const LiveInputs> inputs, Options options)
    : inputs_(std::move(inputs)), options_(std::move(options)), log_(options_.event_log_path),
      state_(initial_state(*inputs_))
{
    worker_ = std::thread([this] { run(); });
    if (options_.speed > 0.0) driver_ = std::thread([this] { drive(); });
}

Gateway::~Gateway() { stop(); }

std::shared_ptr<const LiveState> Gateway::snapshot() const
{
    std::lock_guard lock(state_mu_);
    return state_;
}

size_t Gateway::queue_depth() const
{
    std::lock_guard lock(queue_mu_);
    return queue_.size();
}

bool Gateway::replay_finished() const { return snapshot()->cursor >= inputs_->config.horizon(); }

std::future<Ack> Gateway::enqueue(Command cmd)
{
    std::promise<Ack> done;
    auto fut = done.get_future();
    {
        std::lock_guard lock(queue_mu_);
        if (stopping_) {
            done.set_value({false, 0, "service is shutting down", {}, {}});
            return fut;
        }
        queue_.emplace_back(std::move(cmd), std::move(done));
    }
    queue_cv_.notify_one();
    return fut;
}

std::future<Ack> Gateway::submit(OperatorAction action)
{
    return enqueue([this, action = std::move(action)](const LiveState& s) { return apply_action(*inputs_, s, action); });
}

std::future<Ack> Gateway::step()
{
    return enqueue([this](const LiveState& s) { return advance_interval(*inputs_, s); });
}

void Gateway::run()
{
    for (;;) {
        std::pair<Command, std::promise<Ack>> item;
        {
            std::unique_lock lock(queue_mu_);
            queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            item = std::move(queue_.front());
            queue_.pop_front();
        }
        Ack ack;
        try {
            auto tr = item.first(*snapshot());
            {
                std::lock_guard lock(state_mu_);
                state_ = tr.state;
            }
            log_.append(tr.events);
            ack.accepted = true;
            ack.seq = tr.events.front().seq;
            ack.result = std::move(tr.result);
            ack.events = std::move(tr.events);
        } catch (const InputError& e) {
            ack.error = e.what();
            spdlog::info("rejected: {}", e.what());
        } catch (const std::exception& e) {
            ack.error = e.what();
            spdlog::error("command failed: {}", e.what());
        }
        item.second.set_value(std::move(ack));
    }
}

void Gateway::drive()
{
    const auto period = std::chrono::duration<double>(inputs_->config.interval_minutes * 60.0 / options_.speed);
    for (;;) {
        {
            std::unique_lock lock(drive_mu_);
            if (drive_cv_.wait_for(lock, period, [&] {
                    std::lock_guard q(queue_mu_);
                    return stopping_;
                })) {
                return;
            }
        }
        if (replay_finished()) return;
        step().wait();
    }
}

void Gateway::stop()
{
    {
        std::lock_guard lock(queue_mu_);
        if (stopping_ && !worker_.joinable()) return;
        stopping_ = true;
    }
    queue_cv_.notify_all();
    drive_cv_.notify_all();
    if (driver_.joinable()) driver_.join();
    if (worker_.joinable()) worker_.join();
    log_.close();
}

} // namespace sles
