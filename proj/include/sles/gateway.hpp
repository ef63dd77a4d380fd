#pragma once

#include "sles/dispatch.hpp"
#include "sles/metrics.hpp"
#include "sles/network.hpp"
#include "sles/powerflow.hpp"
#include "sles/twin.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace sles {

enum class ActionKind { switch_action, commit_network_mod, ad_hoc_dsm, inject_outage, apply_restoration_plan };
enum class EventKind { reading, action_applied, violation, clamp, restoration_proposed };

std::string_view to_string(ActionKind k);
std::string_view to_string(EventKind k);
ActionKind action_kind_from_string(std::string_view s);
EventKind event_kind_from_string(std::string_view s);

struct OperatorAction {
    ActionKind kind = ActionKind::switch_action;
    nlohmann::json payload = nlohmann::json::object();
    std::string actor = "operator";
    Instant requested_at{};
};

// Checks the payload shape for the kind; throws ParseError.
OperatorAction action_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const OperatorAction& a);

struct Event {
    uint64_t seq = 0;
    Instant timestamp{}; // simulated time of the state the event belongs to
    EventKind kind = EventKind::reading;
    nlohmann::json body;
    bool operator==(const Event&) const = default;
};

nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& doc);

// Immutable inputs of a live run.
struct LiveInputs {
    BaselineConfig config;
    uint64_t seed = 0;
    PipelineInputs inputs;

    static std::shared_ptr<const LiveInputs> make(BaselineConfig config, uint64_t seed);
};

struct LiveState {
    explicit LiveState(NetworkTopology net) : network(std::move(net)) {}

    NetworkTopology network;
    std::set<std::string> out_of_service;
    size_t cursor = 0; // next interval to execute
    Instant time{};
    std::optional<double> soc_kwh;
    // Active plan: problem and schedule starting at absolute interval plan_from.
    DispatchProblem problem;
    DispatchSchedule schedule;
    size_t plan_from = 0;
    std::optional<RestorationPlan> pending_plan;
    std::string pending_for;
    ExecutedTimeline executed;
    uint64_t next_seq = 0;
    size_t actions_applied = 0;
};

nlohmann::json to_json(const LiveState& s);
std::string state_hash(const LiveState& s);

// Snapshot of the active dispatch as ad hoc DSM sees it.
DispatchSnapshot dispatch_snapshot(const LiveState& s, const std::string& strategy);

// Pure transitions. Both throw (InputError and subclasses) on rejection,
// leaving the input state untouched.
struct Transition {
    std::shared_ptr<const LiveState> state;
    std::vector<Event> events;
    nlohmann::json result;
};

std::shared_ptr<const LiveState> initial_state(const LiveInputs& in);
Transition advance_interval(const LiveInputs& in, const LiveState& s);
Transition apply_action(const LiveInputs& in, const LiveState& s, const OperatorAction& a);

// Re-applies readings and actions from a log to the initial state. Throws
// Error when the regenerated events differ from the log.
std::shared_ptr<const LiveState> replay_log(const LiveInputs& in, const std::vector<Event>& log);

// KPI reports over the last `intervals` executed intervals (all when 0).
std::vector<KpiReport> live_kpis(const LiveInputs& in, const LiveState& s, size_t intervals);

// Summary served at GET /state.
nlohmann::json state_view(const LiveState& s, size_t queue_depth);

// ---------------------------------------------------------------------------

class EventLog {
public:
    explicit EventLog(std::optional<std::string> path = {});

    void append(const std::vector<Event>& events);
    // Events with seq >= from; waits up to `timeout` when none are available.
    std::vector<Event> read_from(uint64_t from, std::chrono::milliseconds timeout) const;
    std::vector<Event> all() const;
    uint64_t size() const;
    void close();

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<Event> events_;
    std::ofstream file_;
    bool closed_ = false;
};

struct Ack {
    bool accepted = false;
    uint64_t seq = 0; // action_applied or reading event
    std::string error;
    nlohmann::json result;
    std::vector<Event> events;
};

// Owns the authoritative LiveState. Mutations go through one FIFO queue
// drained by a single thread; readers take shared snapshots.
class Gateway {
public:
    struct Options {
        std::optional<std::string> event_log_path;
        // Simulated seconds per wall second; 0 leaves replay to step().
        double speed = 0.0;
    };

    Gateway(std::shared_ptr<const LiveInputs> inputs, Options options);
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    std::future<Ack> submit(OperatorAction action);
    std::future<Ack> step();

    std::shared_ptr<const LiveState> snapshot() const;
    const LiveInputs& inputs() const { return *inputs_; }
    const EventLog& log() const { return log_; }
    size_t queue_depth() const;
    bool replay_finished() const;

    void stop();

private:
    using Command = std::function<Transition(const LiveState&)>;
    std::future<Ack> enqueue(Command cmd);
    void run();
    void drive();

    std::shared_ptr<const LiveInputs> inputs_;
    Options options_;
    EventLog log_;

    mutable std::mutex state_mu_;
    std::shared_ptr<const LiveState> state_;

    mutable std::mutex queue_mu_;
    std::condition_variable queue_cv_;
    std::deque<std::pair<Command, std::promise<Ack>>> queue_;
    bool stopping_ = false;

    std::mutex drive_mu_;
    std::condition_variable drive_cv_;
    std::thread worker_;
    std::thread driver_;
};

} // namespace sles
