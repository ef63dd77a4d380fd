#include "sles/server.hpp"

#include "sles/error.hpp"

#include <atomic>
#include <charconv>
#include <filesystem>

#include <fmt/core.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

namespace sles {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view message)
{
    send_json(res, status, {{"error", message}});
}

std::optional<uint64_t> parse_count(std::string_view text)
{
    uint64_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size()) return std::nullopt;
    return v;
}

// "48" intervals, "24h" hours, or "all".
std::optional<size_t> parse_window(std::string_view w, int interval_minutes)
{
    if (w.empty() || w == "all") return 0;
    if (w.back() == 'h') {
        const auto h = parse_count(w.substr(0, w.size() - 1));
        if (!h || *h == 0) return std::nullopt;
        return static_cast<size_t>(*h * 60 / static_cast<uint64_t>(interval_minutes));
    }
    const auto n = parse_count(w);
    if (!n || *n == 0) return std::nullopt;
    return static_cast<size_t>(*n);
}

std::string sse_frame(const Event& e)
{
    return fmt::format("id: {}\nevent: {}\ndata: {}\n\n", e.seq, to_string(e.kind), to_json(e).dump());
}

} // namespace

struct Server::Impl {
    Gateway& gw;
    ServerOptions opts;
    httplib::Server http;
    std::thread thread;
    std::atomic<bool> stopping{false};
    int bound = -1;

    Impl(Gateway& g, ServerOptions o) : gw(g), opts(std::move(o)) { routes(); }

    void routes()
    {
        http.new_task_queue = [] { return new httplib::ThreadPool(32); };
        // The library default sets SO_REUSEPORT, which lets a second server share a taken port.
        http.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });

        http.Get("/network", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, to_json(gw.snapshot()->network));
        });

        http.Get("/state", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, state_view(*gw.snapshot(), gw.queue_depth()));
        });

        http.Get("/kpis", [this](const httplib::Request& req, httplib::Response& res) {
            const auto w = parse_window(req.get_param_value("window"), gw.inputs().config.interval_minutes);
            if (!w) return send_error(res, 400, "window must be an interval count, '<n>h' or 'all'");
            const auto snap = gw.snapshot();
            json reports = json::array();
            for (const auto& r : live_kpis(gw.inputs(), *snap, *w)) reports.push_back(to_json(r));
            send_json(res, 200, {{"seq", snap->next_seq}, {"intervals", snap->executed.intervals.size()},
                                 {"reports", reports}});
        });

        http.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
            uint64_t from = 0;
            if (req.has_param("from")) {
                const auto v = parse_count(req.get_param_value("from"));
                if (!v) return send_error(res, 400, "from must be a non-negative integer");
                from = *v;
            }
            if (req.has_header("Last-Event-ID")) {
                if (const auto v = parse_count(req.get_header_value("Last-Event-ID"))) from = std::max(from, *v + 1);
            }
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("text/event-stream", [this, next = from](size_t, httplib::DataSink& sink) mutable {
                if (stopping) {
                    sink.done();
                    return true;
                }
                const auto events = gw.log().read_from(next, std::chrono::milliseconds(250));
                if (events.empty()) {
                    static constexpr std::string_view ping = ": ping\n\n";
                    return sink.write(ping.data(), ping.size());
                }
                for (const auto& e : events) {
                    const auto frame = sse_frame(e);
                    if (!sink.write(frame.data(), frame.size())) return false;
                    next = e.seq + 1;
                }
                return true;
            });
        });

        http.Post("/actions", [this](const httplib::Request& req, httplib::Response& res) {
            OperatorAction action;
            try {
                auto doc = json::parse(req.body);
                if (doc.is_object() && !doc.contains("requested_at")) {
                    doc["requested_at"] = format_instant(std::chrono::time_point_cast<std::chrono::seconds>(
                        std::chrono::system_clock::now()));
                }
                action = action_from_json(doc);
            } catch (const json::exception& e) {
                return send_error(res, 422, fmt::format("malformed JSON: {}", e.what()));
            } catch (const InputError& e) {
                return send_error(res, 422, e.what());
            }
            auto fut = gw.submit(action);
            if (fut.wait_for(opts.action_timeout) != std::future_status::ready) {
                return send_error(res, 503, "action queued but not applied in time");
            }
            const auto ack = fut.get();
            if (!ack.accepted) {
                spdlog::info("action {} from '{}' rejected: {}", to_string(action.kind), action.actor, ack.error);
                return send_error(res, 422, ack.error);
            }
            spdlog::info("action {} from '{}' applied as seq {}", to_string(action.kind), action.actor, ack.seq);
            json events = json::array();
            for (const auto& e : ack.events) events.push_back(to_json(e));
            send_json(res, 200, {{"seq", ack.seq}, {"result", ack.result}, {"events", events}});
        });

        http.Post("/scenarios", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const auto s = scenario_from_json(json::parse(req.body));
                send_json(res, 200, to_json(run_comparison(gw.inputs().config, s, gw.inputs().seed)));
            } catch (const json::exception& e) {
                send_error(res, 422, fmt::format("malformed JSON: {}", e.what()));
            } catch (const InputError& e) {
                send_error(res, 422, e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            }
        });

        http.Post("/network/what-if", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const auto doc = json::parse(req.body);
                const json& list = doc.is_array() ? doc : doc.at("mods");
                std::vector<NetworkMod> mods;
                for (const auto& m : list) mods.push_back(network_mod_from_json(m));
                const auto snap = gw.snapshot();
                send_json(res, 200, {{"seq", snap->next_seq}, {"report", to_json(test_network_mod(snap->network, mods))}});
            } catch (const json::exception& e) {
                send_error(res, 422, fmt::format("malformed request: {}", e.what()));
            } catch (const InputError& e) {
                send_error(res, 422, e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            }
        });

        const bool console = opts.static_dir && std::filesystem::is_directory(*opts.static_dir);
        if (console) {
            http.set_mount_point("/", *opts.static_dir);
        } else {
            http.Get("/", [](const httplib::Request&, httplib::Response& res) {
                send_json(res, 200, {{"routes", {"GET /network", "GET /state", "GET /kpis?window=", "GET /events?from=",
                                                 "POST /actions", "POST /scenarios", "POST /network/what-if"}}});
            });
        }
    }
};

Server::Server(Gateway& gateway, ServerOptions options) : impl_(std::make_unique<Impl>(gateway, std::move(options))) {}

Server::~Server() { stop(); }

int Server::bind()
{
    auto& d = *impl_;
    if (d.opts.port == 0) {
        d.bound = d.http.bind_to_any_port(d.opts.host);
        if (d.bound < 0) throw Error(fmt::format("cannot bind {}", d.opts.host));
    } else {
        if (!d.http.bind_to_port(d.opts.host, d.opts.port)) {
            throw Error(fmt::format("port {} on {} is already in use", d.opts.port, d.opts.host));
        }
        d.bound = d.opts.port;
    }
    return d.bound;
}

void Server::start()
{
    auto& d = *impl_;
    if (d.bound < 0) bind();
    d.thread = std::thread([&d] { d.http.listen_after_bind(); });
    d.http.wait_until_ready();
}

void Server::stop()
{
    auto& d = *impl_;
    d.stopping = true;
    if (d.http.is_running()) d.http.stop();
    if (d.thread.joinable()) d.thread.join();
}

int Server::port() const { return impl_->bound; }

} // namespace sles
