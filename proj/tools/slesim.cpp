#include "sles/dispatch.hpp"
#include "sles/error.hpp"
#include "sles/gateway.hpp"
#include "sles/metrics.hpp"
#include "sles/network.hpp"
#include "sles/server.hpp"
#include "sles/telemetry.hpp"
#include "sles/twin.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

using namespace sles;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

volatile std::sig_atomic_t g_signal = 0;

void on_signal(int sig) { g_signal = sig; }

struct RunFlags {
    std::string fixture = "data/keele.json";
    std::string config;
    std::string start = "2021-06-14T00:00:00Z";
    size_t days = 7;
    size_t meters = 1500;
    int interval = 30;
    std::string strategy = "lp";
    uint64_t seed = 42;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool seed = true)
{
    cmd->add_option("--fixture", f.fixture, "network file")->capture_default_str();
    cmd->add_option("--config", f.config, "run configuration document");
    cmd->add_option("--start", f.start, "first interval, UTC")->capture_default_str();
    cmd->add_option("--days", f.days, "days to simulate")->capture_default_str();
    cmd->add_option("--meters", f.meters, "smart meter count")->capture_default_str();
    cmd->add_option("--interval-min", f.interval, "interval length in minutes")->capture_default_str();
    cmd->add_option("--strategy", f.strategy, "dispatch strategy")->capture_default_str();
    if (seed) cmd->add_option("--seed", f.seed, "random seed")->capture_default_str();
}

json read_json(const std::string& path)
{
    const auto text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("{}: {}", path, e.what()));
    }
}

// Flags given on the command line win over the configuration file.
BaselineConfig build_config(const CLI::App* cmd, const RunFlags& f)
{
    auto net = load_network_file(f.fixture);
    BaselineConfig c = f.config.empty() ? BaselineConfig{std::move(net)} : config_from_json(read_json(f.config), std::move(net));
    auto given = [&](const char* name) { return f.config.empty() || cmd->count(name) > 0; };
    if (given("--start")) c.start = parse_instant(f.start);
    if (given("--days")) c.days = f.days;
    if (given("--meters")) c.meter_count = f.meters;
    if (given("--interval-min")) c.interval_minutes = f.interval;
    if (given("--strategy")) c.strategy = f.strategy;
    if (c.days == 0) throw InputError("--days must be positive");
    (void)c.horizon();
    (void)StrategyRegistry::instance().get(c.strategy);
    return c;
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

void emit(const std::string& out, const std::string& text)
{
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        write_file(out, text);
    }
}

int cmd_gen_data(const CLI::App* cmd, const RunFlags& f, const std::string& out)
{
    const auto c = build_config(cmd, f);
    GenerationSpec spec;
    spec.meter_count = c.meter_count;
    spec.start = c.start;
    spec.end = c.start + Minutes(static_cast<long>(c.horizon()) * c.interval_minutes);
    spec.interval_minutes = c.interval_minutes;
    spec.electric_annual_kwh = c.electric_annual_kwh;
    spec.heat_annual_kwh = c.heat_annual_kwh;
    spec.gas_annual_kwh = c.gas_annual_kwh;
    spec.loads = load_shares(c.network);
    const auto data = generate_synthetic_profiles(spec, f.seed);
    const fs::path dir = out.empty() ? "out" : out;
    fs::create_directories(dir);
    {
        std::ofstream tel(dir / "telemetry.csv", std::ios::binary);
        if (!tel) throw Error("cannot write telemetry.csv");
        write_telemetry_csv(data, tel);
    }
    write_file(dir / "weather.csv", write_weather_csv(data.weather));
    write_file(dir / "carbon.csv", write_carbon_csv(data.carbon_intensity));
    fmt::print("{} meters, {} readings, electric {:.3f} MWh -> {}\n", data.meters.size(), data.reading_count(),
               data.total_kwh(EnergyVector::electric) / 1000.0, dir.string());
    return 0;
}

int cmd_run(const CLI::App* cmd, const RunFlags& f, const std::string& scenario_path, const std::string& out)
{
    const auto c = build_config(cmd, f);
    const Scenario s = scenario_path.empty() ? Scenario{} : scenario_from_json(read_json(scenario_path));
    const auto r = run_scenario(c, s, f.seed);
    const fs::path dir = out.empty() ? "out" : out;
    fs::create_directories(dir);
    write_file(dir / "result.json", to_json(r).dump(2) + "\n");
    write_file(dir / "kpis.csv", kpi_csv(r.kpis));
    write_file(dir / "schedule.csv", timeline_csv(r.timeline));
    write_file(dir / "timeline.json",
               to_json(kpi_timeline(r.timeline, 0, r.timeline.intervals.size(), c.displaced_intensity)).dump() + "\n");
    const auto& campus = r.kpis.back();
    fmt::print("{} {}: SS {:.3f}% SC {:.3f}% co2 {:.1f} kg (idle {:.1f} kg), {} violation intervals, provenance {}\n",
               r.scenario, format_instant(r.window.start), campus.self_sufficiency_pct, campus.self_consumption_pct,
               r.dispatch.total_co2_kg, r.dispatch.baseline_co2_kg, r.powerflow.violation_intervals, r.provenance);
    return 0;
}

int cmd_optimize(const std::string& problem_path, const std::string& strategy, const std::string& event_path,
                 size_t at, bool dsm, const std::string& out)
{
    const auto p = problem_from_json(read_json(problem_path));
    auto schedule = optimize_co2(p, strategy);
    DispatchProblem solved = p;
    json doc;
    if (!event_path.empty()) {
        const auto event = dsm_event_from_json(read_json(event_path));
        double soc = p.battery ? p.battery->soc_kwh : 0.0;
        if (p.battery && at > 0) soc = schedule.soc_kwh.at(at - 1);
        const auto tail = ad_hoc_dsm({p, schedule, at, soc, strategy}, event);
        doc["tail_from"] = tail.from_interval;
        schedule = tail.schedule;
        solved = tail.problem;
    }
    doc["schedule"] = to_json(schedule);
    if (dsm) {
        std::vector<std::string> buildings;
        for (const auto& fl : solved.flexible_loads) buildings.push_back(fl.id);
        json events = json::array();
        for (const auto& e : day_ahead_dsm(solved, buildings, strategy)) events.push_back(to_json(e));
        doc["dsm_events"] = events;
    }
    if (out.size() > 4 && out.substr(out.size() - 4) == ".csv") {
        emit(out, schedule_csv(solved, schedule));
    } else {
        emit(out, doc.dump(2) + "\n");
    }
    return 0;
}

int cmd_report(const std::string& timeline_path, const std::string& format, const std::string& out)
{
    const auto reports = timeline_reports(kpi_timeline_from_json(read_json(timeline_path)));
    if (format == "json") {
        json arr = json::array();
        for (const auto& r : reports) arr.push_back(to_json(r));
        emit(out, arr.dump(2) + "\n");
    } else {
        emit(out, kpi_csv(reports));
    }
    return 0;
}

int cmd_scenario(const CLI::App* cmd, const RunFlags& f, const std::string& scenario_path, const std::string& out)
{
    const auto c = build_config(cmd, f);
    const auto comparison = run_comparison(c, scenario_from_json(read_json(scenario_path)), f.seed);
    emit(out, to_json(comparison).dump(2) + "\n");
    if (!out.empty() && out != "-") {
        const auto& d = comparison.diff;
        fmt::print("{} vs {}: co2 {:+.3f} kg, worst loading {:+.3f} pp, {} new / {} cleared violations\n", d.to,
                   d.from, d.co2_kg, d.worst_loading_pct, d.added_violations.size(), d.removed_violations.size());
    }
    return 0;
}

int cmd_serve(const CLI::App* cmd, const RunFlags& f, const std::string& host, int port, double speed,
              const std::string& static_dir, const std::string& out)
{
    auto inputs = LiveInputs::make(build_config(cmd, f), f.seed);
    const fs::path dir = out.empty() ? "serve_out" : out;
    fs::create_directories(dir);
    Gateway gw(inputs, {(dir / "events.jsonl").string(), speed});
    ServerOptions opts;
    opts.host = host;
    opts.port = port;
    if (!static_dir.empty()) opts.static_dir = static_dir;
    Server server(gw, opts);
    server.bind();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.start();
    spdlog::info("serving {} substations on http://{}:{} (seed {}, speed {}x)",
                 gw.snapshot()->network.count_buses(BusKind::substation), host, server.port(), f.seed, speed);
    while (g_signal == 0) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    spdlog::info("signal {} received, shutting down", static_cast<int>(g_signal));
    server.stop();
    gw.stop();
    const auto snap = gw.snapshot();
    const auto reports = live_kpis(*inputs, *snap, 0);
    write_file(dir / "kpis_final.csv", kpi_csv(reports));
    spdlog::info("flushed KPIs over {} intervals and {} events to {}", snap->executed.intervals.size(),
                 gw.log().size(), dir.string());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Campus smart local energy system simulator"};
    app.require_subcommand(1);
    spdlog::set_level(spdlog::level::info);

    RunFlags f;
    std::string out, scenario_path, problem_path, event_path, timeline_path, format = "csv", host = "127.0.0.1",
                                                                             static_dir, strategy = "lp";
    size_t at = 0;
    bool dsm = false;
    int port = 8080;
    double speed = 1800.0;

    auto* gen = app.add_subcommand("gen-data", "write synthetic telemetry, weather and carbon CSVs");
    add_run_flags(gen, f);
    gen->add_option("--out", out, "output directory");

    auto* run = app.add_subcommand("run", "simulate the pipeline and write reports");
    add_run_flags(run, f);
    run->add_option("--scenario", scenario_path, "scenario document");
    run->add_option("--out", out, "output directory");

    auto* opt = app.add_subcommand("optimize", "schedule a dispatch problem");
    opt->add_option("problem", problem_path, "problem document")->required();
    opt->add_option("--strategy", strategy, "dispatch strategy")->capture_default_str();
    opt->add_option("--event", event_path, "ad hoc DSM event applied after optimizing");
    opt->add_option("--at", at, "current interval for --event")->capture_default_str();
    opt->add_flag("--dsm", dsm, "emit day-ahead DSM events");
    opt->add_option("--out", out, "output file (.csv for the CSV table, else JSON)");

    auto* rep = app.add_subcommand("report", "KPI table from a timeline document");
    rep->add_option("timeline", timeline_path, "timeline document")->required();
    rep->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    rep->add_option("--out", out, "output file");

    auto* scn = app.add_subcommand("scenario", "run a scenario against the baseline and diff");
    add_run_flags(scn, f);
    scn->add_option("scenario", scenario_path, "scenario document")->required();
    scn->add_option("--out", out, "output file");

    auto* srv = app.add_subcommand("serve", "host the operator service");
    add_run_flags(srv, f);
    srv->add_option("--host", host)->capture_default_str();
    srv->add_option("--port", port)->capture_default_str();
    srv->add_option("--speed", speed, "simulated seconds per second, 0 pauses replay")->capture_default_str();
    srv->add_option("--static", static_dir, "console bundle directory");
    srv->add_option("--out", out, "directory for the event log and final KPIs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen) return cmd_gen_data(gen, f, out);
        if (*run) return cmd_run(run, f, scenario_path, out);
        if (*opt) return cmd_optimize(problem_path, strategy, event_path, at, dsm, out);
        if (*rep) return cmd_report(timeline_path, format, out);
        if (*scn) return cmd_scenario(scn, f, scenario_path, out);
        if (*srv) return cmd_serve(srv, f, host, port, speed, static_dir, out);
    } catch (const InputError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    }
    return 0;
}
