// lrs: simulate scenarios, recompute metrics from traces, and serve the
// monitoring gateway from a live run or a recorded trace.
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "lrs/error.hpp"
#include "lrs/gateway.hpp"
#include "lrs/replay.hpp"
#include "lrs/sim.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::pair<std::string, int> split_address(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos) return {"127.0.0.1", std::stoi(addr)};
    return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
}

void print_summary(std::span<const lrs::metrics::SessionLog> logs, std::span<const lrs::metrics::SessionMetrics> ms) {
    std::printf("%-24s %9s %9s %9s %9s %9s\n", "session", "expected", "received", "realtime", "correct%", "realtime%");
    for (std::size_t i = 0; i < logs.size(); ++i)
        std::printf("%-24s %9llu %9llu %9llu %9s %9s\n", logs[i].name.c_str(),
                    static_cast<unsigned long long>(ms[i].expected), static_cast<unsigned long long>(ms[i].received_valid),
                    static_cast<unsigned long long>(ms[i].realtime), lrs::metrics::format_percent(ms[i].pct_correct).c_str(),
                    lrs::metrics::format_percent(ms[i].pct_realtime).c_str());
}

void print_conservation(std::span<const lrs::trace::Conservation> cs) {
    for (const auto& c : cs)
        std::printf("%s: produced %llu = delivered %llu + lost %llu + buffered %llu + corrupt %llu  [%s]\n",
                    c.op_id.c_str(), static_cast<unsigned long long>(c.produced),
                    static_cast<unsigned long long>(c.delivered_valid),
                    static_cast<unsigned long long>(c.lost_permanently),
                    static_cast<unsigned long long>(c.still_buffered),
                    static_cast<unsigned long long>(c.corrupt_dropped), c.holds() ? "ok" : "VIOLATED");
}

void wait_for_interrupt(const std::function<bool()>& done) {
    while (!g_interrupted && !done()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

}  // namespace

int main(int argc, char** argv) {
    using namespace lrs;
    CLI::App app{"Long-range operator monitoring: simulator, metrics and gateway"};
    app.require_subcommand(1);

    std::string scenario_arg;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario and write trace and results");
    simulate->add_option("scenario", scenario_arg, "Builtin name or scenario file")->required();
    simulate->add_option("--seed", seed, "Override the scenario seed");
    simulate->add_option("--out", out_dir, "Output directory (default results/<scenario>)");

    std::string trace_path;
    double speed = 1.0;
    std::string serve_addr;
    auto* replay_cmd = app.add_subcommand("replay", "Serve a recorded trace through the gateway");
    replay_cmd->add_option("trace", trace_path, "Trace file")->required();
    replay_cmd->add_option("--speed", speed, "Replay speed factor; 0 loads everything at once")->check(CLI::NonNegativeNumber);
    replay_cmd->add_option("--serve", serve_addr, "host:port for the gateway")->default_val("127.0.0.1:8080");

    bool live = false;
    auto* serve = app.add_subcommand("serve", "Run a scenario live with the gateway attached");
    serve->add_option("scenario", scenario_arg, "Builtin name or scenario file")->required();
    serve->add_flag("--live", live, "Live simulation mode")->required();
    serve->add_option("--speed", speed, "Simulated seconds per wall second")->check(CLI::PositiveNumber);
    serve->add_option("--seed", seed, "Override the scenario seed");
    serve->add_option("--addr", serve_addr, "host:port for the gateway")->default_val("127.0.0.1:8080");

    auto* metrics_cmd = app.add_subcommand("metrics", "Recompute session metrics from a trace");
    metrics_cmd->add_option("trace", trace_path, "Trace file")->required();
    metrics_cmd->add_option("--out", out_dir, "Also write result CSVs here");

    auto* list = app.add_subcommand("scenarios", "List builtin scenarios, or print one in file form");
    std::string show;
    list->add_option("name", show, "Builtin to print");

    CLI11_PARSE(app, argc, argv);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    try {
        if (*simulate) {
            auto scenario = harness::resolve_scenario(scenario_arg);
            if (seed) scenario.seed = *seed;
            if (out_dir.empty()) out_dir = (std::filesystem::path("results") / scenario.name).string();
            auto result = harness::run_scenario(scenario, out_dir);
            print_summary(result.logs, result.metrics);
            print_conservation(result.conservation);
            std::printf("wrote %s\n", out_dir.c_str());
            return 0;
        }
        if (*metrics_cmd) {
            auto data = trace::read_file(trace_path);
            trace::check_consistency(data);
            auto logs = trace::session_logs(data);
            auto ms = harness::write_results(out_dir, logs, data.header.bin_m);
            print_summary(logs, ms);
            print_conservation(trace::conservation(data));
            return 0;
        }
        if (*replay_cmd) {
            auto data = trace::read_file(trace_path);
            trace::check_consistency(data);
            gateway::GatewayState state(harness::trace_sensor_table(data), rm::ThresholdTable::defaults(), "replay");
            gateway::GatewayServer server(state);
            auto [host, port] = split_address(serve_addr);
            int bound = server.start(host, port);
            std::printf("replaying %s at %gx on http://%s:%d\n", trace_path.c_str(), speed, host.c_str(), bound);
            std::fflush(stdout);
            std::atomic<bool> stop{false};
            std::atomic<bool> done{false};
            std::thread feeder([&] {
                harness::replay(data, state, speed, &stop);
                done = true;
            });
            wait_for_interrupt([&] { return done.load(); });
            if (done) {
                std::printf("replay complete; serving until interrupted\n");
                std::fflush(stdout);
                wait_for_interrupt([] { return false; });
            }
            stop = true;
            feeder.join();
            state.close();
            server.stop();
            return 0;
        }
        if (*serve) {
            auto scenario = harness::resolve_scenario(scenario_arg);
            if (seed) scenario.seed = *seed;
            gateway::GatewayState state(ban::default_sensor_table(), rm::ThresholdTable::defaults(), "live");
            gateway::GatewayServer server(state);
            auto [host, port] = split_address(serve_addr);
            int bound = server.start(host, port);
            harness::LiveRun run(scenario, state, speed);
            run.start();
            std::printf("live %s at %gx on http://%s:%d\n", scenario.name.c_str(), speed, host.c_str(), bound);
            std::fflush(stdout);
            wait_for_interrupt([&] { return run.finished(); });
            run.stop();
            if (!g_interrupted) {
                std::printf("simulation finished; serving until interrupted\n");
                std::fflush(stdout);
                wait_for_interrupt([] { return false; });
            }
            state.close();
            server.stop();
            return 0;
        }
        if (*list) {
            if (show.empty()) {
                for (const auto& n : harness::builtin_names()) std::printf("%s\n", n.c_str());
            } else {
                harness::write_scenario(std::cout, harness::builtin(show));
            }
            return 0;
        }
    } catch (const TraceError& e) {
        std::fprintf(stderr, "trace error: %s\n", e.what());
        return 3;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
