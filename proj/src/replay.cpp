#include "lrs/replay.hpp"

#include <chrono>
#include <future>
#include <mutex>
#include <sstream>
#include <tuple>

#include "lrs/error.hpp"
#include "lrs/sim.hpp"

namespace lrs::harness {

using Clock = std::chrono::steady_clock;

std::vector<UpdateBatch> update_batches(const trace::TraceData& data) {
    std::vector<UpdateBatch> out;
    for (const auto& r : data.records) {
        auto u = trace::to_update(r);
        if (!u) continue;
        auto t = rm::time_of(*u);
        if (out.empty() || out.back().t != t) out.push_back({t, {}});
        out.back().updates.push_back(std::move(*u));
    }
    return out;
}

ban::SensorConfig trace_sensor_table(const trace::TraceData& data) {
    std::istringstream in(data.header.sensor_table_text);
    return ban::load_sensor_table(in);
}

std::vector<double> replay(const trace::TraceData& data, gateway::GatewayState& state, double speed,
                           const std::atomic<bool>* stop) {
    for (const auto& op : data.header.operators) state.register_operator(op);
    auto batches = update_batches(data);
    std::vector<double> offsets;
    if (batches.empty()) return offsets;
    const auto start = Clock::now();
    const auto t0 = batches.front().t;
    for (const auto& b : batches) {
        if (stop && *stop) break;
        if (speed > 0.0) {
            auto due = start + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double, std::milli>(static_cast<double>(b.t - t0) / speed));
            std::this_thread::sleep_until(due);
        }
        state.apply_batch(b.updates);
        offsets.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
    }
    return offsets;
}

LiveRun::LiveRun(Scenario scenario, gateway::GatewayState& state, double speed)
    : scenario_(std::move(scenario)), state_(state), speed_(speed) {
    scenario_.validate();
}

LiveRun::~LiveRun() { stop(); }

namespace {

/// Commands from HTTP threads waiting to enter the simulation; outlives it.
struct Inbox {
    std::mutex mu;
    bool closed = false;
    std::vector<std::tuple<std::string, proto::QueryMessage, rm::CommandCallback>> items;
};

}  // namespace

void LiveRun::start() {
    for (const auto& op : scenario_.operators) state_.register_operator(op.id);
    auto inbox = std::make_shared<Inbox>();
    state_.set_command_sink([inbox](const std::string& op_id, proto::QueryMessage q) {
        auto done = std::make_shared<std::promise<rm::CommandResult>>();
        auto result = done->get_future();
        {
            std::lock_guard lock(inbox->mu);
            if (inbox->closed) return rm::CommandResult{false, "simulation has ended", "unavailable"};
            inbox->items.emplace_back(op_id, std::move(q), [done](const rm::CommandResult& r) { done->set_value(r); });
        }
        if (result.wait_for(std::chrono::seconds(30)) != std::future_status::ready)
            return rm::CommandResult{false, "simulation did not answer", "timeout"};
        try {
            return result.get();
        } catch (const std::future_error&) {
            return rm::CommandResult{false, "simulation has ended", "unavailable"};
        }
    });
    thread_ = std::thread([this, inbox] {
        Simulation sim(scenario_);
        sim.set_update_listener(
            [this](std::int64_t, std::span<const rm::RecordUpdate> updates) { state_.apply_batch(updates); });
        const auto start = Clock::now();
        while (!stop_ && !sim.finished()) {
            if (speed_ > 0.0) {
                auto due = start + std::chrono::duration_cast<Clock::duration>(
                                       std::chrono::duration<double, std::milli>(static_cast<double>(sim.now()) / speed_));
                std::this_thread::sleep_until(due);
            }
            {
                std::lock_guard lock(inbox->mu);
                for (auto& [op, q, done] : inbox->items) sim.submit_command(op, std::move(q), std::move(done));
                inbox->items.clear();
            }
            sim.step();
        }
        std::lock_guard lock(inbox->mu);
        inbox->closed = true;
        for (auto& item : inbox->items) std::get<2>(item)({false, "simulation has ended", "unavailable"});
        inbox->items.clear();
        finished_ = true;
    });
}

void LiveRun::stop() {
    stop_ = true;
    wait();
}

void LiveRun::wait() {
    if (thread_.joinable()) thread_.join();
}

}  // namespace lrs::harness
