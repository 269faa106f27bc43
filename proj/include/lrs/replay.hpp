#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

#include "lrs/gateway.hpp"
#include "lrs/scenario.hpp"
#include "lrs/trace.hpp"

namespace lrs::harness {

/// Record updates of one simulation instant.
struct UpdateBatch {
    std::int64_t t = 0;
    std::vector<rm::RecordUpdate> updates;
};

std::vector<UpdateBatch> update_batches(const trace::TraceData& data);

/// Sensor table stored in the trace header.
ban::SensorConfig trace_sensor_table(const trace::TraceData& data);

/// Registers the trace's operators and feeds its updates to `state`,
/// sleeping between batches so simulated time runs `speed` times faster
/// than wall time (speed <= 0: no pacing). Returns the wall-clock offset in
/// ms at which each batch was applied.
std::vector<double> replay(const trace::TraceData& data, gateway::GatewayState& state, double speed,
                           const std::atomic<bool>* stop = nullptr);

/// A simulation paced against the wall clock on a background thread,
/// publishing to a gateway and taking its commands.
class LiveRun {
public:
    LiveRun(Scenario scenario, gateway::GatewayState& state, double speed);
    ~LiveRun();
    LiveRun(const LiveRun&) = delete;
    LiveRun& operator=(const LiveRun&) = delete;

    void start();
    void stop();
    /// Blocks until the scenario has run to its end (or stop()).
    void wait();
    bool finished() const noexcept { return finished_; }

private:
    Scenario scenario_;
    gateway::GatewayState& state_;
    double speed_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> finished_{false};
    std::thread thread_;
};

}  // namespace lrs::harness
