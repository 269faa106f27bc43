#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrs/link_sim.hpp"
#include "lrs/op_node.hpp"
#include "lrs/rm_node.hpp"
#include "lrs/scenario.hpp"
#include "lrs/trace.hpp"

namespace lrs::harness {

/// Simulated PEB: plausible vitals and environment readings, GPS from the
/// operator's pose, a slowly draining battery.
class SyntheticPeb : public op::FrameSource {
public:
    SyntheticPeb(const Scenario& scenario, const OperatorSpec& op, const ban::SensorConfig& config, Rng rng);

    void begin_session(std::size_t index);
    std::optional<ban::SensorFrame> poll(std::int64_t now) override;

    const Pose& last_pose() const noexcept { return pose_; }
    const trace::GpsReading& last_gps() const noexcept { return gps_; }

private:
    const Scenario& scenario_;
    const OperatorSpec& op_;
    const ban::SensorConfig& config_;
    Rng rng_;
    std::size_t session_ = 0;
    Pose pose_;
    trace::GpsReading gps_;
};

/// RM position from 120 s of its own GPS fixes, some of them gated out.
metrics::GeoPoint survey_rm_position(const Scenario& scenario, Rng rng);

/// The discrete-event loop binding OP nodes, links and the RM in 10 ms
/// ticks. Single-threaded; submit_command() is the only call meant for
/// other threads, and its queue is drained at tick boundaries.
class Simulation {
public:
    using UpdateListener = std::function<void(std::int64_t t, std::span<const rm::RecordUpdate>)>;

    Simulation(Scenario scenario, std::ostream* trace_out = nullptr,
               ban::SensorConfig config = ban::default_sensor_table(),
               rm::ThresholdTable thresholds = rm::ThresholdTable::defaults());
    ~Simulation();

    const Scenario& scenario() const noexcept { return scenario_; }
    std::int64_t now() const noexcept { return now_; }
    bool finished() const noexcept { return now_ > end_; }

    /// Runs one tick and advances the clock.
    void step();
    void run();
    void run_until(std::int64_t t);

    void set_update_listener(UpdateListener listener) { listener_ = std::move(listener); }
    void submit_command(const std::string& op_id, proto::QueryMessage command, rm::CommandCallback done);

    const rm::RmNode& rm() const noexcept { return rm_; }
    const op::OpNode& op_node(const std::string& op_id) const;
    metrics::GeoPoint rm_reference() const noexcept { return reference_; }

    std::vector<metrics::SessionLog> session_logs() const { return logs_.logs(); }
    std::vector<trace::Conservation> conservation() const;

    std::uint64_t messages_sent() const noexcept { return next_msg_ - 1; }
    std::uint64_t messages_lost() const noexcept { return lost_; }
    std::uint64_t messages_corrupted() const noexcept { return corrupted_; }

private:
    struct Operator {
        const OperatorSpec* spec = nullptr;
        std::unique_ptr<op::OpNode> node;
        std::unique_ptr<SyntheticPeb> peb;
        std::unique_ptr<link::LinkModel> access;
        rm::WarningState last_warnings;
    };
    struct InFlight {
        std::uint64_t msg = 0;
        std::size_t op = 0;
        bool up = false;
        Bytes bytes;
        bool corrupt = false;
    };
    struct Command {
        std::string op_id;
        proto::QueryMessage query;
        rm::CommandCallback done;
    };

    std::optional<std::size_t> session_at(std::int64_t t) const;
    void begin_session(std::size_t index);
    void transmit(std::size_t op, bool up, Bytes bytes, proto::QueryKind kind);
    void deliver_due();
    void drain_commands();
    void publish_updates();
    void finish();
    std::vector<link::Hop> hops(std::size_t op, bool up);

    Scenario scenario_;
    ban::SensorConfig config_;
    std::unique_ptr<trace::Writer> trace_;
    Rng rng_;
    metrics::GeoPoint reference_;
    rm::RmNode rm_;
    std::unique_ptr<link::LinkModel> backhaul_;
    std::vector<Operator> ops_;
    std::map<std::pair<std::int64_t, std::uint64_t>, InFlight> in_flight_;
    trace::LogBuilder logs_;
    UpdateListener listener_;
    std::mutex commands_mu_;
    std::vector<Command> commands_;
    std::int64_t now_ = 0;
    std::int64_t end_ = 0;
    std::optional<std::size_t> session_;
    std::uint64_t next_msg_ = 1;
    std::uint64_t lost_ = 0;
    std::uint64_t corrupted_ = 0;
    bool finished_ = false;
};

struct RunResult {
    std::vector<metrics::SessionLog> logs;
    std::vector<metrics::SessionMetrics> metrics;
    std::vector<trace::Conservation> conservation;
};

/// Runs the whole scenario. With an output directory, writes trace.jsonl,
/// summary.csv, distance_bins.csv and sessions/<name>.csv there.
RunResult run_scenario(const Scenario& scenario, const std::string& out_dir = "");

/// Metrics for each log and the CSV files in `out_dir`.
std::vector<metrics::SessionMetrics> write_results(const std::string& out_dir,
                                                   std::span<const metrics::SessionLog> logs, double bin_m);

}  // namespace lrs::harness
