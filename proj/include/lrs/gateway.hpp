#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrs/rm_node.hpp"

namespace httplib {
class Server;
}

// Read side of the monitoring post for the console: a mirror of the
// operator records fed with the same record updates the node applies, served
// over HTTP with a server-sent event stream. Live simulation and trace replay
// both feed it through apply_batch(), so they answer identically.
namespace lrs::gateway {

inline constexpr const char* kSchema = "lrs.gateway/v1";

struct Event {
    std::uint64_t id = 0;
    std::int64_t time = 0;
    nlohmann::json payload;
};

/// Blocking command forwarder installed by live mode.
using CommandSink = std::function<rm::CommandResult(const std::string& op_id, proto::QueryMessage command)>;

class GatewayState {
public:
    GatewayState(ban::SensorConfig config, rm::ThresholdTable thresholds, std::string mode);

    void register_operator(const std::string& op_id);

    /// Applies updates sharing one simulation instant; one event per
    /// operator whose summary changed.
    void apply_batch(std::span<const rm::RecordUpdate> updates);

    nlohmann::json operators_json() const;
    /// Throws NotFoundError.
    nlohmann::json operator_json(const std::string& op_id) const;
    nlohmann::json history_json(const std::string& op_id, std::uint64_t after_seq, std::size_t limit = 500) const;
    rm::OperatorRecord snapshot(const std::string& op_id) const;

    /// Events with id > after; waits up to `wait` for one to show up.
    std::vector<Event> events_after(std::uint64_t after, std::chrono::milliseconds wait) const;
    std::uint64_t last_event_id() const;

    void set_command_sink(CommandSink sink);
    /// NotFoundError for unknown ids; UnavailableError when disconnected or
    /// when no sink is installed (replay).
    rm::CommandResult command(const std::string& op_id, proto::QueryMessage command);

    void close();
    bool closed() const;
    const std::string& mode() const noexcept { return mode_; }

private:
    nlohmann::json summary_locked(const rm::OperatorRecord& r) const;
    const rm::OperatorRecord& find_locked(const std::string& op_id) const;

    const ban::SensorConfig config_;
    const rm::ThresholdTable thresholds_;
    const std::string mode_;
    mutable std::mutex mu_;
    mutable std::condition_variable changed_;
    std::vector<std::string> order_;
    std::map<std::string, rm::OperatorRecord> records_;
    std::map<std::string, nlohmann::json> last_summary_;
    std::deque<Event> events_;
    std::uint64_t next_event_id_ = 1;
    CommandSink sink_;
    bool closed_ = false;
};

nlohmann::json summary_json(const rm::OperatorRecord& r);
nlohmann::json detail_json(const rm::OperatorRecord& r, const ban::SensorConfig& config);

class GatewayServer {
public:
    explicit GatewayServer(GatewayState& state);
    ~GatewayServer();
    GatewayServer(const GatewayServer&) = delete;
    GatewayServer& operator=(const GatewayServer&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port.
    int start(const std::string& host, int port);
    void stop();

private:
    GatewayState& state_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace lrs::gateway
