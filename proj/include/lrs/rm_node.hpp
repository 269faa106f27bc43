#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lrs/ban.hpp"
#include "lrs/metrics.hpp"
#include "lrs/protocol.hpp"

// Remote monitoring post: polls operator nodes, recovers from disconnections
// and turns the received frames into per-sensor warning codes, three global
// flags and an icon color per operator.
namespace lrs::rm {

enum class Phase { connected, probing, disconnected };
enum class Code { ok, low, high, stale };
enum class Flag { ok, warn };
enum class IconColor { grey, green, red };
enum class Category { health, environment };

std::string_view to_string(Phase p);
std::string_view to_string(Code c);
std::string_view to_string(Flag f);
std::string_view to_string(IconColor c);
Phase parse_phase(std::string_view s);
Flag parse_flag(std::string_view s);
IconColor parse_icon_color(std::string_view s);

/// GREY when disconnected or without GPS, RED when any global flag warns,
/// GREEN otherwise.
IconColor icon_color(Phase phase, bool gps_available, Flag health, Flag environment, Flag equipment);

struct ThresholdEntry {
    std::string name;
    std::string sensor_id;
    std::size_t field = 0;
    Category category = Category::health;
    double low = 0.0;
    double high = 0.0;
    /// When set, HIGH means the integral of the value over this trailing
    /// window reached high * window (a dose), not a single reading above high.
    std::optional<std::int64_t> dose_window_ms;
};

/// Placeholder bounds, not clinical values.
struct ThresholdTable {
    std::vector<ThresholdEntry> entries;
    double battery_floor = 0.15;

    static ThresholdTable defaults();
    /// Throws ConfigError unless low < high everywhere and sensors exist in `config`.
    void validate(const ban::SensorConfig& config) const;
};

/// Windowed integral of one sensor value over PEB time.
class DoseAccumulator {
public:
    /// Max credited gap between consecutive readings.
    static constexpr std::int64_t kMaxStepMs = 5000;

    void add(std::int64_t t, double value);
    /// Integral (value x ms) over (t - window, t].
    double dose(std::int64_t t, std::int64_t window_ms);

    bool operator==(const DoseAccumulator&) const = default;

private:
    std::deque<std::pair<std::int64_t, double>> parts_;
    std::optional<std::int64_t> last_t_;
};

using DoseState = std::map<std::string, DoseAccumulator>;

struct WarningState {
    std::map<std::string, Code> codes;
    Flag health = Flag::ok;
    Flag environment = Flag::ok;
    Flag equipment = Flag::ok;
    IconColor icon = IconColor::grey;

    bool operator==(const WarningState&) const = default;
};

/// Inputs beyond the frame that the flags depend on.
struct EvaluationContext {
    Phase phase = Phase::connected;
    bool gps_available = false;
};

/// Compares every threshold entry against `frame`, updating `doses`.
/// Equipment warns on low battery, degraded equipment status or a link
/// that is not fully connected.
WarningState evaluate_frame(const ban::SensorFrame& frame, const ThresholdTable& thresholds, DoseState& doses,
                            const EvaluationContext& ctx);

struct HistoryEntry {
    std::uint64_t seq = 0;
    std::int64_t peb_timestamp = 0;
    std::int64_t receive_time = 0;
    /// Against the smallest delay seen so far; the session figure is in metrics.
    bool realtime = false;
    Bytes frame;

    bool operator==(const HistoryEntry&) const = default;
};

struct PermanentLoss {
    std::uint64_t first = 0;
    std::uint64_t last = 0;
    std::int64_t detected_at = 0;

    bool operator==(const PermanentLoss&) const = default;
};

struct FlagEvent {
    std::int64_t time = 0;
    std::uint64_t seq = 0;
    Flag health = Flag::ok;
    Flag environment = Flag::ok;
    Flag equipment = Flag::ok;
    IconColor icon = IconColor::grey;

    bool operator==(const FlagEvent&) const = default;
};

struct OperatorRecord {
    std::string op_id;
    std::optional<metrics::GeoPoint> position;
    bool gps_available = false;
    std::vector<HistoryEntry> history;
    WarningState warnings;
    std::optional<double> battery;
    std::uint16_t status_code = 0;
    Phase phase = Phase::connected;
    std::uint64_t last_seq = 0;
    std::uint64_t parity_failures = 0;
    std::uint64_t protocol_violations = 0;
    std::vector<PermanentLoss> losses;
    std::vector<FlagEvent> flag_events;
    DoseState doses;
    std::optional<std::int64_t> min_delay;
    std::optional<ban::SensorFrame> latest_frame;

    bool operator==(const OperatorRecord&) const = default;
};

// Record mutations. The live node and trace replay both go through apply(),
// so a replayed trace rebuilds the same records.
struct SampleAccepted {
    std::string op_id;
    std::int64_t time = 0;
    std::uint64_t seq = 0;
    std::int64_t peb_timestamp = 0;
    std::int64_t receive_time = 0;
    Bytes frame;
};
struct GapRecorded {
    std::string op_id;
    std::int64_t time = 0;
    std::uint64_t first_lost = 0;
    std::uint64_t last_lost = 0;
};
struct PhaseChanged {
    std::string op_id;
    std::int64_t time = 0;
    Phase phase = Phase::connected;
};
struct ParityFailed {
    std::string op_id;
    std::int64_t time = 0;
    std::uint64_t seq = 0;
};
struct ProtocolViolation {
    std::string op_id;
    std::int64_t time = 0;
    std::string detail;
};

using RecordUpdate = std::variant<SampleAccepted, GapRecorded, PhaseChanged, ParityFailed, ProtocolViolation>;

const std::string& op_of(const RecordUpdate& u);
std::int64_t time_of(const RecordUpdate& u);

/// Record of a freshly registered operator.
OperatorRecord initial_record(const std::string& op_id, const ThresholdTable& thresholds);

void apply(OperatorRecord& record, const RecordUpdate& update, const ban::SensorConfig& config,
           const ThresholdTable& thresholds);

struct ConnectionState {
    std::string op_id;
    Phase phase = Phase::connected;
    std::uint64_t last_seq_received = 0;
    int consecutive_timeouts = 0;
    std::optional<std::int64_t> last_reply_time;
    std::optional<double> measured_offset_ms;
};

struct RmSettings {
    std::size_t max_operators = 3;
    std::int64_t poll_period_ms = 1000;
    std::int64_t reply_timeout_ms = 2000;
    int timeout_threshold = 3;
    std::int64_t reconnect_interval_ms = 2000;
    /// RM wall clock = simulation time + this (ms since midnight).
    std::int64_t clock_base_ms = 0;
    /// Re-poll right away when a reply carried a full batch.
    bool catch_up = true;

    bool operator==(const RmSettings&) const = default;
};

struct CommandResult {
    bool ok = false;
    std::string error;
    /// "unavailable", "timeout", "rejected"
    std::string reason;
};

using CommandCallback = std::function<void(const CommandResult&)>;

struct Outgoing {
    std::string op_id;
    proto::QueryKind kind = proto::QueryKind::ping;
    Bytes message;
};

/// Outcome of one reply.
struct ReplyOutcome {
    bool matched = false;
    /// Valid samples in the reply (appended or held for reordering).
    std::size_t accepted = 0;
    std::size_t appended = 0;
    std::size_t parity_failures = 0;
    bool protocol_violation = false;
};

class RmNode {
public:
    RmNode(ban::SensorConfig config, ThresholdTable thresholds = ThresholdTable::defaults(), RmSettings settings = {});

    void add_operator(const std::string& op_id);
    std::vector<std::string> operators() const;

    /// Handles timeouts, then emits at most one request per idle operator.
    std::vector<Outgoing> tick(std::int64_t now);

    ReplyOutcome deliver(const std::string& op_id, std::span<const std::uint8_t> reply, std::int64_t now);

    /// Queues SET_PERIOD / SET_FILTER ahead of the next poll. Throws
    /// NotFoundError for an unknown operator and UnavailableError while disconnected.
    void submit_command(const std::string& op_id, proto::QueryMessage command, CommandCallback done);

    const OperatorRecord& record(const std::string& op_id) const;
    const ConnectionState& connection(const std::string& op_id) const;
    const RmSettings& settings() const noexcept { return settings_; }
    const ban::SensorConfig& config() const noexcept { return config_; }
    const ThresholdTable& thresholds() const noexcept { return thresholds_; }

    /// Next time tick() has anything to do for any operator.
    std::optional<std::int64_t> next_wakeup() const;

    /// Record updates since the last drain, in the order they were applied.
    std::vector<RecordUpdate> drain_updates();

private:
    struct Pending {
        proto::QueryMessage query;
        CommandCallback done;
    };
    struct Outstanding {
        std::uint32_t request_id = 0;
        proto::QueryKind kind = proto::QueryKind::ping;
        std::int64_t sent_at = 0;
        std::optional<Pending> command;
    };
    struct Stashed {
        std::int64_t peb_timestamp = 0;
        std::int64_t receive_time = 0;
        Bytes frame;
    };
    struct Link {
        ConnectionState state;
        OperatorRecord record;
        std::optional<Outstanding> outstanding;
        std::int64_t next_poll_at = 0;
        std::int64_t next_ping_at = 0;
        std::uint32_t next_request_id = 1;
        std::deque<Pending> commands;
        std::map<std::uint64_t, Stashed> stash;
    };

    Link& link(const std::string& op_id);
    const Link& link(const std::string& op_id) const;
    void emit(Link& l, RecordUpdate u);
    void set_phase(Link& l, Phase p, std::int64_t now);
    void on_timeout(Link& l, std::int64_t now);
    void fail_commands(Link& l, const std::string& reason);
    ReplyOutcome on_data(Link& l, const proto::ReplyMessage& reply, std::int64_t now);
    void append(Link& l, std::uint64_t seq, std::int64_t peb_ts, std::int64_t receive_time, Bytes frame,
                std::int64_t now);
    Outgoing send(Link& l, proto::QueryMessage q, std::int64_t now, std::optional<Pending> command);

    ban::SensorConfig config_;
    ThresholdTable thresholds_;
    RmSettings settings_;
    std::vector<std::string> order_;
    std::map<std::string, Link> links_;
    std::vector<RecordUpdate> updates_;
};

/// Validates the samples of a data reply the way the node does: contiguity
/// from `last_seq` (or the gap notice), parity, and matching PEB timestamp.
bool sample_valid(const proto::StoredSample& s, const ban::SensorConfig& config);

}  // namespace lrs::rm
