#include "lrs/rm_node.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrs/wire.hpp"

namespace lrs::rm {

using proto::QueryKind;
using proto::ReplyKind;

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::connected: return "CONNECTED";
        case Phase::probing: return "PROBING";
        case Phase::disconnected: return "DISCONNECTED";
    }
    return "?";
}

std::string_view to_string(Code c) {
    switch (c) {
        case Code::ok: return "OK";
        case Code::low: return "LOW";
        case Code::high: return "HIGH";
        case Code::stale: return "STALE";
    }
    return "?";
}

std::string_view to_string(Flag f) { return f == Flag::ok ? "OK" : "WARN"; }

std::string_view to_string(IconColor c) {
    switch (c) {
        case IconColor::grey: return "GREY";
        case IconColor::green: return "GREEN";
        case IconColor::red: return "RED";
    }
    return "?";
}

Phase parse_phase(std::string_view s) {
    for (auto p : {Phase::connected, Phase::probing, Phase::disconnected})
        if (s == to_string(p)) return p;
    throw ProtocolError("unknown phase '" + std::string(s) + "'");
}

Flag parse_flag(std::string_view s) {
    if (s == "OK") return Flag::ok;
    if (s == "WARN") return Flag::warn;
    throw ProtocolError("unknown flag '" + std::string(s) + "'");
}

IconColor parse_icon_color(std::string_view s) {
    for (auto c : {IconColor::grey, IconColor::green, IconColor::red})
        if (s == to_string(c)) return c;
    throw ProtocolError("unknown icon color '" + std::string(s) + "'");
}

IconColor icon_color(Phase phase, bool gps_available, Flag health, Flag environment, Flag equipment) {
    if (phase == Phase::disconnected || !gps_available) return IconColor::grey;
    if (health == Flag::warn || environment == Flag::warn || equipment == Flag::warn) return IconColor::red;
    return IconColor::green;
}

ThresholdTable ThresholdTable::defaults() {
    namespace s = ban::sensor;
    namespace f = ban::field;
    constexpr double none = std::numeric_limits<double>::lowest();
    ThresholdTable t;
    auto add = [&](std::string name, std::string_view sensor, std::size_t field, Category c, double lo, double hi,
                   std::optional<std::int64_t> window = std::nullopt) {
        t.entries.push_back({std::move(name), std::string(sensor), field, c, lo, hi, window});
    };
    add("heart_rate", s::kElectrodes, f::kHeartRate, Category::health, 40, 180);
    add("breathing_rate", s::kElectrodes, f::kBreathingRate, Category::health, 6, 40);
    add("breathing_rate_piezo", s::kPiezo, 0, Category::health, 6, 40);
    add("body_temp", s::kElectrodes, f::kBodyTemp, Category::health, 35, 39);
    add("heat_flux", s::kHeatFlux, 0, Category::health, -300, 300);
    add("inactivity_acc1", s::kAccel1, 0, Category::health, -0.5, 0.5);
    add("inactivity_acc2", s::kAccel2, 0, Category::health, -0.5, 0.5);
    add("fall", s::kAccel2, f::kFall, Category::health, -0.5, 0.5);
    add("inactivity_motion", s::kMotion, 0, Category::health, -0.5, 0.5);
    add("ext_temp", s::kExtTemp, 0, Category::environment, -40, 60);
    add("co", s::kCO, 0, Category::environment, none, 50, 15 * 60 * 1000);
    add("co2", s::kCO2, 0, Category::environment, none, 5000);
    return t;
}

void ThresholdTable::validate(const ban::SensorConfig& config) const {
    for (const auto& e : entries) {
        if (!(e.low < e.high)) throw ConfigError("threshold '" + e.name + "' needs low < high");
        auto idx = config.index_of(e.sensor_id);
        if (!idx) throw ConfigError("threshold '" + e.name + "' names unknown sensor '" + e.sensor_id + "'");
        if (e.field >= ban::value_capacity(config[*idx]))
            throw ConfigError("threshold '" + e.name + "' reads a field the sensor does not carry");
        if (e.dose_window_ms && *e.dose_window_ms <= 0) throw ConfigError("dose window must be positive");
    }
    if (!(battery_floor >= 0.0 && battery_floor <= 1.0)) throw ConfigError("battery floor must be in [0, 1]");
}

void DoseAccumulator::add(std::int64_t t, double value) {
    std::int64_t dt = last_t_ ? std::clamp<std::int64_t>(t - *last_t_, 0, kMaxStepMs) : 0;
    last_t_ = t;
    parts_.emplace_back(t, std::max(0.0, value) * static_cast<double>(dt));
}

double DoseAccumulator::dose(std::int64_t t, std::int64_t window_ms) {
    while (!parts_.empty() && parts_.front().first <= t - window_ms) parts_.pop_front();
    double sum = 0.0;
    for (const auto& [when, part] : parts_)
        if (when <= t) sum += part;
    return sum;
}

WarningState evaluate_frame(const ban::SensorFrame& frame, const ThresholdTable& thresholds, DoseState& doses,
                            const EvaluationContext& ctx) {
    WarningState w;
    const auto now = frame.device.peb_timestamp;
    for (const auto& e : thresholds.entries) {
        Code code = Code::stale;
        const auto* block = ban::find_block(frame, e.sensor_id);
        if (block && !block->stale) {
            auto values = ban::decode_values(*block);
            if (e.field < values.size()) {
                double v = values[e.field];
                if (e.dose_window_ms) {
                    auto& acc = doses[e.name];
                    acc.add(now, v);
                    code = acc.dose(now, *e.dose_window_ms) >= e.high * static_cast<double>(*e.dose_window_ms)
                               ? Code::high
                               : Code::ok;
                } else {
                    code = v < e.low ? Code::low : v > e.high ? Code::high : Code::ok;
                }
            }
        }
        w.codes[e.name] = code;
        if (code == Code::low || code == Code::high) (e.category == Category::health ? w.health : w.environment) = Flag::warn;
    }
    bool low_battery = frame.device.battery_fraction < thresholds.battery_floor;
    bool degraded = (frame.device.status_code & ban::kStatusEquipmentDegraded) != 0;
    if (low_battery || degraded || ctx.phase != Phase::connected) w.equipment = Flag::warn;
    w.icon = icon_color(ctx.phase, ctx.gps_available, w.health, w.environment, w.equipment);
    return w;
}

namespace {

void note_flags(OperatorRecord& r, std::int64_t time, const WarningState& before) {
    const auto& w = r.warnings;
    if (r.flag_events.empty() || w.health != before.health || w.environment != before.environment ||
        w.equipment != before.equipment || w.icon != before.icon)
        r.flag_events.push_back({time, r.last_seq, w.health, w.environment, w.equipment, w.icon});
}

void refresh_equipment(OperatorRecord& r, const ThresholdTable& thresholds) {
    bool low_battery = r.battery && *r.battery < thresholds.battery_floor;
    bool degraded = (r.status_code & ban::kStatusEquipmentDegraded) != 0;
    r.warnings.equipment = (low_battery || degraded || r.phase != Phase::connected) ? Flag::warn : Flag::ok;
    r.warnings.icon = icon_color(r.phase, r.gps_available, r.warnings.health, r.warnings.environment,
                                 r.warnings.equipment);
}

}  // namespace

OperatorRecord initial_record(const std::string& op_id, const ThresholdTable& thresholds) {
    OperatorRecord r;
    r.op_id = op_id;
    refresh_equipment(r, thresholds);
    return r;
}

const std::string& op_of(const RecordUpdate& u) {
    return std::visit([](const auto& v) -> const std::string& { return v.op_id; }, u);
}

std::int64_t time_of(const RecordUpdate& u) {
    return std::visit([](const auto& v) { return v.time; }, u);
}

void apply(OperatorRecord& r, const RecordUpdate& update, const ban::SensorConfig& config,
           const ThresholdTable& thresholds) {
    struct Visitor {
        OperatorRecord& r;
        const ban::SensorConfig& config;
        const ThresholdTable& thresholds;

        void operator()(const SampleAccepted& s) {
            if (s.seq <= r.last_seq)
                throw ProtocolError("sample " + std::to_string(s.seq) + " is not after " + std::to_string(r.last_seq));
            auto frame = ban::deserialize(s.frame, config);
            auto delay = s.receive_time - s.peb_timestamp;
            if (!r.min_delay || delay < *r.min_delay) r.min_delay = delay;
            r.battery = frame.device.battery_fraction;
            r.status_code = frame.device.status_code;
            if (const auto* gps = ban::find_block(frame, ban::sensor::kGps)) {
                auto v = ban::decode_values(*gps);
                r.gps_available = !gps->stale && v.size() > ban::field::kSatellites && v[ban::field::kSatellites] > 0;
                if (r.gps_available) r.position = metrics::GeoPoint{v[ban::field::kLat], v[ban::field::kLon]};
            }
            auto before = r.warnings;
            r.warnings = evaluate_frame(frame, thresholds, r.doses, {r.phase, r.gps_available});
            r.last_seq = s.seq;
            r.history.push_back(
                {s.seq, s.peb_timestamp, s.receive_time, delay - *r.min_delay <= metrics::kRealtimeLimitMs, s.frame});
            r.latest_frame = std::move(frame);
            note_flags(r, s.time, before);
        }
        void operator()(const GapRecorded& g) {
            r.losses.push_back({g.first_lost, g.last_lost, g.time});
            r.last_seq = std::max(r.last_seq, g.last_lost);
        }
        void operator()(const PhaseChanged& p) {
            auto before = r.warnings;
            r.phase = p.phase;
            refresh_equipment(r, thresholds);
            note_flags(r, p.time, before);
        }
        void operator()(const ParityFailed&) { ++r.parity_failures; }
        void operator()(const ProtocolViolation&) { ++r.protocol_violations; }
    };
    std::visit(Visitor{r, config, thresholds}, update);
}

bool sample_valid(const proto::StoredSample& s, const ban::SensorConfig& config) {
    if (!ban::check_parity(s.frame)) return false;
    try {
        return ban::deserialize(s.frame, config).device.peb_timestamp == s.peb_timestamp;
    } catch (const ProtocolError&) {
        return false;
    }
}

RmNode::RmNode(ban::SensorConfig config, ThresholdTable thresholds, RmSettings settings)
    : config_(std::move(config)), thresholds_(std::move(thresholds)), settings_(settings) {
    thresholds_.validate(config_);
    if (settings_.timeout_threshold < 1) throw ConfigError("timeout threshold must be at least 1");
    if (settings_.poll_period_ms <= 0 || settings_.reply_timeout_ms <= 0 || settings_.reconnect_interval_ms <= 0)
        throw ConfigError("poll, timeout and reconnect intervals must be positive");
}

void RmNode::add_operator(const std::string& op_id) {
    if (links_.contains(op_id)) throw ConfigError("operator '" + op_id + "' already registered");
    if (links_.size() >= settings_.max_operators)
        throw ConfigError("operator limit of " + std::to_string(settings_.max_operators) + " reached");
    Link l;
    l.state.op_id = op_id;
    l.record = initial_record(op_id, thresholds_);
    links_.emplace(op_id, std::move(l));
    order_.push_back(op_id);
}

std::vector<std::string> RmNode::operators() const { return order_; }

RmNode::Link& RmNode::link(const std::string& op_id) {
    auto it = links_.find(op_id);
    if (it == links_.end()) throw NotFoundError("unknown operator '" + op_id + "'");
    return it->second;
}

const RmNode::Link& RmNode::link(const std::string& op_id) const {
    auto it = links_.find(op_id);
    if (it == links_.end()) throw NotFoundError("unknown operator '" + op_id + "'");
    return it->second;
}

const OperatorRecord& RmNode::record(const std::string& op_id) const { return link(op_id).record; }
const ConnectionState& RmNode::connection(const std::string& op_id) const { return link(op_id).state; }

void RmNode::emit(Link& l, RecordUpdate u) {
    apply(l.record, u, config_, thresholds_);
    l.state.last_seq_received = l.record.last_seq;
    if (l.record.min_delay) l.state.measured_offset_ms = static_cast<double>(*l.record.min_delay);
    updates_.push_back(std::move(u));
}

std::vector<RecordUpdate> RmNode::drain_updates() { return std::exchange(updates_, {}); }

void RmNode::set_phase(Link& l, Phase p, std::int64_t now) {
    if (l.state.phase == p) return;
    l.state.phase = p;
    emit(l, PhaseChanged{l.state.op_id, now, p});
}

Outgoing RmNode::send(Link& l, proto::QueryMessage q, std::int64_t now, std::optional<Pending> command) {
    q.request_id = l.next_request_id++;
    l.outstanding = Outstanding{q.request_id, q.kind, now, std::move(command)};
    return {l.state.op_id, q.kind, wire::encode(q)};
}

std::vector<Outgoing> RmNode::tick(std::int64_t now) {
    std::vector<Outgoing> out;
    for (const auto& id : order_) {
        auto& l = links_.at(id);
        if (l.outstanding && now >= l.outstanding->sent_at + settings_.reply_timeout_ms) on_timeout(l, now);
        if (l.outstanding) continue;
        if (l.state.phase == Phase::disconnected) {
            if (now >= l.next_ping_at) {
                out.push_back(send(l, proto::QueryMessage::ping(0), now, std::nullopt));
                l.next_ping_at = now + settings_.reconnect_interval_ms;
            }
        } else if (!l.commands.empty()) {
            auto cmd = std::move(l.commands.front());
            l.commands.pop_front();
            auto q = cmd.query;
            out.push_back(send(l, std::move(q), now, std::move(cmd)));
        } else if (now >= l.next_poll_at) {
            out.push_back(send(l, proto::QueryMessage::get_data(0, l.state.last_seq_received), now, std::nullopt));
        }
    }
    return out;
}

std::optional<std::int64_t> RmNode::next_wakeup() const {
    std::optional<std::int64_t> best;
    auto consider = [&](std::int64_t t) {
        if (!best || t < *best) best = t;
    };
    for (const auto& [id, l] : links_) {
        if (l.outstanding)
            consider(l.outstanding->sent_at + settings_.reply_timeout_ms);
        else if (l.state.phase == Phase::disconnected)
            consider(l.next_ping_at);
        else if (!l.commands.empty())
            consider(std::numeric_limits<std::int64_t>::min());
        else
            consider(l.next_poll_at);
    }
    return best;
}

void RmNode::fail_commands(Link& l, const std::string& reason) {
    while (!l.commands.empty()) {
        auto cmd = std::move(l.commands.front());
        l.commands.pop_front();
        if (cmd.done) cmd.done({false, "operator " + l.state.op_id + " is disconnected", reason});
    }
}

void RmNode::on_timeout(Link& l, std::int64_t now) {
    auto timed_out = std::move(*l.outstanding);
    l.outstanding.reset();
    if (timed_out.command && timed_out.command->done)
        timed_out.command->done({false, "no reply within " + std::to_string(settings_.reply_timeout_ms) + " ms", "timeout"});
    ++l.state.consecutive_timeouts;
    if (l.state.phase == Phase::disconnected) return;
    if (l.state.consecutive_timeouts >= settings_.timeout_threshold) {
        set_phase(l, Phase::disconnected, now);
        fail_commands(l, "unavailable");
        l.next_ping_at = now;
    } else {
        set_phase(l, Phase::probing, now);
        l.next_poll_at = now;
    }
}

void RmNode::submit_command(const std::string& op_id, proto::QueryMessage command, CommandCallback done) {
    auto& l = link(op_id);
    if (command.kind != QueryKind::set_period && command.kind != QueryKind::set_filter)
        throw ValidationError("only SET_PERIOD and SET_FILTER can be forwarded");
    if (l.state.phase == Phase::disconnected) throw UnavailableError("operator '" + op_id + "' is disconnected");
    l.commands.push_back({std::move(command), std::move(done)});
}

ReplyOutcome RmNode::deliver(const std::string& op_id, std::span<const std::uint8_t> bytes, std::int64_t now) {
    auto& l = link(op_id);
    ReplyOutcome outcome;
    proto::ReplyMessage reply;
    try {
        reply = wire::decode_reply(bytes);
    } catch (const ProtocolError& e) {
        emit(l, ProtocolViolation{op_id, now, e.what()});
        outcome.protocol_violation = true;
        return outcome;
    }
    if (!l.outstanding || l.outstanding->request_id != reply.request_id) return outcome;
    auto request = std::move(*l.outstanding);
    l.outstanding.reset();
    outcome.matched = true;
    l.state.consecutive_timeouts = 0;
    l.state.last_reply_time = now;
    set_phase(l, Phase::connected, now);

    auto expected_kind = [&] {
        switch (request.kind) {
            case QueryKind::get_data: return ReplyKind::data;
            case QueryKind::set_period: return ReplyKind::period_ack;
            case QueryKind::set_filter: return ReplyKind::filter_ack;
            case QueryKind::ping: return ReplyKind::pong;
        }
        return ReplyKind::error;
    }();

    if (reply.kind == ReplyKind::error) {
        if (request.command && request.command->done) request.command->done({false, reply.error_text, "rejected"});
        l.next_poll_at = std::max(now, request.sent_at + settings_.poll_period_ms);
        return outcome;
    }
    if (reply.kind != expected_kind) {
        emit(l, ProtocolViolation{op_id, now, "reply kind does not match the request"});
        outcome.protocol_violation = true;
        if (request.command && request.command->done) request.command->done({false, "protocol violation", "rejected"});
        return outcome;
    }
    switch (reply.kind) {
        case ReplyKind::data: {
            auto o = on_data(l, reply, now);
            o.matched = true;
            bool full = reply.samples.size() == proto::kMaxBatch;
            l.next_poll_at = settings_.catch_up && full ? now : std::max(now, request.sent_at + settings_.poll_period_ms);
            return o;
        }
        case ReplyKind::pong: l.next_poll_at = now; break;
        case ReplyKind::period_ack:
        case ReplyKind::filter_ack:
            if (request.command && request.command->done)
                request.command->done(reply.ack ? CommandResult{true, "", ""} : CommandResult{false, "not acknowledged", "rejected"});
            break;
        default: break;
    }
    return outcome;
}

void RmNode::append(Link& l, std::uint64_t seq, std::int64_t peb_ts, std::int64_t receive_time, Bytes frame,
                    std::int64_t now) {
    emit(l, SampleAccepted{l.state.op_id, now, seq, peb_ts, receive_time, std::move(frame)});
}

ReplyOutcome RmNode::on_data(Link& l, const proto::ReplyMessage& reply, std::int64_t now) {
    ReplyOutcome outcome;
    const auto& op_id = l.state.op_id;
    const std::int64_t receive_time = settings_.clock_base_ms + now;
    std::uint64_t expect = l.state.last_seq_received + 1;

    if (reply.gap) {
        const auto& g = *reply.gap;
        if (g.requested_after != l.state.last_seq_received || reply.samples.empty() ||
            reply.samples.front().seq != g.oldest_available || g.oldest_available <= expect) {
            emit(l, ProtocolViolation{op_id, now, "inconsistent gap notice"});
            outcome.protocol_violation = true;
            return outcome;
        }
        emit(l, GapRecorded{op_id, now, expect, g.oldest_available - 1});
        l.stash.erase(l.stash.begin(), l.stash.lower_bound(g.oldest_available));
        expect = g.oldest_available;
    }

    for (std::size_t i = 0; i < reply.samples.size(); ++i) {
        const auto& s = reply.samples[i];
        if (s.seq != expect + i) {
            emit(l, ProtocolViolation{op_id, now, "non-contiguous seq " + std::to_string(s.seq)});
            outcome.protocol_violation = true;
            break;
        }
        if (!sample_valid(s, config_)) {
            ++outcome.parity_failures;
            emit(l, ParityFailed{op_id, now, s.seq});
            continue;
        }
        ++outcome.accepted;
        if (s.seq <= l.state.last_seq_received) continue;
        if (s.seq == l.state.last_seq_received + 1) {
            append(l, s.seq, s.peb_timestamp, receive_time, s.frame, now);
            ++outcome.appended;
            while (!l.stash.empty() && l.stash.begin()->first == l.state.last_seq_received + 1) {
                auto node = l.stash.extract(l.stash.begin());
                append(l, node.key(), node.mapped().peb_timestamp, node.mapped().receive_time,
                       std::move(node.mapped().frame), now);
                ++outcome.appended;
            }
        } else {
            l.stash.try_emplace(s.seq, Stashed{s.peb_timestamp, receive_time, s.frame});
        }
    }
    return outcome;
}

}  // namespace lrs::rm
