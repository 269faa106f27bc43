#include "lrs/gateway.hpp"

#include <httplib.h>

#include <algorithm>

namespace lrs::gateway {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxEvents = 20000;

json flags_json(const rm::WarningState& w) {
    return {{"health", rm::to_string(w.health)},
            {"environment", rm::to_string(w.environment)},
            {"equipment", rm::to_string(w.equipment)}};
}

json position_json(const rm::OperatorRecord& r) {
    if (!r.position) return nullptr;
    return {{"lat", r.position->lat}, {"lon", r.position->lon}};
}

json error_json(const std::string& kind, const std::string& message) {
    return {{"schema", kSchema}, {"error", kind}, {"message", message}};
}

}  // namespace

json summary_json(const rm::OperatorRecord& r) {
    std::uint64_t lost = 0;
    for (const auto& l : r.losses) lost += l.last - l.first + 1;
    return {
        {"op_id", r.op_id},
        {"icon_color", rm::to_string(r.warnings.icon)},
        {"phase", rm::to_string(r.phase)},
        {"flags", flags_json(r.warnings)},
        {"position", position_json(r)},
        {"gps_available", r.gps_available},
        {"battery", r.battery ? json(*r.battery) : json(nullptr)},
        {"last_seq", r.last_seq},
        {"received", r.history.size()},
        {"parity_failures", r.parity_failures},
        {"protocol_violations", r.protocol_violations},
        {"permanently_lost", lost},
    };
}

json detail_json(const rm::OperatorRecord& r, const ban::SensorConfig& config) {
    json j = summary_json(r);
    json codes = json::object();
    for (const auto& [name, code] : r.warnings.codes) codes[name] = rm::to_string(code);
    j["codes"] = codes;
    json losses = json::array();
    for (const auto& l : r.losses) losses.push_back({{"first", l.first}, {"last", l.last}, {"detected_at", l.detected_at}});
    j["losses"] = losses;
    json events = json::array();
    for (const auto& e : r.flag_events)
        events.push_back({{"time", e.time},
                          {"seq", e.seq},
                          {"health", rm::to_string(e.health)},
                          {"environment", rm::to_string(e.environment)},
                          {"equipment", rm::to_string(e.equipment)},
                          {"icon_color", rm::to_string(e.icon)}});
    j["flag_events"] = events;
    if (r.latest_frame && !r.history.empty()) {
        const auto& f = *r.latest_frame;
        const auto& h = r.history.back();
        json sensors = json::object();
        for (const auto& d : config.rows()) {
            if (d.sensor_id == config.peb().sensor_id) continue;
            const auto* b = ban::find_block(f, d.sensor_id);
            if (!b)
                sensors[d.sensor_id] = {{"present", false}, {"stale", true}, {"values", json::array()}};
            else
                sensors[d.sensor_id] = {{"present", true}, {"stale", b->stale}, {"values", ban::decode_values(*b)}};
        }
        j["latest"] = {{"seq", h.seq},
                       {"peb_timestamp", h.peb_timestamp},
                       {"receive_time", h.receive_time},
                       {"realtime", h.realtime},
                       {"device",
                        {{"device_id", f.device.device_id},
                         {"battery", f.device.battery_fraction},
                         {"status_code", f.device.status_code},
                         {"peb_timestamp", f.device.peb_timestamp}}},
                       {"sensors", sensors}};
    } else {
        j["latest"] = nullptr;
    }
    return j;
}

GatewayState::GatewayState(ban::SensorConfig config, rm::ThresholdTable thresholds, std::string mode)
    : config_(std::move(config)), thresholds_(std::move(thresholds)), mode_(std::move(mode)) {}

void GatewayState::register_operator(const std::string& op_id) {
    std::lock_guard lock(mu_);
    if (records_.contains(op_id)) return;
    records_.emplace(op_id, rm::initial_record(op_id, thresholds_));
    order_.push_back(op_id);
}

void GatewayState::apply_batch(std::span<const rm::RecordUpdate> updates) {
    if (updates.empty()) return;
    std::lock_guard lock(mu_);
    std::vector<std::string> touched;
    std::int64_t time = 0;
    for (const auto& u : updates) {
        const auto& id = rm::op_of(u);
        auto it = records_.find(id);
        if (it == records_.end()) throw NotFoundError("update for unregistered operator '" + id + "'");
        rm::apply(it->second, u, config_, thresholds_);
        time = std::max(time, rm::time_of(u));
        if (std::find(touched.begin(), touched.end(), id) == touched.end()) touched.push_back(id);
    }
    for (const auto& id : touched) {
        auto summary = summary_locked(records_.at(id));
        auto& last = last_summary_[id];
        if (summary == last) continue;
        last = summary;
        events_.push_back({next_event_id_++, time, {{"schema", kSchema}, {"time", time}, {"operator", summary}}});
        if (events_.size() > kMaxEvents) events_.pop_front();
    }
    changed_.notify_all();
}

json GatewayState::summary_locked(const rm::OperatorRecord& r) const { return summary_json(r); }

const rm::OperatorRecord& GatewayState::find_locked(const std::string& op_id) const {
    auto it = records_.find(op_id);
    if (it == records_.end()) throw NotFoundError("unknown operator '" + op_id + "'");
    return it->second;
}

json GatewayState::operators_json() const {
    std::lock_guard lock(mu_);
    json list = json::array();
    for (const auto& id : order_) list.push_back(summary_locked(records_.at(id)));
    return {{"schema", kSchema}, {"operators", list}};
}

json GatewayState::operator_json(const std::string& op_id) const {
    std::lock_guard lock(mu_);
    json j = detail_json(find_locked(op_id), config_);
    j["schema"] = kSchema;
    return j;
}

json GatewayState::history_json(const std::string& op_id, std::uint64_t after_seq, std::size_t limit) const {
    std::lock_guard lock(mu_);
    const auto& r = find_locked(op_id);
    auto it = std::upper_bound(r.history.begin(), r.history.end(), after_seq,
                               [](std::uint64_t s, const rm::HistoryEntry& h) { return s < h.seq; });
    json samples = json::array();
    for (; it != r.history.end() && samples.size() < limit; ++it)
        samples.push_back({{"seq", it->seq},
                           {"peb_timestamp", it->peb_timestamp},
                           {"receive_time", it->receive_time},
                           {"realtime", it->realtime},
                           {"frame", to_hex(it->frame)}});
    return {{"schema", kSchema}, {"op_id", op_id}, {"after_seq", after_seq}, {"samples", samples}};
}

rm::OperatorRecord GatewayState::snapshot(const std::string& op_id) const {
    std::lock_guard lock(mu_);
    return find_locked(op_id);
}

std::vector<Event> GatewayState::events_after(std::uint64_t after, std::chrono::milliseconds wait) const {
    std::unique_lock lock(mu_);
    changed_.wait_for(lock, wait, [&] { return closed_ || (!events_.empty() && events_.back().id > after); });
    std::vector<Event> out;
    for (const auto& e : events_)
        if (e.id > after) out.push_back(e);
    return out;
}

std::uint64_t GatewayState::last_event_id() const {
    std::lock_guard lock(mu_);
    return next_event_id_ - 1;
}

void GatewayState::set_command_sink(CommandSink sink) {
    std::lock_guard lock(mu_);
    sink_ = std::move(sink);
}

rm::CommandResult GatewayState::command(const std::string& op_id, proto::QueryMessage command) {
    CommandSink sink;
    {
        std::lock_guard lock(mu_);
        const auto& r = find_locked(op_id);
        if (!sink_) throw UnavailableError("commands are not available in " + mode_ + " mode");
        if (r.phase == rm::Phase::disconnected) throw UnavailableError("operator '" + op_id + "' is disconnected");
        sink = sink_;
    }
    return sink(op_id, std::move(command));
}

void GatewayState::close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    changed_.notify_all();
}

bool GatewayState::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

GatewayServer::GatewayServer(GatewayState& state) : state_(state), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;
    auto send_json = [](httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    };
    // Maps the library's error types onto HTTP statuses.
    auto guarded = [send_json](auto handler) {
        return [handler, send_json](const httplib::Request& req, httplib::Response& res) {
            try {
                handler(req, res);
            } catch (const NotFoundError& e) {
                send_json(res, 404, error_json("not_found", e.what()));
            } catch (const UnavailableError& e) {
                send_json(res, 503, error_json("unavailable", e.what()));
            } catch (const ValidationError& e) {
                send_json(res, 400, error_json("validation", e.what()));
            } catch (const json::exception& e) {
                send_json(res, 400, error_json("bad_request", e.what()));
            } catch (const std::invalid_argument& e) {
                send_json(res, 400, error_json("bad_request", e.what()));
            }
        };
    };
    auto command_reply = [send_json](httplib::Response& res, const rm::CommandResult& r) {
        if (r.ok)
            send_json(res, 200, {{"schema", kSchema}, {"ack", true}});
        else if (r.reason == "rejected")
            send_json(res, 400, error_json("rejected", r.error));
        else if (r.reason == "timeout")
            send_json(res, 504, error_json("timeout", r.error));
        else
            send_json(res, 503, error_json("unavailable", r.error));
    };

    s.Get("/operators", guarded([&, send_json](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, state_.operators_json());
    }));
    s.Get("/operators/:id", guarded([&, send_json](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, state_.operator_json(req.path_params.at("id")));
    }));
    s.Get("/operators/:id/history", guarded([&, send_json](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t after = req.has_param("after_seq") ? std::stoull(req.get_param_value("after_seq")) : 0;
        std::size_t limit = req.has_param("limit") ? std::stoul(req.get_param_value("limit")) : 500;
        send_json(res, 200, state_.history_json(req.path_params.at("id"), after, limit));
    }));
    s.Post("/operators/:id/period", guarded([&, command_reply](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body);
        auto ms = body.at("period_ms").get<std::int64_t>();
        if (ms < 100 || ms > 0xffffffffLL) throw ValidationError("period_ms must be at least 100");
        command_reply(res, state_.command(req.path_params.at("id"),
                                          proto::QueryMessage::set_period(0, static_cast<std::uint32_t>(ms))));
    }));
    s.Post("/operators/:id/filter", guarded([&, command_reply](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body);
        const auto& sensors = body.at("sensors");
        ban::QueryFilter filter;
        if (!(sensors.is_string() && sensors.get<std::string>() == "*"))
            filter = ban::QueryFilter::only(sensors.get<std::set<std::string>>());
        command_reply(res, state_.command(req.path_params.at("id"), proto::QueryMessage::set_filter(0, filter)));
    }));
    s.Get("/events", [&](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t after = 0;
        if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
        if (req.has_header("Last-Event-ID")) after = std::stoull(req.get_header_value("Last-Event-ID"));
        auto cursor = std::make_shared<std::uint64_t>(after);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
            if (state_.closed()) {
                sink.done();
                return true;
            }
            auto events = state_.events_after(*cursor, std::chrono::milliseconds(250));
            if (events.empty()) {
                static constexpr char keepalive[] = ": keepalive\n\n";
                return sink.write(keepalive, sizeof keepalive - 1);
            }
            for (const auto& e : events) {
                std::string chunk = "id: " + std::to_string(e.id) + "\nevent: update\ndata: " + e.payload.dump() + "\n\n";
                if (!sink.write(chunk.data(), chunk.size())) return false;
                *cursor = e.id;
            }
            return true;
        });
    });
}

GatewayServer::~GatewayServer() { stop(); }

int GatewayServer::start(const std::string& host, int port) {
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw ConfigError("cannot bind gateway to " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void GatewayServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace lrs::gateway
