#include "lrs/sim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "lrs/error.hpp"
#include "lrs/wire.hpp"

namespace lrs::harness {

namespace {

constexpr double kCoBaselinePpm = 3.0;
constexpr double kCoSpikePpm = 200.0;
constexpr double kMsPerHour = 3600.0 * 1000.0;

trace::GpsReading gps_fix(const Scenario& s, PlanePoint p, Rng& rng) {
    p.east_m += rng.uniform(-s.gps_jitter_m, s.gps_jitter_m);
    p.north_m += rng.uniform(-s.gps_jitter_m, s.gps_jitter_m);
    auto geo = to_geo(s.origin, p);
    trace::GpsReading g{geo.lat, geo.lon, rng.uniform(0.7, 1.2), 7 + static_cast<int>(rng.below(5))};
    if (rng.bernoulli(s.gps_dropout)) {
        g.hdop = rng.uniform(1.6, 4.0);
        g.satellites = 4 + static_cast<int>(rng.below(3));
    }
    return g;
}

std::string reply_kind_name(const Bytes& message) {
    if (message.size() <= wire::kLengthPrefix) return "?";
    switch (static_cast<proto::ReplyKind>(message[wire::kLengthPrefix])) {
        case proto::ReplyKind::data: return "DATA";
        case proto::ReplyKind::period_ack: return "PERIOD_ACK";
        case proto::ReplyKind::filter_ack: return "FILTER_ACK";
        case proto::ReplyKind::pong: return "PONG";
        case proto::ReplyKind::error: return "ERROR";
    }
    return "?";
}

}  // namespace

SyntheticPeb::SyntheticPeb(const Scenario& scenario, const OperatorSpec& op, const ban::SensorConfig& config, Rng rng)
    : scenario_(scenario), op_(op), config_(config), rng_(rng) {}

void SyntheticPeb::begin_session(std::size_t index) { session_ = index; }

std::optional<ban::SensorFrame> SyntheticPeb::poll(std::int64_t now) {
    namespace s = ban::sensor;
    const auto& session = scenario_.sessions.at(session_);
    const std::int64_t session_time = now - scenario_.session_start(session_);
    pose_ = scenario_.pose(op_, session, session_time);
    gps_ = gps_fix(scenario_, pose_.position, rng_);

    double phase = static_cast<double>(now) / 60000.0 * 2.0 * std::numbers::pi;
    double hr = 78.0 + 6.0 * std::sin(phase) + rng_.uniform(-2.0, 2.0);
    double br = 16.0 + 2.0 * std::sin(phase / 3.0) + rng_.uniform(-0.5, 0.5);
    double co = kCoBaselinePpm + rng_.uniform(0.0, 1.0);
    for (const auto& w : op_.co_spikes)
        if (w.contains(session_time)) co = kCoSpikePpm + rng_.uniform(-5.0, 5.0);

    std::vector<ban::SensorReading> readings = {
        {std::string(s::kPiezo), {br + rng_.uniform(-0.3, 0.3)}},
        {std::string(s::kElectrodes), {hr, br, 36.9 + rng_.uniform(-0.1, 0.1)}},
        {std::string(s::kSpO2), {97.0 + rng_.uniform(-1.0, 1.0)}},
        {std::string(s::kAccel1), {0.0}},
        {std::string(s::kAccel2), {0.0, 0.0}},
        {std::string(s::kCO), {co}},
        {std::string(s::kExtTemp), {21.0 + rng_.uniform(-0.5, 0.5)}},
        {std::string(s::kHeatFlux), {45.0 + rng_.uniform(-5.0, 5.0)}},
        {std::string(s::kMotion), {0.0}},
        {std::string(s::kGps), {gps_.lat, gps_.lon, gps_.hdop, static_cast<double>(gps_.satellites)}},
        {std::string(s::kCO2), {450.0 + rng_.uniform(-20.0, 20.0)}},
    };
    std::erase_if(readings, [&](const ban::SensorReading& r) { return !config_.contains(r.sensor_id); });

    ban::DeviceState device;
    device.device_id = op_.id;
    device.battery_fraction =
        std::clamp(op_.battery_start - op_.battery_drain_per_h * static_cast<double>(now) / kMsPerHour, 0.0, 1.0);
    device.peb_timestamp = scenario_.peb_clock_base_ms + now;
    device.status_code = static_cast<std::uint16_t>(session_ + 1);
    return ban::build_frame(readings, device, config_);
}

metrics::GeoPoint survey_rm_position(const Scenario& scenario, Rng rng) {
    std::vector<metrics::GpsFix> fixes;
    for (std::int64_t t = 0; t < metrics::kReferenceWindowMs; t += 1000) {
        auto g = gps_fix(scenario, {}, rng);
        fixes.push_back({g.lat, g.lon, g.hdop, g.satellites, t});
    }
    return metrics::reference_position(fixes, 0);
}

Simulation::Simulation(Scenario scenario, std::ostream* trace_out, ban::SensorConfig config,
                       rm::ThresholdTable thresholds)
    : scenario_((scenario.validate(), std::move(scenario))),
      config_(std::move(config)),
      rng_(scenario_.seed),
      reference_(survey_rm_position(scenario_, rng_.fork(200))),
      rm_(config_, thresholds,
          [&] {
              auto s = scenario_.rm;
              s.clock_base_ms = scenario_.rm_clock_base_ms;
              return s;
          }()),
      logs_(
          [&] {
              std::vector<std::string> ids;
              for (const auto& op : scenario_.operators) ids.push_back(op.id);
              return ids;
          }(),
          reference_, 1000.0 / static_cast<double>(scenario_.sampling_period_ms)) {
    if (scenario_.relay) backhaul_ = std::make_unique<link::LinkModel>(scenario_.backhaul, rng_.fork(1));
    for (std::size_t i = 0; i < scenario_.operators.size(); ++i) {
        const auto& spec = scenario_.operators[i];
        Operator o;
        o.spec = &spec;
        o.node = std::make_unique<op::OpNode>(config_, scenario_.buffer_capacity);
        o.node->set_period(scenario_.sampling_period_ms);
        o.peb = std::make_unique<SyntheticPeb>(scenario_, spec, config_, rng_.fork(100 + i));
        auto access = scenario_.access;
        access.forced_outages.insert(access.forced_outages.end(), spec.access_outages.begin(), spec.access_outages.end());
        o.access = std::make_unique<link::LinkModel>(access, rng_.fork(10 + i));
        rm_.add_operator(spec.id);
        o.last_warnings = rm_.record(spec.id).warnings;
        ops_.push_back(std::move(o));
    }
    end_ = scenario_.end_time();
    if (trace_out) {
        trace_ = std::make_unique<trace::Writer>(*trace_out);
        trace::Header h;
        h.scenario_name = scenario_.name;
        std::ostringstream text;
        write_scenario(text, scenario_);
        h.scenario_text = text.str();
        h.seed = scenario_.seed;
        std::ostringstream table;
        ban::write_sensor_table(table, config_);
        h.sensor_table_text = table.str();
        h.rm_reference = reference_;
        for (const auto& op : scenario_.operators) h.operators.push_back(op.id);
        h.bin_m = scenario_.bin_m;
        h.rm_clock_base_ms = scenario_.rm_clock_base_ms;
        trace_->header(h);
    }
}

Simulation::~Simulation() = default;

const op::OpNode& Simulation::op_node(const std::string& op_id) const {
    for (const auto& o : ops_)
        if (o.spec->id == op_id) return *o.node;
    throw NotFoundError("unknown operator '" + op_id + "'");
}

std::optional<std::size_t> Simulation::session_at(std::int64_t t) const {
    std::int64_t start = 0;
    for (std::size_t i = 0; i < scenario_.sessions.size(); ++i) {
        std::int64_t next = start + scenario_.sessions[i].duration_ms + scenario_.drain_ms;
        if (t < next || i + 1 == scenario_.sessions.size()) return i;
        start = next;
    }
    return std::nullopt;
}

void Simulation::begin_session(std::size_t index) {
    session_ = index;
    const auto& s = scenario_.sessions[index];
    std::int64_t begin = scenario_.peb_clock_base_ms + now_;
    std::int64_t end = begin + s.duration_ms;
    logs_.begin_session(s.name, begin, end);
    if (trace_)
        trace_->record(now_, "session_begin",
                       {{"session", s.name},
                        {"index", index},
                        {"begin_peb", begin},
                        {"end_peb", end},
                        {"period_ms", scenario_.sampling_period_ms},
                        {"site_m", s.site_m}});
    for (auto& o : ops_) {
        o.peb->begin_session(index);
        o.node->schedule_next_sample(now_);
    }
}

std::vector<link::Hop> Simulation::hops(std::size_t op, bool up) {
    const auto& session = scenario_.sessions.at(*session_);
    auto pose = scenario_.pose(*ops_[op].spec, session, now_ - scenario_.session_start(*session_));
    link::Hop access{ops_[op].access.get(), scenario_.access_distance(pose, session), pose.orientation};
    if (!backhaul_) return {access};
    link::Hop back{backhaul_.get(), session.site_m, link::Orientation::facing_rm};
    return up ? std::vector<link::Hop>{access, back} : std::vector<link::Hop>{back, access};
}

void Simulation::transmit(std::size_t op, bool up, Bytes bytes, proto::QueryKind kind) {
    const std::uint64_t msg = next_msg_++;
    if (trace_)
        trace_->record(now_, "tx",
                       {{"msg", msg},
                        {"op", ops_[op].spec->id},
                        {"dir", up ? "up" : "down"},
                        {"kind", up ? reply_kind_name(bytes) : proto::to_string(kind)},
                        {"bytes", bytes.size()}});
    auto path = hops(op, up);
    auto outcome = link::send_over(path, now_);
    if (!outcome.delivered) {
        ++lost_;
        if (trace_)
            trace_->record(now_, "loss", {{"msg", msg}, {"hop", outcome.lost_at}, {"cause", link::to_string(outcome.cause)}});
        return;
    }
    bool corrupt = false;
    // Only frame bits are corrupted: the parity check is the detector under study.
    if (up && outcome.corrupt && wire::corrupt_sample_bit(bytes, outcome.corruption_draw)) {
        corrupt = true;
        ++corrupted_;
    }
    in_flight_.emplace(std::pair{outcome.arrival, msg}, InFlight{msg, op, up, std::move(bytes), corrupt});
}

void Simulation::deliver_due() {
    while (!in_flight_.empty() && in_flight_.begin()->first.first <= now_) {
        auto node = in_flight_.extract(in_flight_.begin());
        auto& m = node.mapped();
        auto& o = ops_[m.op];
        if (trace_) trace_->record(now_, "deliver", {{"msg", m.msg}, {"corrupt", m.corrupt}});
        if (m.up) {
            rm_.deliver(o.spec->id, m.bytes, now_);
        } else {
            auto kind = m.bytes.size() > wire::kLengthPrefix ? static_cast<proto::QueryKind>(m.bytes[wire::kLengthPrefix])
                                                            : proto::QueryKind::ping;
            transmit(m.op, true, o.node->handle_bytes(m.bytes, now_), kind);
        }
    }
}

void Simulation::submit_command(const std::string& op_id, proto::QueryMessage command, rm::CommandCallback done) {
    std::lock_guard lock(commands_mu_);
    commands_.push_back({op_id, std::move(command), std::move(done)});
}

void Simulation::drain_commands() {
    std::vector<Command> pending;
    {
        std::lock_guard lock(commands_mu_);
        pending.swap(commands_);
    }
    for (auto& c : pending) {
        try {
            rm_.submit_command(c.op_id, c.query, c.done);
        } catch (const Error& e) {
            if (c.done) c.done({false, e.what(), "unavailable"});
        }
    }
}

void Simulation::publish_updates() {
    auto updates = rm_.drain_updates();
    if (updates.empty()) return;
    for (const auto& u : updates) {
        if (trace_) trace_->update(u);
        if (auto* s = std::get_if<rm::SampleAccepted>(&u)) logs_.accepted(s->op_id, s->seq, s->receive_time);
        if (auto* p = std::get_if<rm::ParityFailed>(&u))
            logs_.parity_failed(p->op_id, p->seq, scenario_.rm_clock_base_ms + p->time);
        if (auto* g = std::get_if<rm::GapRecorded>(&u)) logs_.gap(g->op_id, g->first_lost, g->last_lost);
    }
    for (auto& o : ops_) {
        const auto& w = rm_.record(o.spec->id).warnings;
        if (w == o.last_warnings) continue;
        o.last_warnings = w;
        if (trace_)
            trace_->record(now_, "flags",
                           {{"op", o.spec->id},
                            {"health", rm::to_string(w.health)},
                            {"environment", rm::to_string(w.environment)},
                            {"equipment", rm::to_string(w.equipment)},
                            {"icon", rm::to_string(w.icon)}});
    }
    if (listener_) listener_(now_, updates);
}

void Simulation::step() {
    if (finished()) return;
    if (auto s = session_at(now_); s != session_) begin_session(*s);
    deliver_due();

    const std::int64_t start = scenario_.session_start(*session_);
    if (now_ <= start + scenario_.sessions[*session_].duration_ms) {
        for (auto& o : ops_) {
            for (auto seq : o.node->tick(*o.peb, now_)) {
                auto sample = o.node->find(seq);
                const auto& gps = o.peb->last_gps();
                const auto& pose = o.peb->last_pose();
                logs_.ingest(o.spec->id, seq, sample->peb_timestamp, pose.leg, gps);
                if (trace_)
                    trace_->record(now_, "ingest",
                                   {{"op", o.spec->id},
                                    {"seq", seq},
                                    {"peb", sample->peb_timestamp},
                                    {"leg", pose.leg},
                                    {"lat", gps.lat},
                                    {"lon", gps.lon},
                                    {"hdop", gps.hdop},
                                    {"sats", gps.satellites}});
            }
        }
    }

    drain_commands();
    for (auto& out : rm_.tick(now_)) {
        std::size_t idx = 0;
        while (ops_[idx].spec->id != out.op_id) ++idx;
        transmit(idx, false, std::move(out.message), out.kind);
    }
    publish_updates();

    if (now_ == end_) finish();
    now_ += link::kTickMs;
}

void Simulation::finish() {
    if (finished_) return;
    finished_ = true;
    if (!trace_) return;
    for (const auto& o : ops_)
        trace_->record(now_, "final",
                       {{"op", o.spec->id}, {"oldest", o.node->oldest_seq()}, {"newest", o.node->newest_seq()}});
}

void Simulation::run() {
    while (!finished()) step();
}

void Simulation::run_until(std::int64_t t) {
    while (!finished() && now_ <= t) step();
}

std::vector<trace::Conservation> Simulation::conservation() const {
    std::vector<trace::Conservation> out;
    for (const auto& o : ops_) out.push_back(logs_.conservation(o.spec->id, o.node->oldest_seq(), o.node->newest_seq()));
    return out;
}

std::vector<metrics::SessionMetrics> write_results(const std::string& out_dir,
                                                   std::span<const metrics::SessionLog> logs, double bin_m) {
    namespace fs = std::filesystem;
    std::vector<metrics::SessionMetrics> all;
    for (const auto& log : logs) all.push_back(metrics::compute_session_metrics(log, bin_m));
    if (out_dir.empty()) return all;
    fs::create_directories(fs::path(out_dir) / "sessions");
    std::ofstream summary(fs::path(out_dir) / "summary.csv");
    std::ofstream bins(fs::path(out_dir) / "distance_bins.csv");
    metrics::write_summary_header(summary);
    metrics::write_bins_header(bins);
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const auto& log = logs[i];
        std::ofstream session(fs::path(out_dir) / "sessions" / (log.name + ".csv"));
        metrics::write_session_csv(session, log);
        metrics::write_summary_row(summary, log.name, all[i]);
        metrics::write_bins_rows(bins, log.name, "all", all[i].bins);
        std::set<std::string> legs;
        for (const auto& r : log.records) legs.insert(r.leg);
        if (legs.size() > 1) {
            for (const auto& leg : legs) {
                auto per_leg = metrics::distance_bins(log, bin_m, &leg, all[i].offset_ms);
                metrics::write_bins_rows(bins, log.name, leg, per_leg);
            }
        }
    }
    return all;
}

RunResult run_scenario(const Scenario& scenario, const std::string& out_dir) {
    std::unique_ptr<std::ofstream> trace_file;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        trace_file = std::make_unique<std::ofstream>(std::filesystem::path(out_dir) / "trace.jsonl", std::ios::binary);
        if (!*trace_file) throw ConfigError("cannot write to '" + out_dir + "'");
    }
    Simulation sim(scenario, trace_file.get());
    sim.run();
    RunResult r;
    r.logs = sim.session_logs();
    r.metrics = write_results(out_dir, r.logs, scenario.bin_m);
    r.conservation = sim.conservation();
    return r;
}

}  // namespace lrs::harness
