#include "lrs/trace.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "lrs/error.hpp"

namespace lrs::trace {

void Writer::header(const Header& h) {
    Json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["scenario"] = h.scenario_name;
    j["seed"] = h.seed;
    j["operators"] = h.operators;
    j["rm_reference"] = {{"lat", h.rm_reference.lat}, {"lon", h.rm_reference.lon}};
    j["rm_clock_base_ms"] = h.rm_clock_base_ms;
    j["bin_m"] = h.bin_m;
    j["scenario_text"] = h.scenario_text;
    j["sensor_table"] = h.sensor_table_text;
    out_ << j.dump() << '\n';
}

void Writer::record(std::int64_t t, const std::string& type, Json fields) {
    if (last_t_ && t < *last_t_) throw Error("trace time went backwards");
    last_t_ = t;
    Json j;
    j["t"] = t;
    j["type"] = type;
    for (auto& [k, v] : fields.items()) j[k] = std::move(v);
    out_ << j.dump() << '\n';
}

void Writer::update(const rm::RecordUpdate& u) {
    auto j = to_json(u);
    record(rm::time_of(u), "update", std::move(j));
}

Json to_json(const rm::RecordUpdate& u) {
    struct V {
        Json operator()(const rm::SampleAccepted& s) const {
            return {{"op", s.op_id},
                    {"kind", "sample"},
                    {"seq", s.seq},
                    {"peb", s.peb_timestamp},
                    {"receive", s.receive_time},
                    {"frame", to_hex(s.frame)}};
        }
        Json operator()(const rm::GapRecorded& g) const {
            return {{"op", g.op_id}, {"kind", "gap"}, {"first", g.first_lost}, {"last", g.last_lost}};
        }
        Json operator()(const rm::PhaseChanged& p) const {
            return {{"op", p.op_id}, {"kind", "phase"}, {"phase", rm::to_string(p.phase)}};
        }
        Json operator()(const rm::ParityFailed& p) const {
            return {{"op", p.op_id}, {"kind", "parity"}, {"seq", p.seq}};
        }
        Json operator()(const rm::ProtocolViolation& p) const {
            return {{"op", p.op_id}, {"kind", "violation"}, {"detail", p.detail}};
        }
    };
    return std::visit(V{}, u);
}

std::optional<rm::RecordUpdate> to_update(const nlohmann::json& r) {
    if (r.at("type") != "update") return std::nullopt;
    auto t = r.at("t").get<std::int64_t>();
    auto op = r.at("op").get<std::string>();
    auto kind = r.at("kind").get<std::string>();
    if (kind == "sample")
        return rm::SampleAccepted{op, t, r.at("seq").get<std::uint64_t>(), r.at("peb").get<std::int64_t>(),
                                  r.at("receive").get<std::int64_t>(), from_hex(r.at("frame").get<std::string>())};
    if (kind == "gap") return rm::GapRecorded{op, t, r.at("first").get<std::uint64_t>(), r.at("last").get<std::uint64_t>()};
    if (kind == "phase") return rm::PhaseChanged{op, t, rm::parse_phase(r.at("phase").get<std::string>())};
    if (kind == "parity") return rm::ParityFailed{op, t, r.at("seq").get<std::uint64_t>()};
    if (kind == "violation") return rm::ProtocolViolation{op, t, r.at("detail").get<std::string>()};
    throw Error("unknown update kind '" + kind + "'");
}

TraceData read(std::istream& in) {
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (text.empty()) throw TraceError("empty trace", 0);
    TraceData data;
    std::size_t pos = 0;
    bool first = true;
    std::optional<std::int64_t> last_t;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) throw TraceError("truncated record", pos);
        auto line = std::string_view(text).substr(pos, nl - pos);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw TraceError(std::string("unreadable record: ") + e.what(), pos);
        }
        try {
            if (first) {
                if (j.at("format") != kFormat) throw TraceError("not a trace file", pos);
                if (j.at("version") != kVersion)
                    throw TraceError("unsupported trace version " + j.at("version").dump(), pos);
                auto& h = data.header;
                h.scenario_name = j.at("scenario").get<std::string>();
                h.seed = j.at("seed").get<std::uint64_t>();
                h.operators = j.at("operators").get<std::vector<std::string>>();
                h.rm_reference = {j.at("rm_reference").at("lat").get<double>(),
                                  j.at("rm_reference").at("lon").get<double>()};
                h.rm_clock_base_ms = j.at("rm_clock_base_ms").get<std::int64_t>();
                h.bin_m = j.at("bin_m").get<double>();
                h.scenario_text = j.at("scenario_text").get<std::string>();
                h.sensor_table_text = j.at("sensor_table").get<std::string>();
                first = false;
            } else {
                auto t = j.at("t").get<std::int64_t>();
                j.at("type").get<std::string>();
                if (last_t && t < *last_t) throw TraceError("record time goes backwards", pos);
                last_t = t;
                if (j.at("type") == "update") to_update(j);
                data.records.push_back(std::move(j));
                data.offsets.push_back(pos);
            }
        } catch (const TraceError&) {
            throw;
        } catch (const std::exception& e) {
            throw TraceError(std::string("bad record: ") + e.what(), pos);
        }
        pos = nl + 1;
    }
    if (first) throw TraceError("missing header", 0);
    return data;
}

TraceData read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceError("cannot open trace '" + path + "'", 0);
    return read(in);
}

void check_consistency(const TraceData& data) {
    std::set<std::uint64_t> sent;
    std::set<std::uint64_t> settled;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& r = data.records[i];
        const auto& type = r.at("type");
        if (type == "tx") {
            if (!sent.insert(r.at("msg").get<std::uint64_t>()).second)
                throw TraceError("duplicate transmission id", data.offsets[i]);
        } else if (type == "deliver" || type == "loss") {
            auto id = r.at("msg").get<std::uint64_t>();
            if (!sent.contains(id)) throw TraceError("delivery without a transmission", data.offsets[i]);
            if (!settled.insert(id).second) throw TraceError("transmission settled twice", data.offsets[i]);
        }
    }
}

LogBuilder::LogBuilder(std::vector<std::string> operators, metrics::GeoPoint reference, double rate_hz)
    : operators_(std::move(operators)), reference_(reference), rate_hz_(rate_hz) {
    for (const auto& op : operators_) ops_[op];
}

void LogBuilder::begin_session(const std::string& name, std::int64_t begin_peb, std::int64_t end_peb) {
    sessions_.push_back({name, begin_peb, end_peb});
}

void LogBuilder::ingest(const std::string& op_id, std::uint64_t seq, std::int64_t peb_timestamp, const std::string& leg,
                        const GpsReading& gps) {
    if (sessions_.empty()) throw Error("ingest outside a session");
    Sample s;
    s.session = sessions_.size() - 1;
    s.peb_timestamp = peb_timestamp;
    s.leg = leg;
    metrics::GpsFix fix{gps.lat, gps.lon, gps.hdop, gps.satellites, 0};
    if (fix.usable()) s.distance_m = metrics::haversine({gps.lat, gps.lon}, reference_);
    ops_.at(op_id).samples[seq] = std::move(s);
}

void LogBuilder::accepted(const std::string& op_id, std::uint64_t seq, std::int64_t receive_time) {
    auto& samples = ops_.at(op_id).samples;
    if (auto it = samples.find(seq); it != samples.end()) it->second.receive = receive_time;
}

void LogBuilder::parity_failed(const std::string& op_id, std::uint64_t seq, std::int64_t receive_time) {
    auto& samples = ops_.at(op_id).samples;
    if (auto it = samples.find(seq); it != samples.end() && !it->second.failed_receive)
        it->second.failed_receive = receive_time;
}

void LogBuilder::gap(const std::string& op_id, std::uint64_t first, std::uint64_t last) {
    auto& lost = ops_.at(op_id).lost;
    for (auto s = first; s <= last; ++s) lost.insert(s);
}

std::vector<metrics::SessionLog> LogBuilder::logs() const {
    std::vector<metrics::SessionLog> out;
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
        for (const auto& op : operators_) {
            metrics::SessionLog log;
            log.name = operators_.size() == 1 ? sessions_[i].name : sessions_[i].name + "." + op;
            log.begin_time = sessions_[i].begin;
            log.end_time = sessions_[i].end;
            log.rate_hz = rate_hz_;
            for (const auto& [seq, s] : ops_.at(op).samples) {
                if (s.session != i) continue;
                metrics::SampleRecord r;
                r.seq = seq;
                r.peb_timestamp = s.peb_timestamp;
                r.distance_m = s.distance_m;
                r.leg = s.leg;
                if (s.receive) {
                    r.receive_timestamp = s.receive;
                } else if (s.failed_receive) {
                    r.receive_timestamp = s.failed_receive;
                    r.parity_ok = false;
                }
                log.records.push_back(std::move(r));
            }
            out.push_back(std::move(log));
        }
    }
    return out;
}

Conservation LogBuilder::conservation(const std::string& op_id, std::uint64_t oldest, std::uint64_t newest) const {
    const auto& per = ops_.at(op_id);
    Conservation c;
    c.op_id = op_id;
    std::uint64_t last_delivered = 0;
    for (const auto& [seq, s] : per.samples) {
        ++c.produced;
        if (s.receive) {
            ++c.delivered_valid;
            last_delivered = std::max(last_delivered, seq);
        }
    }
    for (const auto& [seq, s] : per.samples) {
        if (s.receive) continue;
        if (per.lost.contains(seq))
            ++c.lost_permanently;
        else if (newest != 0 && seq >= oldest && seq <= newest && seq > last_delivered)
            ++c.still_buffered;
        else if (s.failed_receive)
            ++c.corrupt_dropped;
    }
    return c;
}

namespace {

LogBuilder build(const TraceData& data, std::map<std::string, std::pair<std::uint64_t, std::uint64_t>>* finals) {
    const auto& h = data.header;
    std::int64_t period = 1000;
    for (const auto& r : data.records)
        if (r.at("type") == "session_begin") {
            period = r.at("period_ms").get<std::int64_t>();
            break;
        }
    LogBuilder b(h.operators, h.rm_reference, 1000.0 / static_cast<double>(period));
    for (const auto& r : data.records) {
        const auto& type = r.at("type");
        if (type == "session_begin") {
            b.begin_session(r.at("session").get<std::string>(), r.at("begin_peb").get<std::int64_t>(),
                            r.at("end_peb").get<std::int64_t>());
        } else if (type == "ingest") {
            GpsReading g{r.at("lat").get<double>(), r.at("lon").get<double>(), r.at("hdop").get<double>(),
                         r.at("sats").get<int>()};
            b.ingest(r.at("op").get<std::string>(), r.at("seq").get<std::uint64_t>(), r.at("peb").get<std::int64_t>(),
                     r.at("leg").get<std::string>(), g);
        } else if (type == "update") {
            auto u = *to_update(r);
            if (auto* s = std::get_if<rm::SampleAccepted>(&u)) b.accepted(s->op_id, s->seq, s->receive_time);
            if (auto* p = std::get_if<rm::ParityFailed>(&u))
                b.parity_failed(p->op_id, p->seq, h.rm_clock_base_ms + p->time);
            if (auto* g = std::get_if<rm::GapRecorded>(&u)) b.gap(g->op_id, g->first_lost, g->last_lost);
        } else if (type == "final" && finals) {
            (*finals)[r.at("op").get<std::string>()] = {r.at("oldest").get<std::uint64_t>(),
                                                        r.at("newest").get<std::uint64_t>()};
        }
    }
    return b;
}

}  // namespace

std::vector<metrics::SessionLog> session_logs(const TraceData& data) { return build(data, nullptr).logs(); }

std::vector<Conservation> conservation(const TraceData& data) {
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> finals;
    auto b = build(data, &finals);
    std::vector<Conservation> out;
    for (const auto& op : data.header.operators) {
        auto it = finals.find(op);
        if (it == finals.end()) throw TraceError("trace has no final record for '" + op + "'", 0);
        out.push_back(b.conservation(op, it->second.first, it->second.second));
    }
    return out;
}

}  // namespace lrs::trace
