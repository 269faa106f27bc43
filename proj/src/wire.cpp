#include "lrs/wire.hpp"

#include <algorithm>

namespace lrs::proto {

const char* to_string(QueryKind k) {
    switch (k) {
        case QueryKind::get_data: return "GET_DATA";
        case QueryKind::set_period: return "SET_PERIOD";
        case QueryKind::set_filter: return "SET_FILTER";
        case QueryKind::ping: return "PING";
    }
    return "?";
}

}  // namespace lrs::proto

namespace lrs::wire {
namespace {

using proto::QueryKind;
using proto::ReplyKind;

Bytes begin(std::uint8_t kind, std::uint32_t request_id) {
    Bytes out;
    ByteWriter w(out);
    w.u32(0);  // patched by finish()
    w.u8(kind);
    w.u32(request_id);
    return out;
}

Bytes finish(Bytes out) {
    auto len = static_cast<std::uint32_t>(out.size() - kLengthPrefix);
    for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(len >> (8 * (3 - i)));
    return out;
}

struct Envelope {
    std::uint8_t kind;
    std::uint32_t request_id;
};

Envelope open(ByteReader& r, std::span<const std::uint8_t> message) {
    std::uint32_t len = r.u32();
    if (len != message.size() - kLengthPrefix)
        throw ProtocolError("length prefix " + std::to_string(len) + " does not match message size " +
                            std::to_string(message.size() - kLengthPrefix));
    Envelope e{};
    e.kind = r.u8();
    e.request_id = r.u32();
    return e;
}

void write_sample(ByteWriter& w, const proto::StoredSample& s) {
    if (s.frame.size() > 0xffff) throw ProtocolError("frame too large for the wire");
    w.u64(s.seq);
    w.i64(s.peb_timestamp);
    w.i64(s.ingest_time);
    w.u16(static_cast<std::uint16_t>(s.frame.size()));
    w.raw(s.frame);
}

proto::StoredSample read_sample(ByteReader& r) {
    proto::StoredSample s;
    s.seq = r.u64();
    s.peb_timestamp = r.i64();
    s.ingest_time = r.i64();
    auto n = r.u16();
    auto f = r.raw(n);
    s.frame.assign(f.begin(), f.end());
    return s;
}

void expect_done(const ByteReader& r) {
    if (!r.done()) throw ProtocolError(std::to_string(r.remaining()) + " trailing bytes");
}

}  // namespace

Bytes encode(const proto::QueryMessage& q) {
    Bytes out = begin(static_cast<std::uint8_t>(q.kind), q.request_id);
    ByteWriter w(out);
    switch (q.kind) {
        case QueryKind::get_data: w.u64(q.last_seq); break;
        case QueryKind::set_period: w.u32(q.period_ms); break;
        case QueryKind::set_filter:
            if (q.filter.wildcard) {
                w.u8(0);
            } else {
                if (q.filter.ids.size() > 255) throw ProtocolError("filter names too many sensors");
                w.u8(1);
                w.u8(static_cast<std::uint8_t>(q.filter.ids.size()));
                for (const auto& id : q.filter.ids) {
                    if (id.size() > 255) throw ProtocolError("sensor id too long");
                    w.u8(static_cast<std::uint8_t>(id.size()));
                    w.raw({reinterpret_cast<const std::uint8_t*>(id.data()), id.size()});
                }
            }
            break;
        case QueryKind::ping: break;
    }
    return finish(std::move(out));
}

Bytes encode(const proto::ReplyMessage& m) {
    Bytes out = begin(static_cast<std::uint8_t>(m.kind), m.request_id);
    ByteWriter w(out);
    switch (m.kind) {
        case ReplyKind::data:
            if (m.samples.size() > proto::kMaxBatch) throw ProtocolError("data reply exceeds the batch cap");
            w.u8(static_cast<std::uint8_t>(m.samples.size()));
            for (const auto& s : m.samples) write_sample(w, s);
            w.u8(m.gap ? 1 : 0);
            if (m.gap) {
                w.u64(m.gap->requested_after);
                w.u64(m.gap->oldest_available);
            }
            break;
        case ReplyKind::period_ack:
        case ReplyKind::filter_ack: w.u8(m.ack ? 1 : 0); break;
        case ReplyKind::pong: w.u64(m.newest_seq); break;
        case ReplyKind::error: {
            w.u8(static_cast<std::uint8_t>(m.error));
            auto len = std::min<std::size_t>(m.error_text.size(), 0xffff);
            w.u16(static_cast<std::uint16_t>(len));
            w.raw({reinterpret_cast<const std::uint8_t*>(m.error_text.data()), len});
            break;
        }
    }
    return finish(std::move(out));
}

proto::QueryMessage decode_query(std::span<const std::uint8_t> message) {
    ByteReader r(message);
    auto env = open(r, message);
    proto::QueryMessage q;
    q.request_id = env.request_id;
    switch (env.kind) {
        case static_cast<std::uint8_t>(QueryKind::get_data):
            q.kind = QueryKind::get_data;
            q.last_seq = r.u64();
            break;
        case static_cast<std::uint8_t>(QueryKind::set_period):
            q.kind = QueryKind::set_period;
            q.period_ms = r.u32();
            break;
        case static_cast<std::uint8_t>(QueryKind::set_filter): {
            q.kind = QueryKind::set_filter;
            auto mode = r.u8();
            if (mode == 0) {
                q.filter = ban::QueryFilter::all();
            } else if (mode == 1) {
                q.filter.wildcard = false;
                auto count = r.u8();
                for (int i = 0; i < count; ++i) {
                    auto len = r.u8();
                    auto id = r.raw(len);
                    q.filter.ids.emplace(id.begin(), id.end());
                }
            } else {
                throw ProtocolError("unknown filter mode " + std::to_string(mode));
            }
            break;
        }
        case static_cast<std::uint8_t>(QueryKind::ping): q.kind = QueryKind::ping; break;
        default: throw ProtocolError("unknown query kind " + std::to_string(env.kind));
    }
    expect_done(r);
    return q;
}

proto::ReplyMessage decode_reply(std::span<const std::uint8_t> message) {
    ByteReader r(message);
    auto env = open(r, message);
    proto::ReplyMessage m;
    m.request_id = env.request_id;
    switch (env.kind) {
        case static_cast<std::uint8_t>(ReplyKind::data): {
            m.kind = ReplyKind::data;
            auto count = r.u8();
            if (count > proto::kMaxBatch) throw ProtocolError("data reply claims " + std::to_string(count) + " samples");
            for (int i = 0; i < count; ++i) m.samples.push_back(read_sample(r));
            auto has_gap = r.u8();
            if (has_gap > 1) throw ProtocolError("bad gap flag");
            if (has_gap) m.gap = proto::GapNotice{r.u64(), r.u64()};
            break;
        }
        case static_cast<std::uint8_t>(ReplyKind::period_ack):
        case static_cast<std::uint8_t>(ReplyKind::filter_ack): {
            m.kind = static_cast<ReplyKind>(env.kind);
            auto ack = r.u8();
            if (ack > 1) throw ProtocolError("bad ack byte");
            m.ack = ack == 1;
            break;
        }
        case static_cast<std::uint8_t>(ReplyKind::pong):
            m.kind = ReplyKind::pong;
            m.newest_seq = r.u64();
            break;
        case static_cast<std::uint8_t>(ReplyKind::error): {
            m.kind = ReplyKind::error;
            m.error = static_cast<proto::ErrorCode>(r.u8());
            auto len = r.u16();
            auto text = r.raw(len);
            m.error_text.assign(text.begin(), text.end());
            break;
        }
        default: throw ProtocolError("unknown reply kind " + std::to_string(env.kind));
    }
    expect_done(r);
    return m;
}

std::uint32_t peek_request_id(std::span<const std::uint8_t> message) {
    if (message.size() < kEnvelopeHeader) return 0;
    std::uint32_t id = 0;
    for (std::size_t i = 5; i < 9; ++i) id = (id << 8) | message[i];
    return id;
}

std::optional<std::size_t> complete_message_size(std::span<const std::uint8_t> buffer) {
    if (buffer.size() < kLengthPrefix) return std::nullopt;
    std::uint32_t len = 0;
    for (std::size_t i = 0; i < 4; ++i) len = (len << 8) | buffer[i];
    if (len > kMaxMessage) throw ProtocolError("message length " + std::to_string(len) + " exceeds limit");
    if (buffer.size() < kLengthPrefix + len) return std::nullopt;
    return kLengthPrefix + len;
}

bool corrupt_sample_bit(Bytes& message, std::uint64_t draw) {
    if (message.size() < kEnvelopeHeader + 1 || message[4] != static_cast<std::uint8_t>(ReplyKind::data)) return false;
    std::size_t count = message[kEnvelopeHeader];
    if (count == 0) return false;
    std::size_t target = draw % count;
    draw /= count;
    std::size_t pos = kEnvelopeHeader + 1;
    for (std::size_t i = 0; i < count; ++i) {
        pos += 24;
        if (pos + 2 > message.size()) return false;
        std::size_t len = (std::size_t{message[pos]} << 8) | message[pos + 1];
        pos += 2;
        if (pos + len > message.size() || len == 0) return false;
        if (i == target) {
            std::size_t bit = draw % (len * 8);
            message[pos + bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            return true;
        }
        pos += len;
    }
    return false;
}

}  // namespace lrs::wire
