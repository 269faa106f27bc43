#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lrs/ban.hpp"

// Query/answer messages exchanged between the remote monitoring post and an
// operator node. The remote side pulls: it sends the last sequence number it
// holds and receives the next samples, never a subscription stream.
namespace lrs::proto {

/// Upper bound on samples per data reply.
inline constexpr std::size_t kMaxBatch = 50;

enum class QueryKind : std::uint8_t { get_data = 0x01, set_period = 0x02, set_filter = 0x03, ping = 0x04 };
enum class ReplyKind : std::uint8_t {
    data = 0x81,
    period_ack = 0x82,
    filter_ack = 0x83,
    pong = 0x84,
    error = 0xEE,
};
enum class ErrorCode : std::uint8_t { malformed = 1, validation = 2, unsupported = 3, lifecycle = 4 };

const char* to_string(QueryKind k);

struct QueryMessage {
    QueryKind kind = QueryKind::ping;
    std::uint32_t request_id = 0;
    std::uint64_t last_seq = 0;
    std::uint32_t period_ms = 0;
    ban::QueryFilter filter;

    static QueryMessage get_data(std::uint32_t id, std::uint64_t last_seq) {
        return {QueryKind::get_data, id, last_seq, 0, {}};
    }
    static QueryMessage set_period(std::uint32_t id, std::uint32_t ms) { return {QueryKind::set_period, id, 0, ms, {}}; }
    static QueryMessage set_filter(std::uint32_t id, ban::QueryFilter f) {
        return {QueryKind::set_filter, id, 0, 0, std::move(f)};
    }
    static QueryMessage ping(std::uint32_t id) { return {QueryKind::ping, id, 0, 0, {}}; }

    bool operator==(const QueryMessage&) const = default;
};

/// One buffered frame as held by the operator node: the serialized frame
/// string tagged with its sequence number.
struct StoredSample {
    std::uint64_t seq = 0;
    std::int64_t peb_timestamp = 0;
    std::int64_t ingest_time = 0;
    Bytes frame;

    bool operator==(const StoredSample&) const = default;
};

/// The requested samples were evicted; everything in
/// (requested_after, oldest_available) is gone for good.
struct GapNotice {
    std::uint64_t requested_after = 0;
    std::uint64_t oldest_available = 0;

    bool operator==(const GapNotice&) const = default;
};

struct ReplyMessage {
    ReplyKind kind = ReplyKind::error;
    std::uint32_t request_id = 0;
    std::vector<StoredSample> samples;
    std::optional<GapNotice> gap;
    bool ack = false;
    std::uint64_t newest_seq = 0;
    ErrorCode error = ErrorCode::malformed;
    std::string error_text;

    static ReplyMessage make_error(std::uint32_t id, ErrorCode code, std::string text) {
        ReplyMessage r;
        r.kind = ReplyKind::error;
        r.request_id = id;
        r.error = code;
        r.error_text = std::move(text);
        return r;
    }

    bool operator==(const ReplyMessage&) const = default;
};

}  // namespace lrs::proto
