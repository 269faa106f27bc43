#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "lrs/protocol.hpp"

// Length-prefixed binary encoding of the query protocol. Layout is in
// docs/wire-protocol.md and pinned by golden-byte tests.
namespace lrs::wire {

/// Envelope: u32 length of what follows, u8 kind, u32 request id.
inline constexpr std::size_t kLengthPrefix = 4;
inline constexpr std::size_t kEnvelopeHeader = kLengthPrefix + 1 + 4;
inline constexpr std::uint32_t kMaxMessage = 1u << 20;

Bytes encode(const proto::QueryMessage& q);
Bytes encode(const proto::ReplyMessage& r);

/// Both throw ProtocolError on anything malformed, including trailing bytes.
proto::QueryMessage decode_query(std::span<const std::uint8_t> message);
proto::ReplyMessage decode_reply(std::span<const std::uint8_t> message);

/// Best-effort request id of a message that failed to decode (0 if unreadable).
std::uint32_t peek_request_id(std::span<const std::uint8_t> message);

/// Total size of the first complete message in `buffer`, if one is there.
std::optional<std::size_t> complete_message_size(std::span<const std::uint8_t> buffer);

/// Flips one bit inside the frame bytes of one sample of an encoded data
/// reply, chosen by `draw`. Returns false (and leaves the message alone) if
/// the message is not a data reply with at least one sample.
bool corrupt_sample_bit(Bytes& message, std::uint64_t draw);

}  // namespace lrs::wire
