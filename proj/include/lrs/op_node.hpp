#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "lrs/ban.hpp"
#include "lrs/protocol.hpp"

namespace lrs::op {

/// Four hours of 1 Hz samples.
inline constexpr std::size_t kDefaultCapacity = 14400;
inline constexpr std::int64_t kDefaultSamplingPeriodMs = 1000;
inline constexpr std::int64_t kMinSamplingPeriodMs = 100;

struct NodeSettings {
    std::int64_t sampling_period_ms = kDefaultSamplingPeriodMs;
    ban::QueryFilter query_filter;

    bool operator==(const NodeSettings&) const = default;
};

/// Seq range selected by a GET_DATA; `count` samples starting at `first`.
struct FetchRange {
    std::uint64_t first = 0;
    std::size_t count = 0;
    std::optional<proto::GapNotice> gap;

    bool operator==(const FetchRange&) const = default;
};

/// Bounded, oldest-first-evicting store of sequence-tagged frames. Retained
/// seqs always form the contiguous range [oldest_seq, newest_seq].
class SampleBuffer {
public:
    explicit SampleBuffer(std::size_t capacity = kDefaultCapacity);

    /// Appends `s`; its seq must be newest_seq() + 1. Returns the evicted seq, if any.
    std::optional<std::uint64_t> push(proto::StoredSample s);

    /// Samples after `last_seq`, at most kMaxBatch. When last_seq + 1 has been
    /// evicted the range starts at the oldest retained sample and carries a gap notice.
    FetchRange fetch_after(std::uint64_t last_seq) const;

    std::vector<proto::StoredSample> copy(const FetchRange& range) const;

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    /// 0 when empty.
    std::uint64_t oldest_seq() const noexcept { return empty() ? 0 : samples_.front().seq; }
    std::uint64_t newest_seq() const noexcept { return empty() ? 0 : samples_.back().seq; }
    const proto::StoredSample* find(std::uint64_t seq) const;

private:
    std::size_t capacity_;
    std::deque<proto::StoredSample> samples_;
};

/// Where the sampler gets its frames; nullopt means the PEB did not answer.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::optional<ban::SensorFrame> poll(std::int64_t now) = 0;
};

/// The operator-worn node: a sampler that polls the PEB every sampling
/// period and stores tagged frames, plus a request/reply server answering
/// GET_DATA, SET_PERIOD, SET_FILTER and PING.
///
/// Thread-safe: one sampler writer, any number of concurrent query handlers.
/// Every public call takes the node lock once, so a query observes the
/// buffer either before or after an ingest, never in between.
class OpNode {
public:
    explicit OpNode(ban::SensorConfig config, std::size_t capacity = kDefaultCapacity);

    void stop();
    bool running() const;

    /// Tags `frame` with the next seq (1 for the first) and stores it.
    std::uint64_t ingest(const ban::SensorFrame& frame, std::int64_t now);

    proto::ReplyMessage handle_query(const proto::QueryMessage& q, std::int64_t now);

    /// Decodes, dispatches and encodes; malformed input yields an error reply.
    Bytes handle_bytes(std::span<const std::uint8_t> request, std::int64_t now);

    void set_period(std::int64_t period_ms);
    void set_filter(const ban::QueryFilter& filter);
    NodeSettings settings() const;

    /// Time of the next PEB poll; the first sample is taken at the first tick.
    std::optional<std::int64_t> next_sample_time() const;
    void schedule_next_sample(std::int64_t t);

    /// Runs every poll due at or before `now`. Returns the seqs ingested.
    std::vector<std::uint64_t> tick(FrameSource& source, std::int64_t now);

    /// Polls at every sampling tick in [from, until). Returns the number of ingests.
    std::size_t run_sampler(FrameSource& source, std::int64_t from, std::int64_t until);

    std::uint64_t oldest_seq() const;
    std::uint64_t newest_seq() const;
    std::size_t buffered() const;
    std::size_t capacity() const;
    std::optional<proto::StoredSample> find(std::uint64_t seq) const;
    std::uint64_t source_failures() const;
    const ban::SensorConfig& config() const noexcept { return config_; }

private:
    std::uint64_t ingest_locked(ban::SensorFrame frame, std::int64_t now);
    proto::ReplyMessage dispatch_locked(const proto::QueryMessage& q);
    void poll_locked(FrameSource& source, std::int64_t t, std::vector<std::uint64_t>& out);

    const ban::SensorConfig config_;
    mutable std::mutex mu_;
    SampleBuffer buffer_;
    NodeSettings settings_;
    bool running_ = true;
    std::optional<std::int64_t> next_sample_;
    bool degraded_pending_ = false;
    std::uint64_t source_failures_ = 0;
};

}  // namespace lrs::op
