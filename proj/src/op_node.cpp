#include "lrs/op_node.hpp"

#include <algorithm>

#include "lrs/wire.hpp"

namespace lrs::op {

using proto::QueryKind;
using proto::ReplyKind;
using proto::ReplyMessage;

SampleBuffer::SampleBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("sample buffer capacity must be positive");
}

std::optional<std::uint64_t> SampleBuffer::push(proto::StoredSample s) {
    if (s.seq != newest_seq() + 1 && !(empty() && s.seq >= 1))
        throw LifecycleError("non-contiguous seq " + std::to_string(s.seq) + " after " + std::to_string(newest_seq()));
    samples_.push_back(std::move(s));
    if (samples_.size() > capacity_) {
        auto evicted = samples_.front().seq;
        samples_.pop_front();
        return evicted;
    }
    return std::nullopt;
}

FetchRange SampleBuffer::fetch_after(std::uint64_t last_seq) const {
    FetchRange r;
    if (empty() || last_seq >= newest_seq()) return r;
    const auto oldest = oldest_seq();
    r.first = std::max(last_seq + 1, oldest);
    r.count = static_cast<std::size_t>(std::min<std::uint64_t>(newest_seq() - r.first + 1, proto::kMaxBatch));
    if (last_seq + 1 < oldest) r.gap = proto::GapNotice{last_seq, oldest};
    return r;
}

std::vector<proto::StoredSample> SampleBuffer::copy(const FetchRange& range) const {
    std::vector<proto::StoredSample> out;
    if (range.count == 0) return out;
    auto begin = samples_.begin() + static_cast<std::ptrdiff_t>(range.first - oldest_seq());
    out.assign(begin, begin + static_cast<std::ptrdiff_t>(range.count));
    return out;
}

const proto::StoredSample* SampleBuffer::find(std::uint64_t seq) const {
    if (empty() || seq < oldest_seq() || seq > newest_seq()) return nullptr;
    return &samples_[static_cast<std::size_t>(seq - oldest_seq())];
}

OpNode::OpNode(ban::SensorConfig config, std::size_t capacity) : config_(std::move(config)), buffer_(capacity) {}

void OpNode::stop() {
    std::lock_guard lock(mu_);
    running_ = false;
}

bool OpNode::running() const {
    std::lock_guard lock(mu_);
    return running_;
}

std::uint64_t OpNode::ingest(const ban::SensorFrame& frame, std::int64_t now) {
    std::lock_guard lock(mu_);
    return ingest_locked(frame, now);
}

std::uint64_t OpNode::ingest_locked(ban::SensorFrame frame, std::int64_t now) {
    if (!running_) throw LifecycleError("ingest on a stopped node");
    if (!buffer_.empty() && frame.device.peb_timestamp < buffer_.find(buffer_.newest_seq())->peb_timestamp)
        throw ValidationError("PEB timestamp went backwards");
    if (degraded_pending_) {
        frame.device.status_code |= ban::kStatusEquipmentDegraded;
        ban::seal(frame, config_);
        degraded_pending_ = false;
    }
    proto::StoredSample s;
    s.seq = buffer_.newest_seq() + 1;
    s.peb_timestamp = frame.device.peb_timestamp;
    s.ingest_time = now;
    s.frame = ban::serialize(frame, config_);
    buffer_.push(std::move(s));
    return buffer_.newest_seq();
}

ReplyMessage OpNode::handle_query(const proto::QueryMessage& q, std::int64_t /*now*/) {
    std::lock_guard lock(mu_);
    return dispatch_locked(q);
}

ReplyMessage OpNode::dispatch_locked(const proto::QueryMessage& q) {
    if (!running_) return ReplyMessage::make_error(q.request_id, proto::ErrorCode::lifecycle, "node stopped");
    ReplyMessage r;
    r.request_id = q.request_id;
    switch (q.kind) {
        case QueryKind::get_data: {
            auto range = buffer_.fetch_after(q.last_seq);
            r.kind = ReplyKind::data;
            r.samples = buffer_.copy(range);
            r.gap = range.gap;
            return r;
        }
        case QueryKind::set_period:
            if (q.period_ms < kMinSamplingPeriodMs)
                return ReplyMessage::make_error(q.request_id, proto::ErrorCode::validation,
                                                "sampling period below " + std::to_string(kMinSamplingPeriodMs) + " ms");
            settings_.sampling_period_ms = q.period_ms;
            r.kind = ReplyKind::period_ack;
            r.ack = true;
            return r;
        case QueryKind::set_filter:
            try {
                ban::validate_filter(q.filter, config_);
            } catch (const ValidationError& e) {
                return ReplyMessage::make_error(q.request_id, proto::ErrorCode::validation, e.what());
            }
            settings_.query_filter = q.filter;
            r.kind = ReplyKind::filter_ack;
            r.ack = true;
            return r;
        case QueryKind::ping:
            r.kind = ReplyKind::pong;
            r.newest_seq = buffer_.newest_seq();
            return r;
    }
    return ReplyMessage::make_error(q.request_id, proto::ErrorCode::unsupported, "unsupported query kind");
}

Bytes OpNode::handle_bytes(std::span<const std::uint8_t> request, std::int64_t now) {
    proto::QueryMessage q;
    try {
        q = wire::decode_query(request);
    } catch (const ProtocolError& e) {
        return wire::encode(
            ReplyMessage::make_error(wire::peek_request_id(request), proto::ErrorCode::malformed, e.what()));
    }
    return wire::encode(handle_query(q, now));
}

void OpNode::set_period(std::int64_t period_ms) {
    if (period_ms < kMinSamplingPeriodMs)
        throw ValidationError("sampling period " + std::to_string(period_ms) + " ms below the " +
                              std::to_string(kMinSamplingPeriodMs) + " ms minimum");
    std::lock_guard lock(mu_);
    settings_.sampling_period_ms = period_ms;
}

void OpNode::set_filter(const ban::QueryFilter& filter) {
    ban::validate_filter(filter, config_);
    std::lock_guard lock(mu_);
    settings_.query_filter = filter;
}

NodeSettings OpNode::settings() const {
    std::lock_guard lock(mu_);
    return settings_;
}

std::optional<std::int64_t> OpNode::next_sample_time() const {
    std::lock_guard lock(mu_);
    return next_sample_;
}

void OpNode::schedule_next_sample(std::int64_t t) {
    std::lock_guard lock(mu_);
    next_sample_ = t;
}

std::vector<std::uint64_t> OpNode::tick(FrameSource& source, std::int64_t now) {
    std::vector<std::uint64_t> out;
    for (;;) {
        std::int64_t t;
        ban::QueryFilter filter;
        {
            std::lock_guard lock(mu_);
            if (!running_) break;
            if (!next_sample_) next_sample_ = now;
            if (*next_sample_ > now) break;
            t = *next_sample_;
            filter = settings_.query_filter;
            *next_sample_ += settings_.sampling_period_ms;
        }
        // The PEB is polled outside the lock so queries are never held up by the serial read.
        auto frame = source.poll(t);
        std::lock_guard lock(mu_);
        if (!frame) {
            ++source_failures_;
            degraded_pending_ = true;
            continue;
        }
        out.push_back(ingest_locked(ban::apply_query_filter(*frame, filter, config_), t));
    }
    return out;
}

std::size_t OpNode::run_sampler(FrameSource& source, std::int64_t from, std::int64_t until) {
    {
        std::lock_guard lock(mu_);
        if (!next_sample_ || *next_sample_ < from) next_sample_ = from;
    }
    std::size_t n = 0;
    for (;;) {
        auto next = next_sample_time();
        if (!next || *next >= until) break;
        n += tick(source, *next).size();
        if (next_sample_time() == next) break;  // stopped
    }
    return n;
}

std::uint64_t OpNode::oldest_seq() const {
    std::lock_guard lock(mu_);
    return buffer_.oldest_seq();
}

std::uint64_t OpNode::newest_seq() const {
    std::lock_guard lock(mu_);
    return buffer_.newest_seq();
}

std::size_t OpNode::buffered() const {
    std::lock_guard lock(mu_);
    return buffer_.size();
}

std::size_t OpNode::capacity() const {
    std::lock_guard lock(mu_);
    return buffer_.capacity();
}

std::optional<proto::StoredSample> OpNode::find(std::uint64_t seq) const {
    std::lock_guard lock(mu_);
    if (auto* s = buffer_.find(seq)) return *s;
    return std::nullopt;
}

std::uint64_t OpNode::source_failures() const {
    std::lock_guard lock(mu_);
    return source_failures_;
}

}  // namespace lrs::op
