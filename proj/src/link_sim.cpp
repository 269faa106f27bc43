#include "lrs/link_sim.hpp"

#include <algorithm>
#include <string>

#include "lrs/error.hpp"

namespace lrs::link {

std::string_view to_string(AntennaKind k) {
    switch (k) {
        case AntennaKind::textile_front: return "textile_front";
        case AntennaKind::textile_back: return "textile_back";
        case AntennaKind::omni: return "omni";
        case AntennaKind::directional_30x30: return "directional_30x30";
        case AntennaKind::directional_90x15: return "directional_90x15";
    }
    return "?";
}

AntennaKind parse_antenna(std::string_view s) {
    for (auto k : {AntennaKind::textile_front, AntennaKind::textile_back, AntennaKind::omni,
                   AntennaKind::directional_30x30, AntennaKind::directional_90x15})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown antenna '" + std::string(s) + "'");
}

AntennaProfile AntennaProfile::of(AntennaKind kind) {
    switch (kind) {
        case AntennaKind::textile_front:
        case AntennaKind::textile_back: return {kind, 3.0, 120.0, 120.0};
        case AntennaKind::omni: return {kind, 5.0, 360.0, 60.0};
        case AntennaKind::directional_30x30: return {kind, 15.0, 30.0, 30.0};
        case AntennaKind::directional_90x15: return {kind, 15.0, 90.0, 15.0};
    }
    return {};
}

std::string_view to_string(Orientation o) { return o == Orientation::facing_rm ? "facing_rm" : "back_to_rm"; }

Orientation parse_orientation(std::string_view s) {
    if (s == "facing_rm") return Orientation::facing_rm;
    if (s == "back_to_rm") return Orientation::back_to_rm;
    throw ConfigError("unknown orientation '" + std::string(s) + "'");
}

std::string_view to_string(LossCause c) {
    switch (c) {
        case LossCause::none: return "none";
        case LossCause::outage: return "outage";
        case LossCause::channel: return "channel";
    }
    return "?";
}

void Position::validate() const {
    if (!(lat >= -90.0 && lat <= 90.0)) throw ValidationError("latitude out of range");
    if (!(lon > -180.0 && lon <= 180.0)) throw ValidationError("longitude out of range");
}

void Calibration::validate() const {
    if (!(p_near > 0.0 && p_near <= 1.0)) throw ConfigError("p_near must be in (0, 1]");
    if (!(knee_m > 0.0 && knee_m < cutoff_m)) throw ConfigError("need 0 < knee_m < cutoff_m");
    if (!(back_penalty > 0.0 && back_penalty <= 1.0)) throw ConfigError("back_penalty must be in (0, 1]");
}

OutageChain OutageChain::from_dwell(double mean_good_ms, double mean_bad_ms) {
    OutageChain c;
    auto tick = static_cast<double>(kTickMs);
    if (mean_good_ms > 0.0) c.p_good_to_bad = std::min(1.0, tick / mean_good_ms);
    if (mean_bad_ms > 0.0) c.p_bad_to_good = std::min(1.0, tick / mean_bad_ms);
    return c;
}

void LinkConfig::validate() const {
    calibration.validate();
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(outage.p_good_to_bad) || !prob(outage.p_bad_to_good)) throw ConfigError("outage probabilities must be in [0, 1]");
    if (!prob(corruption_rate)) throw ConfigError("corruption rate must be in [0, 1]");
    if (latency_ms < 0) throw ConfigError("latency must be non-negative");
    for (const auto& w : forced_outages)
        if (w.end <= w.start) throw ConfigError("outage window must have end > start");
}

LinkModel::LinkModel(LinkConfig config, Rng rng)
    : config_(std::move(config)), chain_rng_(rng.fork(1)), channel_rng_(rng.fork(2)) {
    config_.validate();
}

double LinkModel::delivery_probability(double distance_m, Orientation orientation) const {
    const auto& c = config_.calibration;
    double p;
    if (distance_m <= c.knee_m)
        p = c.p_near;
    else if (distance_m >= c.cutoff_m)
        p = 0.0;
    else
        p = c.p_near * (c.cutoff_m - distance_m) / (c.cutoff_m - c.knee_m);
    if (orientation == Orientation::back_to_rm && config_.textile_pair()) p *= c.back_penalty;
    return p;
}

ChannelState LinkModel::step_outage(std::int64_t dt_ms) {
    auto ticks = std::max<std::int64_t>(1, dt_ms / kTickMs);
    const auto& o = config_.outage;
    for (std::int64_t i = 0; i < ticks; ++i) {
        if (state_ == ChannelState::good) {
            if (o.p_good_to_bad > 0.0 && chain_rng_.bernoulli(o.p_good_to_bad)) state_ = ChannelState::bad;
        } else {
            if (o.p_bad_to_good > 0.0 && chain_rng_.bernoulli(o.p_bad_to_good)) state_ = ChannelState::good;
        }
    }
    chain_time_ += ticks * kTickMs;
    return state_;
}

void LinkModel::advance_to(std::int64_t t) {
    if (t - chain_time_ >= kTickMs) step_outage(((t - chain_time_) / kTickMs) * kTickMs);
}

ChannelState LinkModel::state_at(std::int64_t t) {
    advance_to(t);
    for (const auto& w : config_.forced_outages)
        if (w.contains(t)) return ChannelState::bad;
    return state_;
}

TransmitOutcome LinkModel::transmit(std::int64_t t, double distance_m, Orientation orientation) {
    TransmitOutcome out;
    if (state_at(t) == ChannelState::bad) {
        out.cause = LossCause::outage;
        return out;
    }
    if (!channel_rng_.bernoulli(delivery_probability(distance_m, orientation))) {
        out.cause = LossCause::channel;
        return out;
    }
    out.delivered = true;
    out.arrival = t + config_.latency_ms;
    if (channel_rng_.bernoulli(config_.corruption_rate)) {
        out.corrupt = true;
        out.corruption_draw = channel_rng_.next();
    }
    return out;
}

double delivery_probability(const LinkModel& link, double distance_m, Orientation orientation) {
    return link.delivery_probability(distance_m, orientation);
}

ChannelState step_outage(LinkModel& link, std::int64_t dt_ms) {
    if (dt_ms <= 0) throw ValidationError("step_outage needs dt > 0");
    return link.step_outage(dt_ms);
}

PathOutcome send_over(std::span<const Hop> hops, std::int64_t t) {
    PathOutcome path;
    path.arrival = t;
    for (std::size_t i = 0; i < hops.size(); ++i) {
        auto hop = hops[i].link->transmit(path.arrival, hops[i].distance_m, hops[i].orientation);
        if (!hop.delivered) {
            path.lost_at = i;
            path.cause = hop.cause;
            return path;
        }
        path.arrival = hop.arrival;
        if (hop.corrupt && !path.corrupt) {
            path.corrupt = true;
            path.corruption_draw = hop.corruption_draw;
        }
    }
    path.delivered = true;
    return path;
}

}  // namespace lrs::link
