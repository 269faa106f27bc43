#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lrs/rng.hpp"

// Seeded stochastic radio links. Delivery is decided per message from a
// distance/orientation curve and a two-state (GOOD/BAD) outage chain; there
// is no propagation physics.
namespace lrs::link {

/// Outage chain step.
inline constexpr std::int64_t kTickMs = 10;

enum class AntennaKind { textile_front, textile_back, omni, directional_30x30, directional_90x15 };

std::string_view to_string(AntennaKind k);
AntennaKind parse_antenna(std::string_view s);

struct AntennaProfile {
    AntennaKind kind = AntennaKind::omni;
    double gain_db = 0.0;
    double beam_h_deg = 360.0;
    double beam_v_deg = 360.0;

    /// Nominal profile; the two directional kinds are the 15 dB tripod antennas.
    static AntennaProfile of(AntennaKind kind);
    bool textile() const noexcept { return kind == AntennaKind::textile_front || kind == AntennaKind::textile_back; }

    bool operator==(const AntennaProfile&) const = default;
};

enum class Orientation { facing_rm, back_to_rm };

std::string_view to_string(Orientation o);
Orientation parse_orientation(std::string_view s);

struct Position {
    double lat = 0.0;
    double lon = 0.0;
    Orientation orientation = Orientation::facing_rm;

    /// Throws ValidationError outside lat [-90, 90], lon (-180, 180].
    void validate() const;
};

struct Calibration {
    double p_near = 0.995;
    double knee_m = 900.0;
    double cutoff_m = 1200.0;
    double back_penalty = 0.6;

    void validate() const;
    bool operator==(const Calibration&) const = default;
};

/// Per-tick transition probabilities of the outage chain.
struct OutageChain {
    double p_good_to_bad = 0.0;
    double p_bad_to_good = 0.0;

    /// Chain whose geometric dwell times have the given means. A
    /// non-positive mean disables leaving that state.
    static OutageChain from_dwell(double mean_good_ms, double mean_bad_ms);
    bool operator==(const OutageChain&) const = default;
};

/// Scheduled outage, [start, end) in simulation ms.
struct OutageWindow {
    std::int64_t start = 0;
    std::int64_t end = 0;

    bool contains(std::int64_t t) const noexcept { return t >= start && t < end; }
    std::int64_t length() const noexcept { return end - start; }
    bool operator==(const OutageWindow&) const = default;
};

struct LinkConfig {
    AntennaProfile near_end = AntennaProfile::of(AntennaKind::omni);
    AntennaProfile far_end = AntennaProfile::of(AntennaKind::omni);
    Calibration calibration;
    OutageChain outage;
    std::int64_t latency_ms = 10;
    double corruption_rate = 0.001;
    std::vector<OutageWindow> forced_outages;

    bool textile_pair() const noexcept { return near_end.textile() || far_end.textile(); }
    void validate() const;
    bool operator==(const LinkConfig&) const = default;
};

enum class ChannelState { good, bad };
enum class LossCause { none, outage, channel };

std::string_view to_string(LossCause c);

struct TransmitOutcome {
    bool delivered = false;
    std::int64_t arrival = 0;
    LossCause cause = LossCause::none;
    /// Set on a delivered message picked for single-bit corruption.
    bool corrupt = false;
    std::uint64_t corruption_draw = 0;
};

class LinkModel {
public:
    LinkModel(LinkConfig config, Rng rng);

    const LinkConfig& config() const noexcept { return config_; }

    /// p_near up to the knee, linear to zero at the cutoff, zero beyond;
    /// scaled by back_penalty when the operator's back faces the far end on
    /// a textile-antenna hop.
    double delivery_probability(double distance_m, Orientation orientation) const;

    /// Advances the chain by dt (rounded down to whole ticks, at least one).
    ChannelState step_outage(std::int64_t dt_ms);

    /// Steps the chain up to `t`; earlier times are a no-op.
    void advance_to(std::int64_t t);

    /// Chain state combined with any forced outage window covering `t`.
    ChannelState state_at(std::int64_t t);
    ChannelState chain_state() const noexcept { return state_; }

    TransmitOutcome transmit(std::int64_t t, double distance_m, Orientation orientation);

private:
    LinkConfig config_;
    Rng chain_rng_;
    Rng channel_rng_;
    ChannelState state_ = ChannelState::good;
    std::int64_t chain_time_ = 0;
};

double delivery_probability(const LinkModel& link, double distance_m, Orientation orientation);
ChannelState step_outage(LinkModel& link, std::int64_t dt_ms);

/// One hop of a path with the geometry at send time.
struct Hop {
    LinkModel* link = nullptr;
    double distance_m = 0.0;
    Orientation orientation = Orientation::facing_rm;
};

struct PathOutcome {
    bool delivered = false;
    std::int64_t arrival = 0;
    /// Index of the hop that dropped the message.
    std::size_t lost_at = 0;
    LossCause cause = LossCause::none;
    bool corrupt = false;
    std::uint64_t corruption_draw = 0;
};

/// The RT relay: a transparent bridge that re-sends whatever the access hop
/// delivered over its long-range link, unchanged.
class RelayNode {
public:
    explicit RelayNode(LinkModel& backhaul) : backhaul_(backhaul) {}

    TransmitOutcome relay_forward(std::int64_t t, double distance_m) {
        ++forwarded_;
        return backhaul_.transmit(t, distance_m, Orientation::facing_rm);
    }

    std::uint64_t forwarded() const noexcept { return forwarded_; }

private:
    LinkModel& backhaul_;
    std::uint64_t forwarded_ = 0;
};

/// Sends across every hop in order, each hop starting when the previous
/// one delivered. A single-hop span is the two-node layout.
PathOutcome send_over(std::span<const Hop> hops, std::int64_t t);

}  // namespace lrs::link
