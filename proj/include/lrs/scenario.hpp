#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lrs/link_sim.hpp"
#include "lrs/metrics.hpp"
#include "lrs/rm_node.hpp"

namespace lrs::harness {

/// Meters east/north on the local tangent plane.
struct PlanePoint {
    double east_m = 0.0;
    double north_m = 0.0;

    bool operator==(const PlanePoint&) const = default;
};

double plane_distance(PlanePoint a, PlanePoint b);

/// Flat-earth conversion around `origin`; good to centimeters over a few km.
metrics::GeoPoint to_geo(metrics::GeoPoint origin, PlanePoint p);

enum class OrientationRule { automatic, facing_rm, back_to_rm };

std::string_view to_string(OrientationRule r);
OrientationRule parse_orientation_rule(std::string_view s);

struct OperatorSpec {
    std::string id;
    /// Waypoints relative to the node the operator talks to (RT or RM),
    /// walked at the scenario speed from the start of every session.
    std::vector<PlanePoint> path{{0.0, 5.0}};
    /// automatic: back to the far node while moving away, facing otherwise.
    OrientationRule orientation = OrientationRule::automatic;
    double battery_start = 1.0;
    double battery_drain_per_h = 0.05;
    /// Windows in session time where the CO sensor reads well above the limit.
    std::vector<link::OutageWindow> co_spikes;
    /// Forced outages of this operator's access hop, absolute simulation time.
    std::vector<link::OutageWindow> access_outages;

    bool operator==(const OperatorSpec&) const = default;
};

struct SessionSpec {
    std::string name;
    std::int64_t duration_ms = 0;
    /// RT distance north of the RM; relay layouts only.
    double site_m = 0.0;

    bool operator==(const SessionSpec&) const = default;
};

/// Where the operator is during a session and which way they face.
struct Pose {
    PlanePoint position;
    link::Orientation orientation = link::Orientation::facing_rm;
    /// "out" moving away, "back" approaching, "static" otherwise.
    std::string leg;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 1;
    bool relay = false;
    metrics::GeoPoint origin{43.7200, 10.4000};
    double speed_mps = 1.4;
    double gps_jitter_m = 1.0;
    /// Share of fixes reported with poor quality (fail the hdop/satellite gate).
    double gps_dropout = 0.02;
    std::int64_t sampling_period_ms = 1000;
    std::size_t buffer_capacity = 14400;
    /// RM keeps polling this long after sampling stops.
    std::int64_t drain_ms = 60000;
    std::int64_t peb_clock_base_ms = 9 * 3600 * 1000;
    std::int64_t rm_clock_base_ms = 9 * 3600 * 1000 + 2345;
    double bin_m = 25.0;
    /// OP to RT (or RM when there is no relay); near end is the OP.
    link::LinkConfig access;
    /// RT to RM; near end is the RT.
    link::LinkConfig backhaul;
    rm::RmSettings rm;
    std::vector<OperatorSpec> operators;
    std::vector<SessionSpec> sessions;

    /// Throws ConfigError.
    void validate() const;

    std::int64_t session_start(std::size_t index) const;
    std::int64_t end_time() const;
    /// Time to walk `op`'s path once.
    std::int64_t path_duration_ms(const OperatorSpec& op) const;
    /// Position of the node `op` talks to during `session`.
    PlanePoint anchor(const SessionSpec& session) const;
    Pose pose(const OperatorSpec& op, const SessionSpec& session, std::int64_t session_time) const;
    /// Distance from the pose to the anchor (the hop distance).
    double access_distance(const Pose& pose, const SessionSpec& session) const;

    bool operator==(const Scenario&) const = default;
};

/// Two-node walk out to 400 m and back, four repetitions. case_name is
/// "omni" or "directional".
Scenario scenario_short_range(std::string_view case_name);
/// Three-node layout, 10-min session at each of 11 RT sites from 280 to 1081 m.
Scenario scenario_long_range();
/// Three operators around the post, with a CO spike, a dropout and a
/// battery running low; meant for the gateway and console.
Scenario scenario_field_demo();

std::vector<std::string> builtin_names();
/// Throws NotFoundError.
Scenario builtin(std::string_view name);

/// INI-style text: sections [session], [nodes], [links], [mobility].
Scenario load_scenario(std::istream& in);
Scenario load_scenario_file(const std::string& path);
void write_scenario(std::ostream& out, const Scenario& s);

/// Builtin name or scenario file path.
Scenario resolve_scenario(const std::string& name_or_path);

std::vector<double> long_range_sites();

}  // namespace lrs::harness
