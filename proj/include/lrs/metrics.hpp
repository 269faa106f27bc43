#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Delivery statistics of an acquisition session and the GPS helpers used to
// attach a node-to-node distance to each sample.
namespace lrs::metrics {

inline constexpr double kEarthRadiusM = 6371000.0;
/// Offset-corrected delay above which a sample is not real-time.
inline constexpr std::int64_t kRealtimeLimitMs = 1000;
inline constexpr double kHdopGate = 1.5;
inline constexpr int kMinSatellites = 7;
inline constexpr std::int64_t kReferenceWindowMs = 120000;

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    bool operator==(const GeoPoint&) const = default;
};

/// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
double haversine(GeoPoint a, GeoPoint b);

struct GpsFix {
    double lat = 0.0;
    double lon = 0.0;
    double hdop = 99.0;
    int satellites = 0;
    std::int64_t time = 0;

    bool usable() const noexcept { return hdop < kHdopGate && satellites >= kMinSatellites; }
};

/// Mean lat/lon of the usable fixes. Throws NoReferenceError when none pass the gate.
GeoPoint reference_position(std::span<const GpsFix> fixes);

/// Same, restricted to fixes with time in [window_start, window_start + window_ms).
GeoPoint reference_position(std::span<const GpsFix> fixes, std::int64_t window_start,
                            std::int64_t window_ms = kReferenceWindowMs);

struct SampleRecord {
    std::uint64_t seq = 0;
    std::int64_t peb_timestamp = 0;
    /// Empty when the sample never arrived.
    std::optional<std::int64_t> receive_timestamp;
    bool parity_ok = true;
    std::optional<double> distance_m;
    /// Free-form grouping tag (e.g. walking leg); empty when unused.
    std::string leg;

    bool received_valid() const noexcept { return receive_timestamp.has_value() && parity_ok; }
    bool operator==(const SampleRecord&) const = default;
};

struct SessionLog {
    std::string name;
    std::int64_t begin_time = 0;
    std::int64_t end_time = 0;
    double rate_hz = 1.0;
    std::vector<SampleRecord> records;

    bool operator==(const SessionLog&) const = default;
};

struct DistanceBin {
    double start_m = 0.0;
    double end_m = 0.0;
    std::uint64_t expected = 0;
    std::uint64_t received = 0;
    std::uint64_t realtime = 0;

    double pct_correct() const;
    double pct_realtime() const;
    bool operator==(const DistanceBin&) const = default;
};

struct SessionMetrics {
    std::uint64_t expected = 0;
    std::uint64_t received_valid = 0;
    std::uint64_t realtime = 0;
    double pct_correct = 0.0;
    double pct_realtime = 0.0;
    std::optional<std::int64_t> offset_ms;
    std::vector<DistanceBin> bins;

    bool operator==(const SessionMetrics&) const = default;
};

/// floor((end - begin) / period) + 1: both endpoints count.
std::uint64_t expected_samples(const SessionLog& log);

/// 100 * received_valid / expected. Throws InvalidSessionError for expected == 0
/// or received_valid > expected.
double percent_correct(std::uint64_t received_valid, std::uint64_t expected);

/// Smallest receive - PEB delay over valid samples: the clock offset estimate.
std::optional<std::int64_t> delay_offset(const SessionLog& log);

bool is_realtime(const SampleRecord& r, std::int64_t offset_ms);

/// 100 * realtime / expected; 0 when nothing was received.
double percent_realtime(const SessionLog& log);

std::uint64_t count_received_valid(const SessionLog& log);

/// Bins of `bin_m` meters over records carrying a distance; `leg` restricts
/// to records with that tag. Empty bins are omitted.
std::vector<DistanceBin> distance_bins(const SessionLog& log, double bin_m, const std::string* leg = nullptr,
                                       std::optional<std::int64_t> offset = std::nullopt);

SessionMetrics compute_session_metrics(const SessionLog& log, double bin_m = 25.0);

/// Two decimals, as reported.
std::string format_percent(double pct);

/// Rank correlation with average ranks for ties.
double spearman(std::span<const double> xs, std::span<const double> ys);

// CSV outputs, formats described in docs/file-formats.md.
void write_session_csv(std::ostream& out, const SessionLog& log);
void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const std::string& session, const SessionMetrics& m);
void write_bins_header(std::ostream& out);
void write_bins_rows(std::ostream& out, const std::string& session, const std::string& leg,
                     std::span<const DistanceBin> bins);

}  // namespace lrs::metrics
