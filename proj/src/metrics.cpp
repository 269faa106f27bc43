#include "lrs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>

#include "lrs/error.hpp"

namespace lrs::metrics {
namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

std::int64_t period_ms(const SessionLog& log) {
    if (!(log.rate_hz > 0.0)) throw InvalidSessionError("production rate must be positive");
    return std::llround(1000.0 / log.rate_hz);
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace

double haversine(GeoPoint a, GeoPoint b) {
    double dlat = radians(b.lat - a.lat);
    double dlon = radians(b.lon - a.lon);
    double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
               std::cos(radians(a.lat)) * std::cos(radians(b.lat)) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

GeoPoint reference_position(std::span<const GpsFix> fixes) {
    double lat = 0.0, lon = 0.0;
    std::size_t n = 0;
    for (const auto& f : fixes) {
        if (!f.usable()) continue;
        lat += f.lat;
        lon += f.lon;
        ++n;
    }
    if (n == 0) throw NoReferenceError("no usable GPS fix (hdop < 1.5, >= 7 satellites) in the window");
    return {lat / static_cast<double>(n), lon / static_cast<double>(n)};
}

GeoPoint reference_position(std::span<const GpsFix> fixes, std::int64_t window_start, std::int64_t window_ms) {
    std::vector<GpsFix> in_window;
    for (const auto& f : fixes)
        if (f.time >= window_start && f.time < window_start + window_ms) in_window.push_back(f);
    return reference_position(in_window);
}

double DistanceBin::pct_correct() const {
    return expected == 0 ? 0.0 : 100.0 * static_cast<double>(received) / static_cast<double>(expected);
}

double DistanceBin::pct_realtime() const {
    return expected == 0 ? 0.0 : 100.0 * static_cast<double>(realtime) / static_cast<double>(expected);
}

std::uint64_t expected_samples(const SessionLog& log) {
    if (log.end_time <= log.begin_time) throw InvalidSessionError("session end must be after its beginning");
    return static_cast<std::uint64_t>((log.end_time - log.begin_time) / period_ms(log)) + 1;
}

double percent_correct(std::uint64_t received_valid, std::uint64_t expected) {
    if (expected == 0) throw InvalidSessionError("no expected samples");
    if (received_valid > expected) throw InvalidSessionError("more valid samples than expected");
    return 100.0 * static_cast<double>(received_valid) / static_cast<double>(expected);
}

std::optional<std::int64_t> delay_offset(const SessionLog& log) {
    std::optional<std::int64_t> best;
    for (const auto& r : log.records) {
        if (!r.received_valid()) continue;
        auto d = *r.receive_timestamp - r.peb_timestamp;
        if (!best || d < *best) best = d;
    }
    return best;
}

bool is_realtime(const SampleRecord& r, std::int64_t offset_ms) {
    return r.received_valid() && (*r.receive_timestamp - r.peb_timestamp) - offset_ms <= kRealtimeLimitMs;
}

std::uint64_t count_received_valid(const SessionLog& log) {
    return static_cast<std::uint64_t>(
        std::count_if(log.records.begin(), log.records.end(), [](const auto& r) { return r.received_valid(); }));
}

double percent_realtime(const SessionLog& log) {
    auto offset = delay_offset(log);
    if (!offset) return 0.0;
    auto expected = expected_samples(log);
    auto realtime = std::count_if(log.records.begin(), log.records.end(),
                                  [&](const auto& r) { return is_realtime(r, *offset); });
    return 100.0 * static_cast<double>(realtime) / static_cast<double>(expected);
}

std::vector<DistanceBin> distance_bins(const SessionLog& log, double bin_m, const std::string* leg,
                                       std::optional<std::int64_t> offset) {
    if (!(bin_m > 0.0)) throw InvalidSessionError("bin width must be positive");
    if (!offset) offset = delay_offset(log);
    std::map<std::int64_t, DistanceBin> bins;
    for (const auto& r : log.records) {
        if (!r.distance_m || (leg && r.leg != *leg)) continue;
        auto k = static_cast<std::int64_t>(std::floor(*r.distance_m / bin_m));
        auto& b = bins[k];
        b.start_m = static_cast<double>(k) * bin_m;
        b.end_m = b.start_m + bin_m;
        ++b.expected;
        if (r.received_valid()) ++b.received;
        if (offset && is_realtime(r, *offset)) ++b.realtime;
    }
    std::vector<DistanceBin> out;
    for (auto& [k, b] : bins) out.push_back(b);
    return out;
}

SessionMetrics compute_session_metrics(const SessionLog& log, double bin_m) {
    SessionMetrics m;
    m.expected = expected_samples(log);
    m.received_valid = count_received_valid(log);
    m.offset_ms = delay_offset(log);
    if (m.offset_ms)
        m.realtime = static_cast<std::uint64_t>(std::count_if(
            log.records.begin(), log.records.end(), [&](const auto& r) { return is_realtime(r, *m.offset_ms); }));
    m.pct_correct = percent_correct(m.received_valid, m.expected);
    m.pct_realtime = 100.0 * static_cast<double>(m.realtime) / static_cast<double>(m.expected);
    m.bins = distance_bins(log, bin_m, nullptr, m.offset_ms);
    return m;
}

std::string format_percent(double pct) { return fixed(pct, 2); }

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw InvalidSessionError("spearman needs two equal-length series");
    auto rx = average_ranks(xs);
    auto ry = average_ranks(ys);
    double n = static_cast<double>(xs.size());
    double mx = (n + 1) / 2, my = mx;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

void write_session_csv(std::ostream& out, const SessionLog& log) {
    auto offset = delay_offset(log);
    out << "seq,peb_timestamp_ms,receive_timestamp_ms,parity_ok,realtime,distance_m,leg\n";
    for (const auto& r : log.records) {
        out << r.seq << ',' << r.peb_timestamp << ',';
        if (r.receive_timestamp) out << *r.receive_timestamp;
        out << ',' << (r.parity_ok ? 1 : 0) << ',' << (offset && is_realtime(r, *offset) ? 1 : 0) << ',';
        if (r.distance_m) out << fixed(*r.distance_m, 2);
        out << ',' << r.leg << '\n';
    }
}

void write_summary_header(std::ostream& out) {
    out << "session,expected,received,realtime,pct_correct,pct_realtime,offset_ms\n";
}

void write_summary_row(std::ostream& out, const std::string& session, const SessionMetrics& m) {
    out << session << ',' << m.expected << ',' << m.received_valid << ',' << m.realtime << ','
        << format_percent(m.pct_correct) << ',' << format_percent(m.pct_realtime) << ',';
    if (m.offset_ms) out << *m.offset_ms;
    out << '\n';
}

void write_bins_header(std::ostream& out) {
    out << "session,leg,bin_start_m,bin_end_m,expected,received,realtime,pct_correct,pct_realtime\n";
}

void write_bins_rows(std::ostream& out, const std::string& session, const std::string& leg,
                     std::span<const DistanceBin> bins) {
    for (const auto& b : bins)
        out << session << ',' << leg << ',' << fixed(b.start_m, 0) << ',' << fixed(b.end_m, 0) << ',' << b.expected
            << ',' << b.received << ',' << b.realtime << ',' << format_percent(b.pct_correct()) << ','
            << format_percent(b.pct_realtime()) << '\n';
}

}  // namespace lrs::metrics
