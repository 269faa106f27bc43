#pragma once

// Reference computations written independently of the library, shared by the
// unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "lrs/metrics.hpp"
#include "lrs/protocol.hpp"

namespace oracle {

/// Central angle from the unit-vector cross and dot products.
inline double great_circle_m(double lat1, double lon1, double lat2, double lon2) {
    constexpr double r = 6371000.0;
    auto rad = [](double d) { return d * std::numbers::pi / 180.0; };
    auto vec = [&](double lat, double lon) {
        return std::vector<double>{std::cos(rad(lat)) * std::cos(rad(lon)), std::cos(rad(lat)) * std::sin(rad(lon)),
                                   std::sin(rad(lat))};
    };
    auto a = vec(lat1, lon1);
    auto b = vec(lat2, lon2);
    double cx = a[1] * b[2] - a[2] * b[1];
    double cy = a[2] * b[0] - a[0] * b[2];
    double cz = a[0] * b[1] - a[1] * b[0];
    double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    return r * std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot);
}

/// 1 Hz log whose expected count is `expected`, with the first `valid`
/// samples received after a constant delay and the rest missing.
inline lrs::metrics::SessionLog tally_log(std::uint64_t valid, std::uint64_t expected) {
    lrs::metrics::SessionLog log;
    log.name = "tally";
    log.begin_time = 1000000;
    log.end_time = log.begin_time + static_cast<std::int64_t>(expected - 1) * 1000;
    for (std::uint64_t i = 0; i < expected; ++i) {
        lrs::metrics::SampleRecord r;
        r.seq = i + 1;
        r.peb_timestamp = log.begin_time + static_cast<std::int64_t>(i) * 1000;
        if (i < valid) r.receive_timestamp = r.peb_timestamp + 40;
        log.records.push_back(r);
    }
    return log;
}

/// Spearman's rho for series without ties.
inline double spearman_no_ties(const std::vector<double>& x, const std::vector<double>& y) {
    auto rank = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double below = 0;
            for (double w : v) below += w < v[i];
            r[i] = below + 1;
        }
        return r;
    };
    auto rx = rank(x);
    auto ry = rank(y);
    double n = static_cast<double>(x.size());
    double d2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1));
}

/// Reply to GET_DATA(last_seq) over a buffer holding `retained` (ascending):
/// filter, sort, take 50, and a gap notice when the next wanted seq is gone.
struct Fetch {
    std::vector<std::uint64_t> seqs;
    std::optional<lrs::proto::GapNotice> gap;
};

inline Fetch fetch_after(const std::vector<std::uint64_t>& retained, std::uint64_t last_seq) {
    Fetch e;
    for (auto s : retained)
        if (s > last_seq) e.seqs.push_back(s);
    std::sort(e.seqs.begin(), e.seqs.end());
    if (e.seqs.size() > 50) e.seqs.resize(50);
    if (!retained.empty() && last_seq + 1 < retained.front() && last_seq < retained.back())
        e.gap = lrs::proto::GapNotice{last_seq, retained.front()};
    return e;
}

}  // namespace oracle
