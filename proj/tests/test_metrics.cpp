#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "lrs/error.hpp"
#include "lrs/metrics.hpp"
#include "lrs/rng.hpp"
#include "oracles.hpp"

using namespace lrs;
using namespace lrs::metrics;

namespace {

SessionLog delays_log(const std::vector<std::int64_t>& delays) {
    SessionLog log;
    log.begin_time = 0;
    log.end_time = static_cast<std::int64_t>(delays.size() - 1) * 1000;
    for (std::size_t i = 0; i < delays.size(); ++i) {
        SampleRecord r;
        r.seq = i + 1;
        r.peb_timestamp = static_cast<std::int64_t>(i) * 1000;
        r.receive_timestamp = r.peb_timestamp + delays[i];
        log.records.push_back(r);
    }
    return log;
}

}  // namespace

TEST_CASE("reference tallies give the reported percentages") {
    struct Tally {
        std::uint64_t valid, expected;
        const char* printed;
    };
    for (auto t : {Tally{4979, 5039, "98.81"}, Tally{2644, 2672, "98.95"}, Tally{2335, 2367, "98.65"},
                   Tally{6045, 6149, "98.31"}}) {
        auto log = oracle::tally_log(t.valid, t.expected);
        auto m = compute_session_metrics(log);
        CHECK(m.expected == t.expected);
        CHECK(m.received_valid == t.valid);
        CHECK(format_percent(m.pct_correct) == t.printed);
        CHECK(std::abs(m.pct_correct - std::stod(t.printed)) <= 0.005);
    }
    // The two short-range sessions add up to the combined figure.
    CHECK(2644 + 2335 == 4979);
    CHECK(2672 + 2367 == 5039);
}

TEST_CASE("expected count includes both endpoints") {
    SessionLog log;
    log.begin_time = 5000;
    log.end_time = 5000 + 600000;
    CHECK(expected_samples(log) == 601);
    log.rate_hz = 2.0;
    CHECK(expected_samples(log) == 1201);
    log.end_time = log.begin_time;
    CHECK_THROWS_AS(expected_samples(log), InvalidSessionError);
    CHECK_THROWS_AS(percent_correct(0, 0), InvalidSessionError);
    CHECK_THROWS_AS(percent_correct(5, 4), InvalidSessionError);
}

TEST_CASE("realtime percentage after offset removal") {
    auto log = delays_log({50, 50, 50, 1500, 3000});
    CHECK(delay_offset(log) == 50);
    CHECK(format_percent(percent_realtime(log)) == "60.00");
    CHECK(percent_realtime(delays_log({700, 700, 700})) == 100.0);
    // boundary: exactly one second late still counts
    CHECK(percent_realtime(delays_log({0, 1000, 1001})) == doctest::Approx(200.0 / 3));

    SessionLog empty;
    empty.end_time = 4000;
    CHECK(percent_realtime(empty) == 0.0);
    CHECK_FALSE(delay_offset(empty));
}

TEST_CASE("realtime is invariant under a receive clock shift") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::int64_t> d;
        for (int i = 0; i < 200; ++i) d.push_back(static_cast<std::int64_t>(rng.below(4000)));
        auto log = delays_log(d);
        for (auto& r : log.records)
            if (rng.bernoulli(0.1)) r.receive_timestamp.reset();
            else if (rng.bernoulli(0.02)) r.parity_ok = false;
        auto base = compute_session_metrics(log);
        auto shift = static_cast<std::int64_t>(rng.below(10000000)) - 5000000;
        for (auto& r : log.records)
            if (r.receive_timestamp) *r.receive_timestamp += shift;
        auto moved = compute_session_metrics(log);
        CHECK(moved.pct_realtime == base.pct_realtime);
        CHECK(moved.pct_correct == base.pct_correct);
        CHECK(0.0 <= base.pct_realtime);
        CHECK(base.pct_realtime <= base.pct_correct);
        CHECK(base.pct_correct <= 100.0);
    }
}

TEST_CASE("parity failures count as missing") {
    auto log = delays_log({10, 10, 10, 10});
    log.records[1].parity_ok = false;
    auto m = compute_session_metrics(log);
    CHECK(m.received_valid == 3);
    CHECK(m.realtime == 3);
    CHECK(m.pct_correct == 75.0);
}

TEST_CASE("haversine fixed cases") {
    GeoPoint a{43.72, 10.40};
    CHECK(haversine(a, a) == 0.0);
    CHECK(haversine({0, 0}, {0, 1}) == doctest::Approx(2 * std::numbers::pi * kEarthRadiusM / 360).epsilon(0.001));
    CHECK(haversine({0, 0}, {0, 180}) == doctest::Approx(std::numbers::pi * kEarthRadiusM).epsilon(0.001));
    CHECK(haversine({90, 0}, {-90, 0}) == doctest::Approx(std::numbers::pi * kEarthRadiusM).epsilon(0.001));
}

TEST_CASE("haversine agrees with an independent oracle and is a metric") {
    Rng rng(17);
    for (int i = 0; i < 10000; ++i) {
        double lat = rng.uniform(-70, 70);
        double lon = rng.uniform(-179, 179);
        double dlat = rng.uniform(-0.018, 0.018);
        double dlon = rng.uniform(-0.018, 0.018);
        GeoPoint p{lat, lon};
        GeoPoint q{lat + dlat, lon + dlon};
        double want = oracle::great_circle_m(p.lat, p.lon, q.lat, q.lon);
        double got = haversine(p, q);
        if (want > 1.0) CHECK(std::abs(got - want) / want < 0.001);
        CHECK(haversine(q, p) == doctest::Approx(got).epsilon(1e-12));
    }
    for (int i = 0; i < 2000; ++i) {
        GeoPoint a{rng.uniform(-80, 80), rng.uniform(-180, 180)};
        GeoPoint b{rng.uniform(-80, 80), rng.uniform(-180, 180)};
        GeoPoint c{rng.uniform(-80, 80), rng.uniform(-180, 180)};
        CHECK(haversine(a, c) <= (haversine(a, b) + haversine(b, c)) * (1 + 1e-6));
    }
}

TEST_CASE("reference position gate") {
    std::vector<GpsFix> same(10, GpsFix{43.7, 10.4, 0.9, 8, 0});
    auto p = reference_position(same);
    CHECK(p.lat == doctest::Approx(43.7));
    CHECK(p.lon == doctest::Approx(10.4));

    std::vector<GpsFix> fixes = {{43.0, 10.0, 1.0, 8, 0}, {43.2, 10.2, 1.2, 9, 1000}, {50.0, 20.0, 2.0, 9, 2000},
                                 {60.0, 30.0, 0.8, 6, 3000}, {70.0, 40.0, 1.5, 12, 4000}};
    auto r = reference_position(fixes);
    CHECK(r.lat == doctest::Approx(43.1));
    CHECK(r.lon == doctest::Approx(10.1));

    std::vector<GpsFix> all_bad = {{1, 1, 1.5, 9, 0}, {1, 1, 0.5, 6, 0}};
    CHECK_THROWS_AS(reference_position(all_bad), NoReferenceError);
    CHECK_THROWS_AS(reference_position(std::vector<GpsFix>{}), NoReferenceError);

    // window restriction: [1000, 121000)
    std::vector<GpsFix> timed = {{1, 1, 1, 8, 0}, {2, 2, 1, 8, 1000}, {4, 4, 1, 8, 120999}, {9, 9, 1, 8, 121000}};
    auto w = reference_position(timed, 1000);
    CHECK(w.lat == doctest::Approx(3.0));
}

TEST_CASE("reference position of jittered fixes converges on the centre") {
    Rng rng(23);
    std::vector<GpsFix> fixes;
    for (int i = 0; i < 120; ++i)
        fixes.push_back({43.72 + rng.uniform(-1e-5, 1e-5), 10.40 + rng.uniform(-1e-5, 1e-5), 0.9, 9, i * 1000});
    auto p = reference_position(fixes);
    CHECK(std::abs(p.lat - 43.72) < 3e-6);
    CHECK(std::abs(p.lon - 10.40) < 3e-6);
}

TEST_CASE("distance bins") {
    auto log = delays_log({10, 10, 2000, 10, 10, 10});
    double dist[] = {0, 24.9, 25, 49, 50, 1000};
    for (std::size_t i = 0; i < 6; ++i) log.records[i].distance_m = dist[i];
    log.records[4].receive_timestamp.reset();
    log.records[5].leg = "out";
    auto bins = distance_bins(log, 25.0);
    REQUIRE(bins.size() == 4);
    CHECK(bins[0].start_m == 0);
    CHECK(bins[0].expected == 2);
    CHECK(bins[1].expected == 2);
    CHECK(bins[1].received == 2);
    CHECK(bins[1].realtime == 1);
    CHECK(bins[2].received == 0);
    CHECK(bins[3].start_m == 1000);
    std::string out = "out";
    CHECK(distance_bins(log, 25.0, &out).size() == 1);
    CHECK_THROWS_AS(distance_bins(log, 0.0), InvalidSessionError);
}

TEST_CASE("spearman") {
    std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> y = {5, 6, 7, 8, 7};
    CHECK(spearman(x, std::vector<double>{10, 9, 8, 7, 6}) == doctest::Approx(-1.0));
    CHECK(spearman(x, std::vector<double>{1, 4, 9, 16, 25}) == doctest::Approx(1.0));
    CHECK(spearman(x, y) == doctest::Approx(0.8207826816681233));  // tied ranks, Pearson on average ranks
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> a, b;
        for (int k = 0; k < 11; ++k) {
            a.push_back(rng.uniform());
            b.push_back(rng.uniform());
        }
        CHECK(spearman(a, b) == doctest::Approx(oracle::spearman_no_ties(a, b)));
    }
    CHECK_THROWS_AS(spearman(x, std::vector<double>{1}), InvalidSessionError);
}

TEST_CASE("csv outputs") {
    auto log = delays_log({10, 2000});
    log.name = "s";
    log.records[0].distance_m = 12.5;
    log.records[1].leg = "back";
    std::ostringstream out;
    write_session_csv(out, log);
    CHECK(out.str() ==
          "seq,peb_timestamp_ms,receive_timestamp_ms,parity_ok,realtime,distance_m,leg\n"
          "1,0,10,1,1,12.50,\n"
          "2,1000,3000,1,0,,back\n");
}
