// Runs each end-to-end criterion and prints one PASS/FAIL line per criterion.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "lrs/ban.hpp"
#include "lrs/error.hpp"
#include "lrs/metrics.hpp"
#include "lrs/op_node.hpp"
#include "lrs/scenario.hpp"
#include "lrs/sim.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace lrs;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fixed(double v, int digits = 2) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

Verdict metrics_oracle() {
    Verdict v;
    auto start = Clock::now();
    struct Row {
        std::uint64_t valid, expected;
        double printed;
    };
    const Row rows[] = {{4979, 5039, 98.81}, {2644, 2672, 98.95}, {2335, 2367, 98.65}, {6045, 6149, 98.31}};
    for (const auto& r : rows) {
        auto log = oracle::tally_log(r.valid, r.expected);
        auto m = metrics::compute_session_metrics(log);
        if (m.expected != r.expected || m.received_valid != r.valid)
            v.fail("tally " + std::to_string(r.valid) + "/" + std::to_string(r.expected) + " miscounted");
        if (std::abs(m.pct_correct - r.printed) > 0.005 || metrics::format_percent(m.pct_correct) != fixed(r.printed))
            v.fail(std::to_string(r.valid) + "/" + std::to_string(r.expected) + " gave " +
                   metrics::format_percent(m.pct_correct));
    }
    double t = seconds_since(start);
    if (t >= 1.0) v.fail("took " + fixed(t, 3) + " s");
    if (v.pass) v.detail = "4 tallies reproduced in " + fixed(t * 1000, 1) + " ms";
    return v;
}

// One operator next to the post on default radio settings; outages come
// from the schedule only.
harness::Scenario outage_run(std::uint64_t index, std::mt19937_64& rng, bool& long_outage) {
    auto s = harness::builtin("field_demo");
    s.name = "sf" + std::to_string(index);
    s.seed = index + 1;
    s.operators.resize(1);
    s.operators[0].path = {{0.0, 5.0}};
    s.operators[0].co_spikes.clear();
    s.operators[0].access_outages.clear();
    s.buffer_capacity = 150;
    s.drain_ms = 40000;
    s.sessions = {{s.name, 240000, 0.0}};
    // Up to three windows, each well inside the 150 s buffer horizon and
    // spaced so backlogs never stack.
    std::uniform_int_distribution<int> count(0, 3);
    std::bernoulli_distribution shortish(0.4);
    std::uniform_int_distribution<std::int64_t> short_len(100, 3000);
    std::uniform_int_distribution<std::int64_t> long_len(3000, 90000);
    std::int64_t cursor = 5000;
    long_outage = false;
    int n = count(rng);
    for (int i = 0; i < n; ++i) {
        auto len = shortish(rng) ? short_len(rng) : long_len(rng);
        std::uniform_int_distribution<std::int64_t> lead(0, 20000);
        auto begin = cursor + lead(rng);
        if (begin + len > 239000) break;
        s.operators[0].access_outages.push_back({begin, begin + len});
        if (len >= 2000) long_outage = true;
        cursor = begin + len + 30000;
    }
    return s;
}

Verdict store_and_forward() {
    Verdict v;
    auto start = Clock::now();
    constexpr std::uint64_t kSchedules = 1000;
    std::atomic<std::uint64_t> next{0};
    std::vector<std::string> problems(kSchedules);
    std::atomic<std::uint64_t> with_long{0};
    auto worker = [&] {
        for (auto i = next++; i < kSchedules; i = next++) {
            std::mt19937_64 rng(0x5eed0000 + i);
            bool long_outage = false;
            auto s = outage_run(i, rng, long_outage);
            if (long_outage) ++with_long;
            harness::Simulation sim(s);
            sim.run();
            auto c = sim.conservation().at(0);
            auto log = sim.session_logs().at(0);
            std::uint64_t missing = 0;
            for (const auto& r : log.records) missing += !r.received_valid();
            auto m = metrics::compute_session_metrics(log);
            std::ostringstream p;
            if (missing != 0 || c.lost_permanently != 0 || c.still_buffered != 0 || c.corrupt_dropped != 0 ||
                c.delivered_valid != c.produced || !c.holds())
                p << "schedule " << i << ": " << missing << " missing, " << c.lost_permanently << " lost";
            else if (long_outage && !(m.pct_realtime < m.pct_correct))
                p << "schedule " << i << ": realtime " << m.pct_realtime << " not below correct " << m.pct_correct;
            problems[i] = p.str();
        }
    };
    std::vector<std::thread> pool;
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& p : problems)
        if (!p.empty()) v.fail(p);
    double t = seconds_since(start);
    if (t >= 120.0) v.fail("took " + fixed(t, 1) + " s");
    if (v.pass)
        v.detail = std::to_string(kSchedules) + " schedules (" + std::to_string(with_long.load()) +
                   " with an outage >= 2 s), 0 permanent losses, " + fixed(t, 1) + " s";
    return v;
}

Verdict recovery_bound() {
    Verdict v;
    std::string seen;
    for (std::uint64_t g : {1, 49, 50, 51, 100, 500}) {
        support::Bench b;
        b.ingest(3);
        b.step();
        b.now = 1000;
        b.ingest(static_cast<int>(g));
        b.data_replies = 0;
        int polls = -1;
        while (b.now < 60000 && polls < 0) {
            b.step();
            if (b.rm.record("op1").last_seq == 3 + g) polls = b.data_replies;
            b.now += 10;
        }
        auto want = static_cast<int>((g + 49) / 50);
        if (polls != want) v.fail("G=" + std::to_string(g) + " took " + std::to_string(polls) + " polls, want " +
                                  std::to_string(want));
        seen += (seen.empty() ? "" : " ") + std::to_string(g) + ":" + std::to_string(polls);
    }
    if (v.pass) v.detail = "G:polls " + seen;
    return v;
}

Verdict fetch_after_equivalence() {
    Verdict v;
    std::uint64_t checked = 0, gaps = 0;
    for (std::size_t cap = 1; cap <= 200 && v.pass; ++cap) {
        op::SampleBuffer buf(cap);
        std::vector<std::uint64_t> retained;
        auto check_all = [&] {
            auto newest = retained.empty() ? 0 : retained.back();
            for (std::uint64_t last = 0; last <= newest + 5; ++last) {
                auto want = oracle::fetch_after(retained, last);
                auto range = buf.fetch_after(last);
                std::vector<std::uint64_t> got;
                for (const auto& s : buf.copy(range)) got.push_back(s.seq);
                ++checked;
                gaps += want.gap.has_value();
                if (got != want.seqs || range.gap != want.gap) {
                    v.fail("capacity " + std::to_string(cap) + ", newest " + std::to_string(newest) + ", last_seq " +
                           std::to_string(last));
                    return;
                }
            }
        };
        check_all();
        for (std::uint64_t seq = 1; seq <= cap + 55 && v.pass; ++seq) {
            buf.push({seq, static_cast<std::int64_t>(seq), 0, {}});
            retained.push_back(seq);
            if (retained.size() > cap) retained.erase(retained.begin());
            check_all();
        }
    }
    if (v.pass) v.detail = std::to_string(checked) + " queries, " + std::to_string(gaps) + " with gap notices";
    return v;
}

Verdict parity() {
    Verdict v;
    const auto config = ban::default_sensor_table();
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> value(-500.0, 500.0);
    std::uint64_t singles = 0, same_position = 0, mixed = 0;
    for (int f = 0; f < 50; ++f) {
        std::vector<ban::SensorReading> readings;
        for (const auto& d : config.rows()) {
            if (d.garment == ban::Garment::PEB) continue;
            ban::SensorReading r{d.sensor_id, {}};
            for (std::size_t i = 0; i < ban::value_capacity(d); ++i) r.values.push_back(value(rng));
            readings.push_back(std::move(r));
        }
        ban::DeviceState d;
        d.device_id = "op1";
        d.battery_fraction = 0.5;
        d.peb_timestamp = static_cast<std::int64_t>(rng() % 86400000);
        auto bytes = ban::serialize(ban::build_frame(readings, d, config), config);
        if (!ban::check_parity(bytes)) v.fail("frame " + std::to_string(f) + " built with bad parity");
        for (std::size_t bit = 0; bit < bytes.size() * 8; ++bit) {
            auto copy = bytes;
            copy[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            ++singles;
            if (ban::check_parity(copy)) v.fail("single flip missed at bit " + std::to_string(bit));
        }
        std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
        for (int k = 0; k < 200; ++k) {
            auto i = pos(rng), j = pos(rng);
            if (i == j) continue;
            int b1 = static_cast<int>(rng() % 8), b2 = (b1 + 1 + static_cast<int>(rng() % 7)) % 8;
            auto same = bytes;
            same[i] ^= static_cast<std::uint8_t>(1u << b1);
            same[j] ^= static_cast<std::uint8_t>(1u << b1);
            ++same_position;
            if (!ban::check_parity(same)) v.fail("same-position double flip was detected");
            auto other = bytes;
            other[i] ^= static_cast<std::uint8_t>(1u << b1);
            other[j] ^= static_cast<std::uint8_t>(1u << b2);
            ++mixed;
            if (ban::check_parity(other)) v.fail("double flip on different bit positions missed");
        }
    }
    if (v.pass)
        v.detail = std::to_string(singles) + "/" + std::to_string(singles) + " single flips caught; " +
                   std::to_string(same_position) + " same-position double flips pass unnoticed; " +
                   std::to_string(mixed) + " mixed-position double flips caught";
    return v;
}

Verdict long_range() {
    Verdict v;
    auto s = harness::builtin("long_range");
    auto r = harness::run_scenario(s);
    std::vector<double> dist, rt;
    double worst = 100.0;
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
        const auto& m = r.metrics[i];
        dist.push_back(s.sessions[i].site_m);
        rt.push_back(m.pct_realtime);
        worst = std::min(worst, m.pct_correct);
        if (m.pct_correct < 98.0)
            v.fail(s.sessions[i].name + " pct_correct " + metrics::format_percent(m.pct_correct));
    }
    if (dist.size() != 11 || dist.front() != 280 || dist.back() != 1081) v.fail("unexpected site list");
    if (!(rt.back() < rt.front())) v.fail("realtime at 1081 m not below 280 m");
    for (std::size_t i = 1; i < dist.size(); ++i)
        if (dist[i - 1] >= 900 && rt[i] > rt[i - 1]) v.fail("realtime rises past the knee at " + s.sessions[i].name);
    double rho = metrics::spearman(dist, rt);
    std::vector<double> sorted = rt;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end() &&
        std::abs(rho - oracle::spearman_no_ties(dist, rt)) > 1e-9)
        v.fail("rank correlation disagrees with the reference");
    if (rho > -0.8) v.fail("rank correlation " + fixed(rho, 3));
    if (v.pass)
        v.detail = "min pct_correct " + metrics::format_percent(worst) + ", realtime " +
                   metrics::format_percent(rt.front()) + " at 280 m -> " + metrics::format_percent(rt.back()) +
                   " at 1081 m, rho " + fixed(rho, 3);
    return v;
}

Verdict short_range_asymmetry() {
    Verdict v;
    std::uint64_t compared = 0;
    double worst = 100.0;
    for (std::string name : {"short_range_omni", "short_range_directional"}) {
        auto s = harness::builtin(name);
        auto r = harness::run_scenario(s);
        for (std::size_t i = 0; i < r.logs.size(); ++i) {
            const auto& log = r.logs[i];
            const auto& m = r.metrics[i];
            worst = std::min(worst, m.pct_correct);
            if (m.pct_correct < 98.0) v.fail(name + "/" + log.name + " pct_correct " + metrics::format_percent(m.pct_correct));
            // "out" walks away with the textile antenna on the back, "back" faces the post.
            const std::string out = "out", back = "back";
            std::map<double, metrics::DistanceBin> away, toward;
            for (const auto& b : metrics::distance_bins(log, s.bin_m, &out, m.offset_ms)) away[b.start_m] = b;
            for (const auto& b : metrics::distance_bins(log, s.bin_m, &back, m.offset_ms)) toward[b.start_m] = b;
            for (const auto& [start, a] : away) {
                auto it = toward.find(start);
                if (it == toward.end() || a.expected == 0 || it->second.expected == 0) continue;
                ++compared;
                if (!(a.pct_realtime() < it->second.pct_realtime()))
                    v.fail(name + "/" + log.name + " bin " + fixed(start, 0) + " m: back_to_rm " +
                           metrics::format_percent(a.pct_realtime()) + " vs facing_rm " +
                           metrics::format_percent(it->second.pct_realtime()));
            }
        }
    }
    if (compared == 0) v.fail("no matched bins");
    if (v.pass)
        v.detail = std::to_string(compared) + " matched bins all lower when facing away; min pct_correct " +
                   metrics::format_percent(worst);
    return v;
}

Verdict haversine_and_gate() {
    Verdict v;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> lat(-75.0, 75.0), lon(-179.0, 179.0), bearing(0.0, 2 * std::numbers::pi),
        range(0.5, 2000.0);
    double worst = 0.0;
    int pairs = 0;
    while (pairs < 10000) {
        double la = lat(rng), lo = lon(rng), b = bearing(rng), d = range(rng);
        double dlat = d * std::cos(b) / metrics::kEarthRadiusM * 180.0 / std::numbers::pi;
        double dlon = d * std::sin(b) / (metrics::kEarthRadiusM * std::cos(la * std::numbers::pi / 180.0)) * 180.0 /
                      std::numbers::pi;
        metrics::GeoPoint p{la, lo}, q{la + dlat, lo + dlon};
        double want = oracle::great_circle_m(p.lat, p.lon, q.lat, q.lon);
        if (want > 2000.0) continue;
        ++pairs;
        double rel = std::abs(metrics::haversine(p, q) - want) / want;
        worst = std::max(worst, rel);
    }
    if (worst > 0.001) v.fail("relative error " + std::to_string(worst));

    // Usable fixes around one spot, gated ones a kilometer away.
    std::vector<metrics::GpsFix> fixes;
    double sum_lat = 0, sum_lon = 0;
    int good = 0, gated = 0;
    for (int i = 0; i < 40; ++i) {
        double jitter = (i % 7 - 3) * 1e-6;
        metrics::GpsFix f{43.72 + jitter, 10.40 - jitter, 0.8 + 0.01 * (i % 5), 7 + i % 4, i * 1000};
        fixes.push_back(f);
        sum_lat += f.lat;
        sum_lon += f.lon;
        ++good;
        metrics::GpsFix bad{43.73, 10.41, 1.5, 9, i * 1000 + 500};
        if (i % 3 == 1) bad = {43.73, 10.41, 0.7, 6, i * 1000 + 500};
        if (i % 3 == 2) bad = {43.73, 10.41, 4.0, 3, i * 1000 + 500};
        fixes.push_back(bad);
        ++gated;
    }
    auto ref = metrics::reference_position(fixes);
    if (std::abs(ref.lat - sum_lat / good) > 1e-12 || std::abs(ref.lon - sum_lon / good) > 1e-12)
        v.fail("reference position includes gated fixes");
    std::vector<metrics::GpsFix> only_bad;
    for (const auto& f : fixes)
        if (!(f.hdop < 1.5 && f.satellites >= 7)) only_bad.push_back(f);
    try {
        metrics::reference_position(only_bad);
        v.fail("reference position from gated fixes only");
    } catch (const NoReferenceError&) {
    }
    if (v.pass)
        v.detail = "10000 pairs, worst relative error " + fixed(worst * 100, 6) + "%; " + std::to_string(gated) +
                   " gated fixes excluded";
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict determinism() {
    Verdict v;
    std::size_t files = 0;
    auto root = fs::temp_directory_path() / ("lrs_acceptance_" + std::to_string(::getpid()));
    for (const auto& name : harness::builtin_names()) {
        auto a = root / name / "a";
        auto b = root / name / "b";
        harness::run_scenario(harness::builtin(name), a.string());
        harness::run_scenario(harness::builtin(name), b.string());
        std::size_t here = 0;
        for (const auto& e : fs::recursive_directory_iterator(a)) {
            if (!e.is_regular_file()) continue;
            auto rel = fs::relative(e.path(), a);
            ++here;
            if (!fs::exists(b / rel) || slurp(a / rel) != slurp(b / rel)) v.fail(name + ": " + rel.string() + " differs");
        }
        if (here < 4) v.fail(name + ": only " + std::to_string(here) + " output files");
        files += here;
    }
    fs::remove_all(root);
    if (v.pass) v.detail = std::to_string(harness::builtin_names().size()) + " builtins, " + std::to_string(files) +
                           " files identical across runs";
    return v;
}

Verdict no_console(const fs::path& self) {
    Verdict v;
    auto cmake = slurp(fs::path(LRS_SOURCE_DIR) / "CMakeLists.txt");
    for (const char* word : {"console", "npm", "node_modules", "tsc"})
        if (cmake.find(word) != std::string::npos) v.fail(std::string("build references ") + word);
    auto dir = self.parent_path();
    std::size_t suites = 0;
    for (const char* t : {"test_ban", "test_wire", "test_op_node", "test_link_sim", "test_metrics", "test_rm_node",
                          "test_gateway", "test_harness", "test_loopback"}) {
        if (fs::exists(dir / t))
            ++suites;
        else
            v.fail(std::string(t) + " not built");
    }
    if (fs::exists(dir / "console") || fs::exists(dir / "node_modules")) v.fail("console artifacts in the build tree");
    if (v.pass) v.detail = std::to_string(suites) + " suites built with no console toolchain";
    return v;
}

}  // namespace

int main(int, char** argv) {
    fs::path self = fs::absolute(argv[0]);
    std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"metrics-oracle", metrics_oracle},
        {"store-and-forward", store_and_forward},
        {"recovery-bound", recovery_bound},
        {"fetch-after-equivalence", fetch_after_equivalence},
        {"parity", parity},
        {"long-range", long_range},
        {"short-range-asymmetry", short_range_asymmetry},
        {"haversine-and-gate", haversine_and_gate},
        {"determinism", determinism},
        {"no-console", [&] { return no_console(self); }},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v.fail(std::string("threw: ") + e.what());
        }
        std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
        failed += !v.pass;
    }
    return failed == 0 ? 0 : 1;
}
