#pragma once

// Frames with chosen vitals and a direct (lossless unless told otherwise)
// coupling of one operator node to a monitoring node.

#include <functional>
#include <string>
#include <vector>

#include "lrs/ban.hpp"
#include "lrs/op_node.hpp"
#include "lrs/rm_node.hpp"
#include "lrs/wire.hpp"

namespace support {

struct Vitals {
    double heart_rate = 78;
    double co_ppm = 3;
    double battery = 0.9;
    bool gps = true;
    double lat = 43.72;
    double lon = 10.40;
};

inline lrs::ban::SensorFrame make_frame(std::int64_t peb_ts, const Vitals& v = {}) {
    using lrs::ban::SensorReading;
    std::vector<SensorReading> r = {
        {"PIEZO", {16}},      {"ELECTRODES", {v.heart_rate, 16, 36.9}}, {"SPO2", {97}},     {"ACC1", {0}},
        {"ACC2", {0, 0}},     {"CO", {v.co_ppm}},                        {"EXT_TEMP", {21}}, {"HEAT_FLUX", {45}},
        {"MOTION", {0}},      {"CO2", {450}},
    };
    if (v.gps) r.push_back({"GPS", {v.lat, v.lon, 0.9, 9}});
    lrs::ban::DeviceState d;
    d.device_id = "op1";
    d.battery_fraction = v.battery;
    d.peb_timestamp = peb_ts;
    return lrs::ban::build_frame(r, d, lrs::ban::default_sensor_table());
}

/// RM and OP wired back to back. `up` decides per message whether it gets
/// through; replies arrive in the same tick.
struct Bench {
    lrs::op::OpNode op{lrs::ban::default_sensor_table()};
    lrs::rm::RmNode rm;
    std::string id = "op1";
    std::function<bool(const lrs::rm::Outgoing&, bool reply)> up = [](const auto&, bool) { return true; };
    std::int64_t now = 0;
    int data_replies = 0;

    explicit Bench(lrs::rm::RmSettings s = {}, std::size_t capacity = lrs::op::kDefaultCapacity)
        : op(lrs::ban::default_sensor_table(), capacity), rm(lrs::ban::default_sensor_table(), lrs::rm::ThresholdTable::defaults(), s) {
        rm.add_operator(id);
    }

    void ingest(int n, const Vitals& v = {}) {
        for (int i = 0; i < n; ++i) op.ingest(make_frame(static_cast<std::int64_t>(op.newest_seq() + 1) * 1000, v), now);
    }

    /// One RM tick at `now`, delivering everything that gets through.
    void step() {
        for (auto& m : rm.tick(now)) {
            if (!up(m, false)) continue;
            auto reply = op.handle_bytes(m.message, now);
            if (!up(m, true)) continue;
            if (m.kind == lrs::proto::QueryKind::get_data) ++data_replies;
            rm.deliver(m.op_id, reply, now);
        }
    }

    void run_until(std::int64_t t, std::int64_t dt = 10) {
        while (now < t) {
            step();
            now += dt;
        }
    }
};

}  // namespace support
