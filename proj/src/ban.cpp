#include "lrs/ban.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lrs::ban {
namespace {

// PEB block body: device id, status, battery, timestamp, then zero reserve.
constexpr std::size_t kPebUsed = kDeviceIdWidth + 2 + 8 + 8;

}  // namespace

std::string_view to_string(Garment g) {
    switch (g) {
        case Garment::IG: return "IG";
        case Garment::OG: return "OG";
        case Garment::BOOT: return "BOOT";
        case Garment::PEB: return "PEB";
    }
    return "?";
}

std::string_view to_string(Bus b) {
    switch (b) {
        case Bus::zigbee: return "zigbee";
        case Bus::rs485: return "rs485";
        case Bus::dedicated: return "dedicated";
        case Bus::internal: return "internal";
    }
    return "?";
}

Garment parse_garment(std::string_view s) {
    for (auto g : {Garment::IG, Garment::OG, Garment::BOOT, Garment::PEB})
        if (s == to_string(g)) return g;
    throw ConfigError("unknown garment '" + std::string(s) + "'");
}

Bus parse_bus(std::string_view s) {
    for (auto b : {Bus::zigbee, Bus::rs485, Bus::dedicated, Bus::internal})
        if (s == to_string(b)) return b;
    throw ConfigError("unknown bus '" + std::string(s) + "'");
}

SensorConfig::SensorConfig(std::vector<SensorDescriptor> rows) : rows_(std::move(rows)) {
    if (rows_.size() > 127) throw ConfigError("at most 127 sensors fit the block header");
    std::optional<std::size_t> peb;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (r.sensor_id.empty()) throw ConfigError("empty sensor id at row " + std::to_string(i));
        if (r.rate_bytes_per_s <= 0)
            throw ConfigError("sensor '" + r.sensor_id + "' must have a positive rate");
        for (std::size_t j = 0; j < i; ++j)
            if (rows_[j].sensor_id == r.sensor_id) throw ConfigError("duplicate sensor id '" + r.sensor_id + "'");
        if (r.garment == Garment::PEB) {
            if (peb) throw ConfigError("more than one PEB row");
            if (static_cast<std::size_t>(r.rate_bytes_per_s) < 1 + kPebUsed)
                throw ConfigError("PEB rate must be at least " + std::to_string(1 + kPebUsed) + " bytes");
            peb = i;
        }
    }
    if (!peb) throw ConfigError("sensor table has no PEB row");
    peb_index_ = *peb;
}

std::optional<std::size_t> SensorConfig::index_of(std::string_view sensor_id) const {
    for (std::size_t i = 0; i < rows_.size(); ++i)
        if (rows_[i].sensor_id == sensor_id) return i;
    return std::nullopt;
}

int SensorConfig::total_rate() const noexcept {
    int sum = 0;
    for (const auto& r : rows_) sum += r.rate_bytes_per_s;
    return sum;
}

SensorConfig default_sensor_table() {
    using G = Garment;
    using B = Bus;
    return SensorConfig({
        {std::string(sensor::kPiezo), G::IG, "breathing rate", B::zigbee, 24},
        {std::string(sensor::kElectrodes), G::IG, "heart rate, breathing rate and body temperature", B::zigbee, 68},
        {std::string(sensor::kSpO2), G::IG, "oxygen saturation", B::zigbee, 24},
        {std::string(sensor::kAccel1), G::OG, "inactivity sensor", B::rs485, 24},
        {std::string(sensor::kAccel2), G::OG, "inactivity/fall sensor", B::rs485, 24},
        {std::string(sensor::kCO), G::OG, "carbon monoxide concentration", B::rs485, 24},
        {std::string(sensor::kExtTemp), G::OG, "environmental temperature", B::rs485, 16},
        {std::string(sensor::kHeatFlux), G::OG, "heat flux across the jacket", B::rs485, 16},
        {std::string(sensor::kMotion), G::OG, "inactivity sensor", B::rs485, 24},
        {std::string(sensor::kGps), G::OG, "absolute position", B::dedicated, 62},
        {std::string(sensor::kCO2), G::BOOT, "carbon dioxide concentration", B::zigbee, 20},
        {std::string(sensor::kPeb), G::PEB, "device ID, status, batteries, timestamp", B::internal, 84},
    });
}

SensorConfig load_sensor_table(std::istream& in) {
    std::vector<SensorDescriptor> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        SensorDescriptor d;
        std::string garment, bus;
        if (!(fields >> d.sensor_id)) continue;
        if (!(fields >> garment >> bus >> d.rate_bytes_per_s))
            throw ConfigError("sensor table line " + std::to_string(line_no) + ": expected id garment bus rate");
        d.garment = parse_garment(garment);
        d.bus = parse_bus(bus);
        std::getline(fields >> std::ws, d.function);
        rows.push_back(std::move(d));
    }
    return SensorConfig(std::move(rows));
}

SensorConfig load_sensor_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sensor table '" + path + "'");
    return load_sensor_table(in);
}

void write_sensor_table(std::ostream& out, const SensorConfig& config) {
    out << "# id garment bus rate_bytes_per_s function\n";
    for (const auto& r : config.rows())
        out << r.sensor_id << ' ' << to_string(r.garment) << ' ' << to_string(r.bus) << ' ' << r.rate_bytes_per_s
            << ' ' << r.function << '\n';
}

std::size_t value_capacity(const SensorDescriptor& d) {
    return static_cast<std::size_t>(d.rate_bytes_per_s - 1) / 8;
}

SensorFrame build_frame(std::span<const SensorReading> readings, const DeviceState& device,
                        const SensorConfig& config) {
    std::vector<const SensorReading*> by_row(config.size(), nullptr);
    for (const auto& r : readings) {
        auto idx = config.index_of(r.sensor_id);
        if (!idx) throw ConfigError("reading for unconfigured sensor '" + r.sensor_id + "'");
        if (*idx == config.peb_index()) throw ConfigError("PEB data comes from the device state, not a reading");
        if (by_row[*idx]) throw ConfigError("more than one reading for sensor '" + r.sensor_id + "'");
        if (r.values.size() > value_capacity(config[*idx]))
            throw ConfigError("sensor '" + r.sensor_id + "' carries at most " +
                              std::to_string(value_capacity(config[*idx])) + " values");
        by_row[*idx] = &r;
    }
    if (device.device_id.size() > kDeviceIdWidth)
        throw ConfigError("device id longer than " + std::to_string(kDeviceIdWidth) + " bytes");

    SensorFrame frame;
    frame.device = device;
    for (std::size_t i = 0; i < config.size(); ++i) {
        if (i == config.peb_index()) continue;
        const auto& d = config[i];
        SensorBlock block{d.sensor_id, by_row[i] == nullptr, {}};
        block.body.reserve(static_cast<std::size_t>(d.rate_bytes_per_s - 1));
        ByteWriter w(block.body);
        if (by_row[i])
            for (double v : by_row[i]->values) w.f64(v);
        w.zeros(static_cast<std::size_t>(d.rate_bytes_per_s - 1) - block.body.size());
        frame.blocks.push_back(std::move(block));
    }
    seal(frame, config);
    return frame;
}

namespace {

void write_content(const SensorFrame& frame, const SensorConfig& config, Bytes& out) {
    ByteWriter w(out);
    std::optional<std::size_t> previous;
    for (const auto& b : frame.blocks) {
        auto idx = config.index_of(b.sensor_id);
        if (!idx || *idx == config.peb_index()) throw ConfigError("frame block for unknown sensor '" + b.sensor_id + "'");
        if (previous && *idx <= *previous) throw ConfigError("frame blocks out of table order");
        previous = idx;
        if (b.body.size() != static_cast<std::size_t>(config[*idx].rate_bytes_per_s - 1))
            throw ConfigError("block '" + b.sensor_id + "' has the wrong length");
        w.u8(static_cast<std::uint8_t>(*idx | (b.stale ? kStaleBit : 0)));
        w.raw(b.body);
    }
    const auto& dev = frame.device;
    if (dev.device_id.size() > kDeviceIdWidth) throw ConfigError("device id too long");
    w.u8(static_cast<std::uint8_t>(config.peb_index()));
    w.padded(dev.device_id, kDeviceIdWidth);
    w.u16(dev.status_code);
    w.f64(dev.battery_fraction);
    w.i64(dev.peb_timestamp);
    w.zeros(static_cast<std::size_t>(config.peb().rate_bytes_per_s) - 1 - kPebUsed);
}

}  // namespace

Bytes serialize(const SensorFrame& frame, const SensorConfig& config) {
    Bytes out;
    out.reserve(static_cast<std::size_t>(config.total_rate()) + 1);
    write_content(frame, config, out);
    out.push_back(frame.parity);
    return out;
}

SensorFrame deserialize(std::span<const std::uint8_t> bytes, const SensorConfig& config) {
    if (bytes.size() < 2) throw ProtocolError("frame shorter than 2 bytes");
    ByteReader r(bytes.first(bytes.size() - 1));
    SensorFrame frame;
    std::optional<std::size_t> previous;
    for (;;) {
        std::uint8_t header = r.u8();
        std::size_t idx = header & 0x7f;
        if (idx >= config.size()) throw ProtocolError("block header names sensor index " + std::to_string(idx));
        const auto& d = config[idx];
        if (idx == config.peb_index()) {
            if (header & kStaleBit) throw ProtocolError("PEB block flagged stale");
            frame.device.device_id = r.padded(kDeviceIdWidth);
            frame.device.status_code = r.u16();
            frame.device.battery_fraction = r.f64();
            frame.device.peb_timestamp = r.i64();
            r.raw(static_cast<std::size_t>(d.rate_bytes_per_s) - 1 - kPebUsed);
            break;
        }
        if (previous && idx <= *previous) throw ProtocolError("frame blocks out of table order");
        previous = idx;
        auto body = r.raw(static_cast<std::size_t>(d.rate_bytes_per_s - 1));
        frame.blocks.push_back({d.sensor_id, (header & kStaleBit) != 0, Bytes(body.begin(), body.end())});
    }
    if (!r.done()) throw ProtocolError("trailing bytes after PEB block");
    frame.parity = bytes.back();
    return frame;
}

std::size_t payload_size(const SensorConfig& config, const QueryFilter& filter) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < config.size(); ++i)
        if (i == config.peb_index() || filter.selects(config[i].sensor_id))
            n += static_cast<std::size_t>(config[i].rate_bytes_per_s);
    return n;
}

std::uint8_t xor_of(std::span<const std::uint8_t> bytes) {
    std::uint8_t x = 0;
    for (auto b : bytes) x ^= b;
    return x;
}

bool check_parity(std::span<const std::uint8_t> frame_bytes) {
    if (frame_bytes.size() < 2) return false;
    return xor_of(frame_bytes.first(frame_bytes.size() - 1)) == frame_bytes.back();
}

void seal(SensorFrame& frame, const SensorConfig& config) {
    Bytes content;
    write_content(frame, config, content);
    frame.parity = xor_of(content);
}

void validate_filter(const QueryFilter& filter, const SensorConfig& config) {
    if (filter.wildcard) return;
    for (const auto& id : filter.ids)
        if (!config.contains(id)) throw ValidationError("query filter names unknown sensor '" + id + "'");
}

SensorFrame apply_query_filter(const SensorFrame& frame, const QueryFilter& filter, const SensorConfig& config) {
    validate_filter(filter, config);
    if (filter.wildcard) return frame;
    SensorFrame out;
    out.device = frame.device;
    for (const auto& b : frame.blocks)
        if (filter.selects(b.sensor_id)) out.blocks.push_back(b);
    seal(out, config);
    return out;
}

const SensorBlock* find_block(const SensorFrame& frame, std::string_view sensor_id) {
    for (const auto& b : frame.blocks)
        if (b.sensor_id == sensor_id) return &b;
    return nullptr;
}

std::vector<double> decode_values(const SensorBlock& block) {
    ByteReader r(block.body);
    std::vector<double> out(block.body.size() / 8);
    for (auto& v : out) v = r.f64();
    return out;
}

}  // namespace lrs::ban
