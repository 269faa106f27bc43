#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrs/bytes.hpp"

// Wearable-side data production: the sensor table, the 1 Hz aggregate frame
// built by the PEB, its byte layout and the trailing XOR parity byte.
namespace lrs::ban {

enum class Garment { IG, OG, BOOT, PEB };
enum class Bus { zigbee, rs485, dedicated, internal };

std::string_view to_string(Garment g);
std::string_view to_string(Bus b);
Garment parse_garment(std::string_view s);
Bus parse_bus(std::string_view s);

struct SensorDescriptor {
    std::string sensor_id;
    Garment garment = Garment::OG;
    std::string function;
    Bus bus = Bus::rs485;
    int rate_bytes_per_s = 0;

    bool operator==(const SensorDescriptor&) const = default;
};

// Well-known sensor ids of the default table and the order of the values
// each one carries in its block body.
namespace sensor {
inline constexpr std::string_view kPiezo = "PIEZO";            // breathing_rate
inline constexpr std::string_view kElectrodes = "ELECTRODES";  // heart_rate, breathing_rate, body_temp
inline constexpr std::string_view kSpO2 = "SPO2";              // spo2
inline constexpr std::string_view kAccel1 = "ACC1";            // inactivity
inline constexpr std::string_view kAccel2 = "ACC2";            // inactivity, fall
inline constexpr std::string_view kCO = "CO";                  // co_ppm
inline constexpr std::string_view kExtTemp = "EXT_TEMP";       // celsius
inline constexpr std::string_view kHeatFlux = "HEAT_FLUX";     // W/m^2
inline constexpr std::string_view kMotion = "MOTION";          // inactivity
inline constexpr std::string_view kGps = "GPS";                // lat, lon, hdop, satellites
inline constexpr std::string_view kCO2 = "CO2";                // co2_ppm
inline constexpr std::string_view kPeb = "PEB";
}  // namespace sensor

namespace field {
inline constexpr std::size_t kHeartRate = 0;
inline constexpr std::size_t kBreathingRate = 1;
inline constexpr std::size_t kBodyTemp = 2;
inline constexpr std::size_t kFall = 1;
inline constexpr std::size_t kLat = 0;
inline constexpr std::size_t kLon = 1;
inline constexpr std::size_t kHdop = 2;
inline constexpr std::size_t kSatellites = 3;
}  // namespace field

/// Ordered sensor configuration. Exactly one PEB row is required; table
/// order is the block order on the wire.
class SensorConfig {
public:
    SensorConfig() = default;
    explicit SensorConfig(std::vector<SensorDescriptor> rows);

    std::span<const SensorDescriptor> rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    const SensorDescriptor& operator[](std::size_t i) const { return rows_.at(i); }

    std::optional<std::size_t> index_of(std::string_view sensor_id) const;
    bool contains(std::string_view sensor_id) const { return index_of(sensor_id).has_value(); }
    std::size_t peb_index() const noexcept { return peb_index_; }
    const SensorDescriptor& peb() const { return rows_.at(peb_index_); }

    /// Sum of every configured rate, PEB included.
    int total_rate() const noexcept;

    bool operator==(const SensorConfig&) const = default;

private:
    std::vector<SensorDescriptor> rows_;
    std::size_t peb_index_ = 0;
};

/// Twelve rows of the second wearable prototype (410 bytes/s in total).
SensorConfig default_sensor_table();

/// Whitespace separated rows: `id garment bus rate function...`; `#` starts a comment.
SensorConfig load_sensor_table(std::istream& in);
SensorConfig load_sensor_table_file(const std::string& path);
void write_sensor_table(std::ostream& out, const SensorConfig& config);

struct DeviceState {
    std::string device_id;
    double battery_fraction = 1.0;
    std::uint16_t status_code = 0;
    /// Milliseconds since session midnight.
    std::int64_t peb_timestamp = 0;

    bool operator==(const DeviceState&) const = default;
};

inline constexpr std::size_t kDeviceIdWidth = 16;
inline constexpr std::uint16_t kStatusEquipmentDegraded = 0x8000;
inline constexpr std::uint8_t kStaleBit = 0x80;

struct SensorReading {
    std::string sensor_id;
    std::vector<double> values;
};

struct SensorBlock {
    std::string sensor_id;
    bool stale = false;
    /// rate_bytes_per_s - 1 bytes; the header byte is produced on serialization.
    Bytes body;

    bool operator==(const SensorBlock&) const = default;
};

struct SensorFrame {
    std::vector<SensorBlock> blocks;
    DeviceState device;
    std::uint8_t parity = 0;

    bool operator==(const SensorFrame&) const = default;
};

/// Either every configured sensor or an explicit id set. The PEB block is
/// always part of the result regardless of the selection.
struct QueryFilter {
    bool wildcard = true;
    std::set<std::string> ids;

    static QueryFilter all() { return {}; }
    static QueryFilter only(std::set<std::string> ids) { return {false, std::move(ids)}; }
    bool selects(std::string_view id) const { return wildcard || ids.contains(std::string(id)); }

    bool operator==(const QueryFilter&) const = default;
};

/// Number of f64 values a sensor block can hold.
std::size_t value_capacity(const SensorDescriptor& d);

/// Polls every configured sensor once: one block per non-PEB row in table
/// order (missing readings become zero-filled stale blocks), then the PEB
/// block and the parity byte.
SensorFrame build_frame(std::span<const SensorReading> readings, const DeviceState& device,
                        const SensorConfig& config);

Bytes serialize(const SensorFrame& frame, const SensorConfig& config);
SensorFrame deserialize(std::span<const std::uint8_t> bytes, const SensorConfig& config);

/// Serialized length of a frame selecting `filter`, parity byte excluded.
std::size_t payload_size(const SensorConfig& config, const QueryFilter& filter = QueryFilter::all());

std::uint8_t xor_of(std::span<const std::uint8_t> bytes);

/// True iff the XOR of all bytes but the last equals the last byte.
/// Detects every odd-weight error per bit lane; an even number of flips in
/// the same bit position cancels out.
bool check_parity(std::span<const std::uint8_t> frame_bytes);

/// Recomputes `frame.parity` from the serialized content.
void seal(SensorFrame& frame, const SensorConfig& config);

void validate_filter(const QueryFilter& filter, const SensorConfig& config);

SensorFrame apply_query_filter(const SensorFrame& frame, const QueryFilter& filter, const SensorConfig& config);

const SensorBlock* find_block(const SensorFrame& frame, std::string_view sensor_id);

std::vector<double> decode_values(const SensorBlock& block);

}  // namespace lrs::ban
