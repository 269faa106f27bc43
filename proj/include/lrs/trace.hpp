#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrs/metrics.hpp"
#include "lrs/rm_node.hpp"

// Line-delimited JSON event trace of a simulation run: a versioned header
// line followed by one record per event, in non-decreasing time order.
namespace lrs::trace {

inline constexpr const char* kFormat = "lrs-trace";
inline constexpr int kVersion = 1;

using Json = nlohmann::ordered_json;

struct Header {
    std::string scenario_name;
    /// Scenario in its text form; enough to rerun the simulation.
    std::string scenario_text;
    std::uint64_t seed = 0;
    std::string sensor_table_text;
    metrics::GeoPoint rm_reference;
    std::vector<std::string> operators;
    double bin_m = 25.0;
    std::int64_t rm_clock_base_ms = 0;
};

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void header(const Header& h);
    /// Appends one record; `t` must not go backwards.
    void record(std::int64_t t, const std::string& type, Json fields);
    void update(const rm::RecordUpdate& u);

private:
    std::ostream& out_;
    std::optional<std::int64_t> last_t_;
};

struct TraceData {
    Header header;
    std::vector<nlohmann::json> records;
    /// Byte offset of each record's line.
    std::vector<std::size_t> offsets;
};

/// Throws TraceError with the byte offset of the first bad line; a final
/// line without a newline counts as truncated.
TraceData read(std::istream& in);
TraceData read_file(const std::string& path);

/// Checks time order and that every delivery or loss names exactly one
/// earlier transmission. Throws TraceError.
void check_consistency(const TraceData& data);

Json to_json(const rm::RecordUpdate& u);
/// nullopt for records that are not record updates.
std::optional<rm::RecordUpdate> to_update(const nlohmann::json& record);

struct Conservation {
    std::string op_id;
    std::uint64_t produced = 0;
    std::uint64_t delivered_valid = 0;
    std::uint64_t lost_permanently = 0;
    std::uint64_t still_buffered = 0;
    std::uint64_t corrupt_dropped = 0;

    bool holds() const noexcept {
        return produced == delivered_valid + lost_permanently + still_buffered + corrupt_dropped;
    }
    bool operator==(const Conservation&) const = default;
};

struct GpsReading {
    double lat = 0.0;
    double lon = 0.0;
    double hdop = 99.0;
    int satellites = 0;
};

/// Assembles per-session, per-operator sample logs from ingests and RM
/// outcomes. Fed by the live simulation and by trace analysis alike.
class LogBuilder {
public:
    LogBuilder(std::vector<std::string> operators, metrics::GeoPoint reference, double rate_hz);

    void begin_session(const std::string& name, std::int64_t begin_peb, std::int64_t end_peb);
    void ingest(const std::string& op_id, std::uint64_t seq, std::int64_t peb_timestamp, const std::string& leg,
                const GpsReading& gps);
    void accepted(const std::string& op_id, std::uint64_t seq, std::int64_t receive_time);
    void parity_failed(const std::string& op_id, std::uint64_t seq, std::int64_t receive_time);
    void gap(const std::string& op_id, std::uint64_t first, std::uint64_t last);

    /// One log per (session, operator), sessions in order. Logs are named
    /// after the session, or "session.op" with several operators.
    std::vector<metrics::SessionLog> logs() const;

    /// `buffered` is the OP buffer's [oldest, newest] at the end (0, 0 when empty).
    Conservation conservation(const std::string& op_id, std::uint64_t oldest, std::uint64_t newest) const;

private:
    struct Sample {
        std::size_t session = 0;
        std::int64_t peb_timestamp = 0;
        std::string leg;
        std::optional<double> distance_m;
        std::optional<std::int64_t> receive;
        std::optional<std::int64_t> failed_receive;
    };
    struct Session {
        std::string name;
        std::int64_t begin = 0;
        std::int64_t end = 0;
    };
    struct PerOp {
        std::map<std::uint64_t, Sample> samples;
        std::set<std::uint64_t> lost;
    };

    std::vector<std::string> operators_;
    metrics::GeoPoint reference_;
    double rate_hz_;
    std::vector<Session> sessions_;
    std::map<std::string, PerOp> ops_;
};

/// Logs rebuilt from a trace.
std::vector<metrics::SessionLog> session_logs(const TraceData& data);
std::vector<Conservation> conservation(const TraceData& data);

}  // namespace lrs::trace
