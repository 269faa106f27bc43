#include "lrs/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "lrs/error.hpp"
#include "lrs/op_node.hpp"

namespace lrs::harness {

double plane_distance(PlanePoint a, PlanePoint b) { return std::hypot(a.east_m - b.east_m, a.north_m - b.north_m); }

metrics::GeoPoint to_geo(metrics::GeoPoint origin, PlanePoint p) {
    constexpr double deg = 180.0 / std::numbers::pi;
    double lat = origin.lat + p.north_m / metrics::kEarthRadiusM * deg;
    double lon = origin.lon + p.east_m / (metrics::kEarthRadiusM * std::cos(origin.lat / deg)) * deg;
    return {lat, lon};
}

std::string_view to_string(OrientationRule r) {
    switch (r) {
        case OrientationRule::automatic: return "auto";
        case OrientationRule::facing_rm: return "facing_rm";
        case OrientationRule::back_to_rm: return "back_to_rm";
    }
    return "?";
}

OrientationRule parse_orientation_rule(std::string_view s) {
    if (s == "auto") return OrientationRule::automatic;
    if (s == "facing_rm") return OrientationRule::facing_rm;
    if (s == "back_to_rm") return OrientationRule::back_to_rm;
    throw ConfigError("unknown orientation rule '" + std::string(s) + "'");
}

void Scenario::validate() const {
    if (name.empty()) throw ConfigError("scenario needs a name");
    if (operators.empty()) throw ConfigError("scenario needs at least one operator");
    if (operators.size() > rm.max_operators)
        throw ConfigError("scenario has more operators than the RM accepts (" + std::to_string(rm.max_operators) + ")");
    for (std::size_t i = 0; i < operators.size(); ++i) {
        const auto& op = operators[i];
        if (op.id.empty() || op.id.size() > ban::kDeviceIdWidth) throw ConfigError("operator id must be 1-16 bytes");
        for (std::size_t j = 0; j < i; ++j)
            if (operators[j].id == op.id) throw ConfigError("duplicate operator '" + op.id + "'");
        if (op.path.empty()) throw ConfigError("operator '" + op.id + "' needs a path");
        if (!(op.battery_start >= 0.0 && op.battery_start <= 1.0)) throw ConfigError("battery must be in [0, 1]");
        if (op.battery_drain_per_h < 0.0) throw ConfigError("battery drain must be non-negative");
        for (const auto& w : op.co_spikes)
            if (w.end <= w.start) throw ConfigError("CO spike window must have end > start");
        for (const auto& w : op.access_outages)
            if (w.end <= w.start) throw ConfigError("outage window must have end > start");
    }
    if (sessions.empty()) throw ConfigError("scenario needs at least one session");
    for (const auto& s : sessions) {
        if (s.name.empty()) throw ConfigError("session needs a name");
        if (s.duration_ms <= 0) throw ConfigError("session '" + s.name + "' needs duration > 0");
        if (relay && s.site_m <= 0.0) throw ConfigError("session '" + s.name + "' needs an RT site distance");
    }
    if (sampling_period_ms < op::kMinSamplingPeriodMs) throw ConfigError("sampling period below 100 ms");
    if (buffer_capacity == 0) throw ConfigError("buffer capacity must be positive");
    if (drain_ms < 0) throw ConfigError("drain must be non-negative");
    if (!(speed_mps > 0.0)) throw ConfigError("walking speed must be positive");
    if (gps_jitter_m < 0.0 || !(gps_dropout >= 0.0 && gps_dropout <= 1.0)) throw ConfigError("bad GPS noise settings");
    if (!(bin_m > 0.0)) throw ConfigError("bin width must be positive");
    if (rm.poll_period_ms <= 0 || rm.reply_timeout_ms <= 0 || rm.timeout_threshold <= 0 || rm.reconnect_interval_ms <= 0)
        throw ConfigError("RM timers must be positive");
    link::Position{origin.lat, origin.lon}.validate();
    access.validate();
    backhaul.validate();
}

std::int64_t Scenario::session_start(std::size_t index) const {
    std::int64_t t = 0;
    for (std::size_t i = 0; i < index && i < sessions.size(); ++i) t += sessions[i].duration_ms + drain_ms;
    return t;
}

std::int64_t Scenario::end_time() const { return session_start(sessions.size()); }

std::int64_t Scenario::path_duration_ms(const OperatorSpec& op) const {
    double length = 0.0;
    for (std::size_t i = 1; i < op.path.size(); ++i) length += plane_distance(op.path[i - 1], op.path[i]);
    return static_cast<std::int64_t>(std::llround(length / speed_mps * 1000.0));
}

PlanePoint Scenario::anchor(const SessionSpec& session) const {
    return relay ? PlanePoint{0.0, session.site_m} : PlanePoint{};
}

Pose Scenario::pose(const OperatorSpec& op, const SessionSpec& session, std::int64_t session_time) const {
    auto base = anchor(session);
    double walked = speed_mps * static_cast<double>(std::max<std::int64_t>(0, session_time)) / 1000.0;
    PlanePoint rel = op.path.back();
    std::string leg = "static";
    for (std::size_t i = 1; i < op.path.size(); ++i) {
        auto a = op.path[i - 1];
        auto b = op.path[i];
        double len = plane_distance(a, b);
        if (len <= 0.0) continue;
        if (walked < len) {
            double f = walked / len;
            rel = {a.east_m + f * (b.east_m - a.east_m), a.north_m + f * (b.north_m - a.north_m)};
            double radial = rel.east_m * (b.east_m - a.east_m) + rel.north_m * (b.north_m - a.north_m);
            leg = radial > 0.0 ? "out" : "back";
            break;
        }
        walked -= len;
    }
    Pose p;
    p.position = {base.east_m + rel.east_m, base.north_m + rel.north_m};
    p.leg = leg;
    switch (op.orientation) {
        case OrientationRule::automatic:
            p.orientation = leg == "out" ? link::Orientation::back_to_rm : link::Orientation::facing_rm;
            break;
        case OrientationRule::facing_rm: p.orientation = link::Orientation::facing_rm; break;
        case OrientationRule::back_to_rm: p.orientation = link::Orientation::back_to_rm; break;
    }
    return p;
}

double Scenario::access_distance(const Pose& pose, const SessionSpec& session) const {
    return plane_distance(pose.position, anchor(session));
}

namespace {

link::LinkConfig default_link(link::AntennaKind near_end, link::AntennaKind far_end) {
    link::LinkConfig c;
    c.near_end = link::AntennaProfile::of(near_end);
    c.far_end = link::AntennaProfile::of(far_end);
    c.outage = link::OutageChain::from_dwell(600000.0, 1500.0);
    return c;
}

}  // namespace

std::vector<double> long_range_sites() { return {280, 520, 760, 900, 930, 960, 990, 1020, 1045, 1065, 1081}; }

Scenario scenario_short_range(std::string_view case_name) {
    link::AntennaKind rm_antenna;
    if (case_name == "omni")
        rm_antenna = link::AntennaKind::omni;
    else if (case_name == "directional")
        rm_antenna = link::AntennaKind::directional_90x15;
    else
        throw ConfigError("short-range case must be omni or directional");
    Scenario s;
    s.name = "short_range_" + std::string(case_name);
    s.seed = case_name == "omni" ? 1 : 2;
    s.access = default_link(link::AntennaKind::textile_front, rm_antenna);
    s.backhaul = default_link(link::AntennaKind::directional_30x30, link::AntennaKind::directional_30x30);
    OperatorSpec op;
    op.id = "op1";
    op.path = {{0.0, 5.0}, {0.0, 400.0}, {0.0, 5.0}};
    s.operators = {op};
    auto duration = s.path_duration_ms(op);
    for (int rep = 1; rep <= 4; ++rep) s.sessions.push_back({"rep" + std::to_string(rep), duration, 0.0});
    return s;
}

Scenario scenario_long_range() {
    Scenario s;
    s.name = "long_range";
    s.seed = 1;
    s.relay = true;
    s.access = default_link(link::AntennaKind::textile_front, link::AntennaKind::omni);
    s.backhaul = default_link(link::AntennaKind::directional_30x30, link::AntennaKind::directional_30x30);
    OperatorSpec op;
    op.id = "op1";
    op.path = {{3.0, 0.0}};
    op.orientation = OrientationRule::facing_rm;
    s.operators = {op};
    for (double d : long_range_sites())
        s.sessions.push_back({"site_" + std::to_string(static_cast<int>(d)) + "m", 600000, d});
    return s;
}

Scenario scenario_field_demo() {
    Scenario s;
    s.name = "field_demo";
    s.seed = 7;
    s.access = default_link(link::AntennaKind::textile_front, link::AntennaKind::omni);
    s.backhaul = default_link(link::AntennaKind::directional_30x30, link::AntennaKind::directional_30x30);
    OperatorSpec a;
    a.id = "op1";
    a.path = {{0.0, 20.0}, {150.0, 150.0}, {-100.0, 300.0}, {0.0, 20.0}};
    OperatorSpec b;
    b.id = "op2";
    b.path = {{-30.0, 10.0}, {-250.0, 200.0}, {-30.0, 10.0}};
    b.battery_start = 0.9;
    b.co_spikes = {{120000, 420000}};
    OperatorSpec c;
    c.id = "op3";
    c.path = {{40.0, 0.0}, {350.0, 50.0}};
    c.battery_start = 0.17;
    c.battery_drain_per_h = 0.2;
    c.access_outages = {{200000, 260000}};
    s.operators = {a, b, c};
    s.sessions = {{"field_demo", 600000, 0.0}};
    return s;
}

std::vector<std::string> builtin_names() {
    return {"short_range_omni", "short_range_directional", "long_range", "field_demo"};
}

Scenario builtin(std::string_view name) {
    if (name == "short_range_omni") return scenario_short_range("omni");
    if (name == "short_range_directional") return scenario_short_range("directional");
    if (name == "long_range") return scenario_long_range();
    if (name == "field_demo") return scenario_field_demo();
    throw NotFoundError("no builtin scenario '" + std::string(name) + "'");
}

// ---- text format ----

namespace {

using Section = std::map<std::string, std::string>;

std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    auto first = text.data();
    auto last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ConfigError("bad value for '" + key + "': '" + text + "'");
    return v;
}

std::vector<std::string> words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

class Reader {
public:
    Reader(const boost::property_tree::ptree& tree, const std::string& name) : name_(name) {
        if (auto child = tree.get_child_optional(boost::property_tree::ptree::path_type(name, '\0')))
            for (const auto& [k, v] : *child) values_[k] = v.data();
    }

    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions() == 0 && !values_.empty())
            throw ConfigError("unknown key '" + values_.begin()->first + "' in [" + name_ + "]");
    }

    std::optional<std::string> take(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        auto v = it->second;
        values_.erase(it);
        return v;
    }

    /// Keys starting with `prefix`, removed from the section.
    Section take_prefixed(const std::string& prefix) {
        Section out;
        for (auto it = values_.begin(); it != values_.end();) {
            if (it->first.starts_with(prefix)) {
                out[it->first.substr(prefix.size())] = it->second;
                it = values_.erase(it);
            } else {
                ++it;
            }
        }
        return out;
    }

    template <class T>
    void number(const std::string& key, T& out) {
        if (auto v = take(key)) out = parse_number<T>(key, *v);
    }

    void flag(const std::string& key, bool& out) {
        if (auto v = take(key)) {
            if (*v == "true" || *v == "1" || *v == "yes")
                out = true;
            else if (*v == "false" || *v == "0" || *v == "no")
                out = false;
            else
                throw ConfigError("bad boolean for '" + key + "': '" + *v + "'");
        }
    }

private:
    std::string name_;
    Section values_;
};

std::vector<link::OutageWindow> parse_windows(const std::string& key, const std::string& text) {
    std::vector<link::OutageWindow> out;
    for (const auto& w : words(text)) {
        auto dash = w.find('-');
        if (dash == std::string::npos) throw ConfigError("'" + key + "' expects start-end windows");
        out.push_back({parse_number<std::int64_t>(key, w.substr(0, dash)), parse_number<std::int64_t>(key, w.substr(dash + 1))});
    }
    return out;
}

std::string format_windows(const std::vector<link::OutageWindow>& ws) {
    std::string out;
    for (const auto& w : ws) {
        if (!out.empty()) out += ' ';
        out += std::to_string(w.start) + "-" + std::to_string(w.end);
    }
    return out;
}

std::vector<PlanePoint> parse_path(const std::string& key, const std::string& text) {
    std::vector<PlanePoint> out;
    for (const auto& w : words(text)) {
        auto comma = w.find(',');
        if (comma == std::string::npos) throw ConfigError("'" + key + "' expects east,north pairs");
        out.push_back({parse_number<double>(key, w.substr(0, comma)), parse_number<double>(key, w.substr(comma + 1))});
    }
    return out;
}

constexpr const char* kLinkKeys[] = {"p_near", "knee_m", "cutoff_m", "back_penalty", "mean_good_ms",
                                     "mean_bad_ms", "latency_ms", "corruption_rate", "outages"};

void apply_link_key(link::LinkConfig& c, const std::string& key, const std::string& value, const std::string& full) {
    if (key == "p_near")
        c.calibration.p_near = parse_number<double>(full, value);
    else if (key == "knee_m")
        c.calibration.knee_m = parse_number<double>(full, value);
    else if (key == "cutoff_m")
        c.calibration.cutoff_m = parse_number<double>(full, value);
    else if (key == "back_penalty")
        c.calibration.back_penalty = parse_number<double>(full, value);
    else if (key == "mean_good_ms")
        c.outage.p_good_to_bad = link::OutageChain::from_dwell(parse_number<double>(full, value), 0).p_good_to_bad;
    else if (key == "mean_bad_ms")
        c.outage.p_bad_to_good = link::OutageChain::from_dwell(0, parse_number<double>(full, value)).p_bad_to_good;
    else if (key == "latency_ms")
        c.latency_ms = parse_number<std::int64_t>(full, value);
    else if (key == "corruption_rate")
        c.corruption_rate = parse_number<double>(full, value);
    else if (key == "outages")
        c.forced_outages = parse_windows(full, value);
    else
        throw ConfigError("unknown key '" + full + "' in [links]");
}

double dwell(double p) { return p > 0.0 ? static_cast<double>(link::kTickMs) / p : 0.0; }

void write_link(std::ostream& out, const std::string& prefix, const link::LinkConfig& c) {
    out << prefix << "p_near = " << fmt(c.calibration.p_near) << "\n";
    out << prefix << "knee_m = " << fmt(c.calibration.knee_m) << "\n";
    out << prefix << "cutoff_m = " << fmt(c.calibration.cutoff_m) << "\n";
    out << prefix << "back_penalty = " << fmt(c.calibration.back_penalty) << "\n";
    out << prefix << "mean_good_ms = " << fmt(dwell(c.outage.p_good_to_bad)) << "\n";
    out << prefix << "mean_bad_ms = " << fmt(dwell(c.outage.p_bad_to_good)) << "\n";
    out << prefix << "latency_ms = " << c.latency_ms << "\n";
    out << prefix << "corruption_rate = " << fmt(c.corruption_rate) << "\n";
    if (!c.forced_outages.empty()) out << prefix << "outages = " << format_windows(c.forced_outages) << "\n";
}

}  // namespace

Scenario load_scenario(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("scenario file: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    for (const auto& [name, child] : tree)
        if (name != "session" && name != "nodes" && name != "links" && name != "mobility")
            throw ConfigError("unknown section [" + name + "]");

    Scenario s;
    s.access = default_link(link::AntennaKind::textile_front, link::AntennaKind::omni);
    s.backhaul = default_link(link::AntennaKind::directional_30x30, link::AntennaKind::directional_30x30);
    std::optional<std::string> duration_text;
    std::optional<std::string> sites_text;
    int repetitions = 1;
    {
        Reader r(tree, "session");
        s.name = r.take("name").value_or("");
        r.number("seed", s.seed);
        r.number("sampling_period_ms", s.sampling_period_ms);
        r.number("buffer_capacity", s.buffer_capacity);
        r.number("drain_ms", s.drain_ms);
        r.number("peb_clock_base_ms", s.peb_clock_base_ms);
        r.number("rm_clock_base_ms", s.rm_clock_base_ms);
        r.number("bin_m", s.bin_m);
        r.number("repetitions", repetitions);
        if (auto v = r.take("origin")) {
            auto w = words(*v);
            if (w.size() != 2) throw ConfigError("origin expects 'lat lon'");
            s.origin = {parse_number<double>("origin", w[0]), parse_number<double>("origin", w[1])};
        }
        duration_text = r.take("duration_ms");
        sites_text = r.take("sites_m");
    }
    std::vector<std::string> op_ids;
    {
        Reader r(tree, "nodes");
        op_ids = words(r.take("operators").value_or(""));
        r.flag("relay", s.relay);
        if (auto v = r.take("op_antenna")) s.access.near_end = link::AntennaProfile::of(link::parse_antenna(*v));
        auto rm_antenna = r.take("rm_antenna");
        if (auto v = r.take("rt_access_antenna")) s.access.far_end = link::AntennaProfile::of(link::parse_antenna(*v));
        if (auto v = r.take("rt_backhaul_antenna"))
            s.backhaul.near_end = link::AntennaProfile::of(link::parse_antenna(*v));
        if (rm_antenna) {
            auto profile = link::AntennaProfile::of(link::parse_antenna(*rm_antenna));
            (s.relay ? s.backhaul.far_end : s.access.far_end) = profile;
        }
        r.number("max_operators", s.rm.max_operators);
        r.number("poll_period_ms", s.rm.poll_period_ms);
        r.number("reply_timeout_ms", s.rm.reply_timeout_ms);
        r.number("timeout_threshold", s.rm.timeout_threshold);
        r.number("reconnect_interval_ms", s.rm.reconnect_interval_ms);
        r.flag("catch_up", s.rm.catch_up);
    }
    for (const auto& id : op_ids) {
        OperatorSpec op;
        op.id = id;
        s.operators.push_back(std::move(op));
    }
    {
        Reader r(tree, "links");
        auto access = r.take_prefixed("access.");
        auto backhaul = r.take_prefixed("backhaul.");
        std::map<std::string, Section> per_op;
        for (const auto& id : op_ids) per_op[id] = r.take_prefixed(id + ".");
        for (const char* key : kLinkKeys) {
            if (auto v = r.take(key)) {
                apply_link_key(s.access, key, *v, key);
                apply_link_key(s.backhaul, key, *v, key);
            }
        }
        for (const auto& [k, v] : access) apply_link_key(s.access, k, v, "access." + k);
        for (const auto& [k, v] : backhaul) apply_link_key(s.backhaul, k, v, "backhaul." + k);
        for (auto& op : s.operators)
            for (const auto& [k, v] : per_op[op.id]) {
                if (k != "outages") throw ConfigError("unknown key '" + op.id + "." + k + "' in [links]");
                op.access_outages = parse_windows(op.id + "." + k, v);
            }
    }
    {
        Reader r(tree, "mobility");
        r.number("speed_mps", s.speed_mps);
        r.number("gps_jitter_m", s.gps_jitter_m);
        r.number("gps_dropout", s.gps_dropout);
        for (auto& op : s.operators) {
            auto keys = r.take_prefixed(op.id + ".");
            for (const auto& [k, v] : keys) {
                auto full = op.id + "." + k;
                if (k == "path")
                    op.path = parse_path(full, v);
                else if (k == "orientation")
                    op.orientation = parse_orientation_rule(v);
                else if (k == "battery")
                    op.battery_start = parse_number<double>(full, v);
                else if (k == "battery_drain_per_h")
                    op.battery_drain_per_h = parse_number<double>(full, v);
                else if (k == "co_spikes")
                    op.co_spikes = parse_windows(full, v);
                else
                    throw ConfigError("unknown key '" + full + "' in [mobility]");
            }
        }
    }

    auto duration_for = [&]() -> std::int64_t {
        if (duration_text && *duration_text != "auto") return parse_number<std::int64_t>("duration_ms", *duration_text);
        std::int64_t longest = 0;
        for (const auto& op : s.operators) longest = std::max(longest, s.path_duration_ms(op));
        return longest;
    };
    if (sites_text) {
        for (const auto& w : words(*sites_text)) {
            double d = parse_number<double>("sites_m", w);
            s.sessions.push_back({"site_" + w + "m", duration_for(), d});
        }
    } else {
        if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
        for (int i = 1; i <= repetitions; ++i)
            s.sessions.push_back({repetitions == 1 ? s.name : "rep" + std::to_string(i), duration_for(), 0.0});
    }
    s.validate();
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    return load_scenario(in);
}

void write_scenario(std::ostream& out, const Scenario& s) {
    bool same_duration = std::all_of(s.sessions.begin(), s.sessions.end(),
                                     [&](const SessionSpec& x) { return x.duration_ms == s.sessions.front().duration_ms; });
    if (!same_duration) throw ConfigError("the text format needs one duration for all sessions");
    out << "[session]\n";
    out << "name = " << s.name << "\n";
    out << "seed = " << s.seed << "\n";
    out << "sampling_period_ms = " << s.sampling_period_ms << "\n";
    out << "buffer_capacity = " << s.buffer_capacity << "\n";
    out << "drain_ms = " << s.drain_ms << "\n";
    out << "peb_clock_base_ms = " << s.peb_clock_base_ms << "\n";
    out << "rm_clock_base_ms = " << s.rm_clock_base_ms << "\n";
    out << "bin_m = " << fmt(s.bin_m) << "\n";
    out << "origin = " << fmt(s.origin.lat) << " " << fmt(s.origin.lon) << "\n";
    out << "duration_ms = " << s.sessions.front().duration_ms << "\n";
    if (s.relay) {
        out << "sites_m =";
        for (const auto& x : s.sessions) out << " " << fmt(x.site_m);
        out << "\n";
    } else {
        out << "repetitions = " << s.sessions.size() << "\n";
    }
    out << "\n[nodes]\n";
    out << "operators =";
    for (const auto& op : s.operators) out << " " << op.id;
    out << "\n";
    out << "relay = " << (s.relay ? "true" : "false") << "\n";
    out << "op_antenna = " << link::to_string(s.access.near_end.kind) << "\n";
    if (s.relay) {
        out << "rt_access_antenna = " << link::to_string(s.access.far_end.kind) << "\n";
        out << "rt_backhaul_antenna = " << link::to_string(s.backhaul.near_end.kind) << "\n";
        out << "rm_antenna = " << link::to_string(s.backhaul.far_end.kind) << "\n";
    } else {
        out << "rm_antenna = " << link::to_string(s.access.far_end.kind) << "\n";
    }
    out << "max_operators = " << s.rm.max_operators << "\n";
    out << "poll_period_ms = " << s.rm.poll_period_ms << "\n";
    out << "reply_timeout_ms = " << s.rm.reply_timeout_ms << "\n";
    out << "timeout_threshold = " << s.rm.timeout_threshold << "\n";
    out << "reconnect_interval_ms = " << s.rm.reconnect_interval_ms << "\n";
    out << "catch_up = " << (s.rm.catch_up ? "true" : "false") << "\n";
    out << "\n[links]\n";
    write_link(out, "access.", s.access);
    write_link(out, "backhaul.", s.backhaul);
    for (const auto& op : s.operators)
        if (!op.access_outages.empty()) out << op.id << ".outages = " << format_windows(op.access_outages) << "\n";
    out << "\n[mobility]\n";
    out << "speed_mps = " << fmt(s.speed_mps) << "\n";
    out << "gps_jitter_m = " << fmt(s.gps_jitter_m) << "\n";
    out << "gps_dropout = " << fmt(s.gps_dropout) << "\n";
    for (const auto& op : s.operators) {
        out << op.id << ".path =";
        for (const auto& p : op.path) out << " " << fmt(p.east_m) << "," << fmt(p.north_m);
        out << "\n";
        out << op.id << ".orientation = " << to_string(op.orientation) << "\n";
        out << op.id << ".battery = " << fmt(op.battery_start) << "\n";
        out << op.id << ".battery_drain_per_h = " << fmt(op.battery_drain_per_h) << "\n";
        if (!op.co_spikes.empty()) out << op.id << ".co_spikes = " << format_windows(op.co_spikes) << "\n";
    }
}

Scenario resolve_scenario(const std::string& name_or_path) {
    auto names = builtin_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin(name_or_path);
    return load_scenario_file(name_or_path);
}

}  // namespace lrs::harness
