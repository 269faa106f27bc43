#include <doctest.h>

#include <httplib.h>

#include <fstream>
#include <regex>
#include <set>
#include <tuple>
#include <sstream>

#include "lrs/error.hpp"
#include "lrs/gateway.hpp"
#include "lrs/replay.hpp"
#include "lrs/sim.hpp"

using namespace lrs;
using namespace lrs::gateway;
using nlohmann::json;
using harness::Scenario;
using harness::builtin;

namespace {

// Enough of JSON Schema for the gateway document: $ref, type, enum, const,
// required, properties, additionalProperties, items, allOf, pattern.
class SchemaCheck {
public:
    explicit SchemaCheck(json root) : root_(std::move(root)) {}

    const json& part(std::size_t one_of) const { return root_["oneOf"][one_of]; }

    std::vector<std::string> errors(const json& v, const json& s, const std::string& at = "$") const {
        std::vector<std::string> out;
        check(v, s, at, out);
        return out;
    }

private:
    const json& resolve(const json& s) const {
        if (!s.contains("$ref")) return s;
        auto ref = s["$ref"].get<std::string>();
        REQUIRE(ref.rfind("#/$defs/", 0) == 0);
        return root_["$defs"][ref.substr(8)];
    }

    static bool has_type(const json& v, const std::string& t) {
        if (t == "object") return v.is_object();
        if (t == "array") return v.is_array();
        if (t == "string") return v.is_string();
        if (t == "boolean") return v.is_boolean();
        if (t == "null") return v.is_null();
        if (t == "integer") return v.is_number_integer();
        if (t == "number") return v.is_number();
        return false;
    }

    void check(const json& v, const json& schema, const std::string& at, std::vector<std::string>& out) const {
        const json& s = resolve(schema);
        if (s.contains("allOf"))
            for (const auto& sub : s["allOf"]) check(v, sub, at, out);
        if (s.contains("type")) {
            bool ok = false;
            if (s["type"].is_array()) {
                for (const auto& t : s["type"]) ok |= has_type(v, t.get<std::string>());
            } else {
                ok = has_type(v, s["type"].get<std::string>());
            }
            if (!ok) {
                out.push_back(at + ": wrong type " + v.dump());
                return;
            }
        }
        if (v.is_null()) return;
        if (s.contains("const") && v != s["const"]) out.push_back(at + ": expected " + s["const"].dump());
        if (s.contains("enum") && std::find(s["enum"].begin(), s["enum"].end(), v) == s["enum"].end())
            out.push_back(at + ": not in enum: " + v.dump());
        if (s.contains("pattern") && !std::regex_match(v.get<std::string>(), std::regex(s["pattern"].get<std::string>())))
            out.push_back(at + ": pattern mismatch");
        if (v.is_object()) {
            if (s.contains("required"))
                for (const auto& k : s["required"])
                    if (!v.contains(k.get<std::string>())) out.push_back(at + ": missing " + k.get<std::string>());
            for (const auto& [k, sub] : v.items()) {
                if (s.contains("properties") && s["properties"].contains(k))
                    check(sub, s["properties"][k], at + "." + k, out);
                else if (s.contains("additionalProperties") && s["additionalProperties"].is_object())
                    check(sub, s["additionalProperties"], at + "." + k, out);
            }
        }
        if (v.is_array() && s.contains("items"))
            for (std::size_t i = 0; i < v.size(); ++i) check(v[i], s["items"], at + "[" + std::to_string(i) + "]", out);
    }

    json root_;
};

SchemaCheck& schema() {
    static SchemaCheck s([] {
        std::ifstream in(LRS_SOURCE_DIR "/docs/gateway-schema.json");
        REQUIRE(in);
        return json::parse(in);
    }());
    return s;
}

enum Part : std::size_t { kList = 0, kDetail = 1, kHistory = 2, kEvent = 3, kAck = 4, kError = 5 };

void expect_valid(const json& v, Part p) {
    auto errs = schema().errors(v, schema().part(p));
    for (const auto& e : errs) FAIL_CHECK(e);
}

// A live simulation feeding a gateway; commands are run on the caller's
// thread by stepping the simulation until the callback fires.
struct LiveFixture {
    Scenario scenario;
    std::ostringstream trace;
    harness::Simulation sim{scenario, &trace};
    GatewayState state{ban::default_sensor_table(), rm::ThresholdTable::defaults(), "live"};

    explicit LiveFixture(Scenario s = builtin("field_demo")) : scenario(std::move(s)) {
        for (const auto& op : scenario.operators) state.register_operator(op.id);
        sim.set_update_listener([this](std::int64_t, std::span<const rm::RecordUpdate> u) { state.apply_batch(u); });
        state.set_command_sink([this](const std::string& id, proto::QueryMessage q) {
            std::optional<rm::CommandResult> result;
            sim.submit_command(id, q, [&](const rm::CommandResult& r) { result = r; });
            while (!result && !sim.finished()) sim.step();
            return result.value_or(rm::CommandResult{false, "simulation ended", "unavailable"});
        });
    }
};

// field_demo with perfect radio links; op3's scheduled outage stays.
Scenario lossless_field_demo() {
    auto s = builtin("field_demo");
    for (auto* l : {&s.access, &s.backhaul}) {
        l->calibration.p_near = 1.0;
        l->calibration.back_penalty = 1.0;
        l->outage = {};
        l->corruption_rate = 0.0;
    }
    return s;
}

json get_json(httplib::Client& c, const std::string& path, int expect_status) {
    auto res = c.Get(path);
    REQUIRE(res);
    CHECK(res->status == expect_status);
    return json::parse(res->body);
}

json post_json(httplib::Client& c, const std::string& path, const std::string& body, int expect_status) {
    auto res = c.Post(path, body, "application/json");
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect_status, res->body);
    return json::parse(res->body);
}

}  // namespace

TEST_CASE("HTTP endpoints in live mode") {
    LiveFixture f(lossless_field_demo());
    f.sim.run_until(230000);  // op3's access link is out from 200 s to 260 s
    GatewayServer server(f.state);
    int port = server.start("127.0.0.1", 0);
    httplib::Client c("127.0.0.1", port);

    auto list = get_json(c, "/operators", 200);
    expect_valid(list, kList);
    REQUIRE(list["operators"].size() == 3);
    std::map<std::string, json> by_id;
    for (const auto& o : list["operators"]) by_id[o["op_id"]] = o;
    CHECK(by_id["op3"]["phase"] == "DISCONNECTED");
    CHECK(by_id["op3"]["icon_color"] == "GREY");
    CHECK(by_id["op1"]["phase"] == "CONNECTED");
    CHECK(by_id["op1"]["icon_color"] == "GREEN");
    CHECK(by_id["op2"]["icon_color"] == "GREEN");  // CO spike since 120 s, dose not yet reached

    auto detail = get_json(c, "/operators/op1", 200);
    expect_valid(detail, kDetail);
    CHECK(detail["latest"]["sensors"].size() == 11);
    CHECK(detail["latest"]["sensors"]["GPS"]["values"].size() == 7);  // 61 body bytes hold 7 values
    CHECK(detail["latest"]["sensors"]["GPS"]["values"][3] == 9.0);

    auto hist = get_json(c, "/operators/op1/history?after_seq=10&limit=5", 200);
    expect_valid(hist, kHistory);
    REQUIRE(hist["samples"].size() == 5);
    CHECK(hist["samples"][0]["seq"] == 11);
    CHECK(hist["samples"][4]["seq"] == 15);
    CHECK(hist["samples"][0]["frame"].get<std::string>().size() == 2 * 411);

    expect_valid(get_json(c, "/operators/nobody", 404), kError);
    expect_valid(get_json(c, "/operators/nobody/history", 404), kError);
    expect_valid(get_json(c, "/operators/op1/history?after_seq=abc", 400), kError);

    auto err = post_json(c, "/operators/op3/period", R"({"period_ms": 2000})", 503);
    expect_valid(err, kError);
    CHECK(err["error"] == "unavailable");
    CHECK(f.sim.op_node("op3").settings().sampling_period_ms == 1000);

    expect_valid(post_json(c, "/operators/op1/period", R"({"period_ms": 50})", 400), kError);
    expect_valid(post_json(c, "/operators/op1/period", R"({"period": 2000})", 400), kError);
    expect_valid(post_json(c, "/operators/op1/period", "not json", 400), kError);
    expect_valid(post_json(c, "/operators/zz/period", R"({"period_ms": 2000})", 404), kError);

    auto ack = post_json(c, "/operators/op1/period", R"({"period_ms": 2000})", 200);
    expect_valid(ack, kAck);
    CHECK(f.sim.op_node("op1").settings().sampling_period_ms == 2000);

    auto fack = post_json(c, "/operators/op1/filter", R"({"sensors": ["GPS"]})", 200);
    expect_valid(fack, kAck);
    CHECK(f.sim.op_node("op1").settings().query_filter == ban::QueryFilter::only({"GPS"}));
    auto rejected = post_json(c, "/operators/op1/filter", R"({"sensors": ["RADAR"]})", 400);
    CHECK(rejected["error"] == "rejected");
    post_json(c, "/operators/op1/filter", R"({"sensors": "*"})", 200);
    CHECK(f.sim.op_node("op1").settings().query_filter.wildcard);

    // After the filter to GPS only, newer frames carry stale vitals but a position.
    post_json(c, "/operators/op1/filter", R"({"sensors": ["GPS"]})", 200);
    f.sim.run_until(f.sim.now() + 10000);
    auto later = get_json(c, "/operators/op1", 200);
    CHECK(later["latest"]["sensors"]["ELECTRODES"]["present"] == false);
    CHECK(later["latest"]["sensors"]["GPS"]["stale"] == false);
    CHECK(later["codes"]["heart_rate"] == "STALE");

    f.sim.run_until(400000);
    auto op2 = get_json(c, "/operators/op2", 200);
    CHECK(op2["flags"]["environment"] == "WARN");
    CHECK(op2["codes"]["co"] == "HIGH");
    CHECK(op2["icon_color"] == "RED");
    auto op3 = get_json(c, "/operators/op3", 200);
    CHECK(op3["phase"] == "CONNECTED");
    CHECK(op3["permanently_lost"] == 0);
    server.stop();
}

TEST_CASE("server-sent events") {
    LiveFixture f;
    f.sim.run_until(30000);
    GatewayServer server(f.state);
    int port = server.start("127.0.0.1", 0);

    auto collect = [&](const httplib::Headers& headers, const std::string& path, std::size_t want) {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(5, 0);
        std::string buf;
        std::vector<std::pair<std::uint64_t, json>> events;
        c.Get(path, headers, [&](const char* data, std::size_t n) {
            buf.append(data, n);
            std::size_t end;
            while ((end = buf.find("\n\n")) != std::string::npos) {
                auto block = buf.substr(0, end);
                buf.erase(0, end + 2);
                if (block.rfind(":", 0) == 0) continue;
                std::istringstream lines(block);
                std::string line, event;
                std::uint64_t id = 0;
                json data_json;
                while (std::getline(lines, line)) {
                    if (line.rfind("id: ", 0) == 0) id = std::stoull(line.substr(4));
                    if (line.rfind("event: ", 0) == 0) event = line.substr(7);
                    if (line.rfind("data: ", 0) == 0) data_json = json::parse(line.substr(6));
                }
                CHECK(event == "update");
                events.emplace_back(id, data_json);
            }
            return events.size() < want;
        });
        return events;
    };

    auto first = collect({}, "/events?after=0", 20);
    REQUIRE(first.size() >= 20);
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].first == i + 1);
        expect_valid(first[i].second, kEvent);
    }
    auto resumed = collect({{"Last-Event-ID", "10"}}, "/events", 5);
    REQUIRE(resumed.size() >= 5);
    CHECK(resumed[0].first == 11);
    CHECK(resumed[0].second == first[10].second);

    // New events are pushed as the simulation advances.
    auto last = f.state.last_event_id();
    std::thread driver([&] { f.sim.run_until(40000); });
    auto pushed = collect({}, "/events?after=" + std::to_string(last), 3);
    driver.join();
    REQUIRE(pushed.size() >= 3);
    CHECK(pushed[0].first == last + 1);
    f.state.close();
    server.stop();
}

TEST_CASE("icon changes reach the event stream within one poll interval") {
    LiveFixture f;
    // Icon of each operator at the end of every tick with updates, read off the node itself.
    std::map<std::string, rm::IconColor> last;
    std::vector<std::tuple<std::int64_t, std::string, rm::IconColor>> changes;
    for (const auto& op : f.scenario.operators) last[op.id] = f.sim.rm().record(op.id).warnings.icon;
    f.sim.set_update_listener([&](std::int64_t t, std::span<const rm::RecordUpdate> u) {
        f.state.apply_batch(u);
        for (auto& [id, icon] : last) {
            auto now_icon = f.sim.rm().record(id).warnings.icon;
            if (now_icon != icon) changes.emplace_back(t, id, now_icon);
            icon = now_icon;
        }
    });
    f.sim.run();
    auto events = f.state.events_after(0, std::chrono::milliseconds(0));
    const auto poll = f.scenario.rm.poll_period_ms;
    std::set<std::string> changed_ops;
    for (const auto& [t, id, icon] : changes) {
        bool seen = false;
        for (const auto& ev : events)
            if (ev.payload["operator"]["op_id"] == id && ev.time >= t && ev.time <= t + poll &&
                ev.payload["operator"]["icon_color"] == rm::to_string(icon))
                seen = true;
        CHECK_MESSAGE(seen, id << " icon change at " << t);
        changed_ops.insert(id);
    }
    // op2's CO warning and op3's outage both flip icons.
    CHECK(changed_ops.contains("op2"));
    CHECK(changed_ops.contains("op3"));
}

TEST_CASE("live and replay serve identical responses") {
    LiveFixture f;
    f.sim.run();
    std::istringstream in(f.trace.str());
    auto data = trace::read(in);
    GatewayState replayed(harness::trace_sensor_table(data), rm::ThresholdTable::defaults(), "replay");
    harness::replay(data, replayed, 0.0);

    CHECK(replayed.operators_json() == f.state.operators_json());
    for (const auto& op : f.scenario.operators) {
        CHECK(replayed.operator_json(op.id) == f.state.operator_json(op.id));
        CHECK(replayed.history_json(op.id, 0, 1000000) == f.state.history_json(op.id, 0, 1000000));
        CHECK(replayed.snapshot(op.id) == f.sim.rm().record(op.id));
    }
    auto a = f.state.events_after(0, std::chrono::milliseconds(0));
    auto b = replayed.events_after(0, std::chrono::milliseconds(0));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].payload == b[i].payload);
    }

    // Same bytes over HTTP, apart from commands which replay cannot forward.
    GatewayServer live_server(f.state);
    GatewayServer replay_server(replayed);
    httplib::Client lc("127.0.0.1", live_server.start("127.0.0.1", 0));
    httplib::Client rc("127.0.0.1", replay_server.start("127.0.0.1", 0));
    for (std::string path : {"/operators", "/operators/op1", "/operators/op2/history?after_seq=100&limit=20", "/operators/x"}) {
        auto l = lc.Get(path);
        auto r = rc.Get(path);
        REQUIRE(l);
        REQUIRE(r);
        CHECK(l->status == r->status);
        CHECK(l->body == r->body);
    }
    auto cmd = rc.Post("/operators/op1/period", R"({"period_ms": 2000})", "application/json");
    REQUIRE(cmd);
    CHECK(cmd->status == 503);
}
