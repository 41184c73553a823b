#include "cosim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>
#include <string_view>

#include "cosim/error.hpp"
#include "json.hpp"

namespace cosim {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(path.empty() ? "/" : path, "expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (std::string_view a : allowed) known = known || key == a;
        if (!known) throw ConfigError(path + "/" + key, "unknown key");
    }
}

const json& require_field(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(path + "/" + key, "missing required field");
    return *it;
}

const json* optional_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
    return d;
}

uint64_t as_u64(const json& v, const std::string& path) {
    if (!v.is_number_unsigned()) {
        if (v.is_number_integer()) throw ConfigError(path, "must not be negative");
        throw ConfigError(path, "expected a non-negative integer");
    }
    return v.get<uint64_t>();
}

uint32_t as_u32(const json& v, const std::string& path) {
    const uint64_t x = as_u64(v, path);
    if (x > std::numeric_limits<uint32_t>::max()) throw ConfigError(path, "out of range for a 32-bit value");
    return static_cast<uint32_t>(x);
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

Ipv4 as_ipv4(const json& v, const std::string& path) {
    const std::string text = as_string(v, path);
    auto ip = Ipv4::parse(text);
    if (!ip) throw ConfigError(path, "'" + text + "' is not a dotted-quad IPv4 address");
    return *ip;
}

Vec3 as_vec3(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(path, "expected [x, y, z]");
    return {as_double(v[0], path + "/0"), as_double(v[1], path + "/1"), as_double(v[2], path + "/2")};
}

template <typename T, typename F>
void read_opt(const json& obj, const std::string& path, const char* key, T& out, F conv) {
    if (const json* v = optional_field(obj, key)) out = conv(*v, path + "/" + key);
}

Box parse_box(const json& j, const std::string& path, bool with_loss) {
    if (with_loss) {
        require_object(j, path, {"name", "min", "max", "penetration_loss_db"});
    } else {
        require_object(j, path, {"min", "max"});
    }
    Box b;
    b.min = as_vec3(require_field(j, path, "min"), path + "/min");
    b.max = as_vec3(require_field(j, path, "max"), path + "/max");
    if (with_loss) {
        b.penetration_loss_db = as_double(require_field(j, path, "penetration_loss_db"), path + "/penetration_loss_db");
        if (const json* n = optional_field(j, "name")) as_string(*n, path + "/name");
    }
    return b;
}

WorldModel parse_world(const json& j, const std::string& path) {
    require_object(j, path, {"bounds", "obstacles"});
    WorldModel w;
    w.bounds.min = Vec3{-1e4, -1e4, -1e4};
    w.bounds.max = Vec3{1e4, 1e4, 1e4};
    if (const json* b = optional_field(j, "bounds")) w.bounds = parse_box(*b, path + "/bounds", false);
    if (const json* obs = optional_field(j, "obstacles")) {
        if (!obs->is_array()) throw ConfigError(path + "/obstacles", "expected an array");
        for (size_t i = 0; i < obs->size(); ++i) {
            w.obstacles.push_back(parse_box((*obs)[i], path + "/obstacles/" + std::to_string(i), true));
        }
    }
    return w;
}

AgentTrack parse_track(const json& j, const std::string& path) {
    require_object(j, path, {"agent_id", "waypoints", "speed", "loop", "yaw_aligned"});
    AgentTrack t;
    t.agent_id = as_u32(require_field(j, path, "agent_id"), path + "/agent_id");
    const json& wps = require_field(j, path, "waypoints");
    if (!wps.is_array()) throw ConfigError(path + "/waypoints", "expected an array of [x, y, z]");
    for (size_t i = 0; i < wps.size(); ++i) t.waypoints.push_back(as_vec3(wps[i], path + "/waypoints/" + std::to_string(i)));
    read_opt(j, path, "speed", t.speed, as_double);
    read_opt(j, path, "loop", t.loop, as_bool);
    read_opt(j, path, "yaw_aligned", t.yaw_aligned, as_bool);
    return t;
}

ChannelFidelity parse_fidelity(const json& j, const std::string& path) {
    require_object(j, path, {"kind", "radius_m"});
    const std::string kind = as_string(require_field(j, path, "kind"), path + "/kind");
    if (kind == "los_nlos") {
        if (optional_field(j, "radius_m")) throw ConfigError(path + "/radius_m", "only valid for kind \"disk\"");
        return ChannelFidelity::los_nlos();
    }
    if (kind == "disk") {
        const double r = as_double(require_field(j, path, "radius_m"), path + "/radius_m");
        if (!(r > 0.0)) throw ConfigError(path + "/radius_m", "must be > 0");
        return ChannelFidelity::disk(r);
    }
    throw ConfigError(path + "/kind", "expected \"los_nlos\" or \"disk\", got \"" + kind + "\"");
}

RadioParams parse_radio(const json& j, const std::string& path) {
    require_object(j, path,
                   {"tx_power_dbm", "noise_floor_dbm", "pl0_db", "ref_distance_m", "path_loss_exponent",
                    "per_packet_overhead_ns", "mcs_table", "ber_at_threshold", "ber_decade_per_db", "queue_capacity"});
    RadioParams p;
    read_opt(j, path, "tx_power_dbm", p.tx_power_dbm, as_double);
    read_opt(j, path, "noise_floor_dbm", p.noise_floor_dbm, as_double);
    read_opt(j, path, "pl0_db", p.pl0_db, as_double);
    read_opt(j, path, "ref_distance_m", p.ref_distance_m, as_double);
    read_opt(j, path, "path_loss_exponent", p.path_loss_exponent, as_double);
    read_opt(j, path, "per_packet_overhead_ns", p.per_packet_overhead_ns, as_u64);
    read_opt(j, path, "ber_at_threshold", p.ber_at_threshold, as_double);
    read_opt(j, path, "ber_decade_per_db", p.ber_decade_per_db, as_double);
    read_opt(j, path, "queue_capacity", p.queue_capacity, as_u32);
    if (const json* t = optional_field(j, "mcs_table")) {
        if (!t->is_array()) throw ConfigError(path + "/mcs_table", "expected an array");
        p.mcs_table.clear();
        for (size_t i = 0; i < t->size(); ++i) {
            const std::string at = path + "/mcs_table/" + std::to_string(i);
            require_object((*t)[i], at, {"snr_threshold_db", "phy_rate_bps"});
            McsEntry e;
            e.snr_threshold_db = as_double(require_field((*t)[i], at, "snr_threshold_db"), at + "/snr_threshold_db");
            e.phy_rate_bps = as_double(require_field((*t)[i], at, "phy_rate_bps"), at + "/phy_rate_bps");
            p.mcs_table.push_back(e);
        }
    }
    validate(p, path);
    return p;
}

FlowSpec parse_flow(const json& j, const std::string& path) {
    require_object(j, path, {"src", "dst", "payload_size", "arq_window", "retransmit_timeout_ns"});
    FlowSpec f;
    f.src = as_ipv4(require_field(j, path, "src"), path + "/src");
    f.dst = as_ipv4(require_field(j, path, "dst"), path + "/dst");
    read_opt(j, path, "payload_size", f.payload_size, as_u32);
    read_opt(j, path, "arq_window", f.arq_window, as_u32);
    read_opt(j, path, "retransmit_timeout_ns", f.retransmit_timeout_ns, as_u64);
    return f;
}

MetricsConfig parse_metrics(const json& j, const std::string& path) {
    require_object(j, path, {"sample_period_ns", "smoothing_window_ns", "histogram_bins"});
    MetricsConfig m;
    read_opt(j, path, "sample_period_ns", m.sample_period_ns, as_u64);
    read_opt(j, path, "smoothing_window_ns", m.smoothing_window_ns, as_u64);
    read_opt(j, path, "histogram_bins", m.histogram_bins, as_u32);
    return m;
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("/", std::string("JSON parse error: ") + e.what());
    }
    require_object(doc, "",
                   {"name", "world", "tracks", "agent_address_map", "radio", "window_ns", "duration_ns", "fidelity",
                    "flows", "seed", "metrics", "substeps_per_window", "expiry_windows"});
    ScenarioConfig c;
    read_opt(doc, "", "name", c.name, as_string);
    if (const json* w = optional_field(doc, "world")) c.world = parse_world(*w, "/world");
    else c.world = parse_world(json::object(), "/world");

    const json& tracks = require_field(doc, "", "tracks");
    if (!tracks.is_array()) throw ConfigError("/tracks", "expected an array");
    for (size_t i = 0; i < tracks.size(); ++i) c.tracks.push_back(parse_track(tracks[i], "/tracks/" + std::to_string(i)));

    const json& map = require_field(doc, "", "agent_address_map");
    if (!map.is_array()) throw ConfigError("/agent_address_map", "expected an array");
    std::vector<AgentAddress> entries;
    for (size_t i = 0; i < map.size(); ++i) {
        const std::string at = "/agent_address_map/" + std::to_string(i);
        require_object(map[i], at, {"agent_id", "address"});
        entries.push_back({as_u32(require_field(map[i], at, "agent_id"), at + "/agent_id"),
                           as_ipv4(require_field(map[i], at, "address"), at + "/address")});
    }
    try {
        c.agent_address_map = AgentAddressMap(std::move(entries));
    } catch (const ConfigError& e) {
        throw ConfigError("/agent_address_map", e.what());
    }

    if (const json* r = optional_field(doc, "radio")) c.radio = parse_radio(*r, "/radio");
    read_opt(doc, "", "window_ns", c.window_ns, as_u64);
    c.duration_ns = as_u64(require_field(doc, "", "duration_ns"), "/duration_ns");
    if (const json* f = optional_field(doc, "fidelity")) c.fidelity = parse_fidelity(*f, "/fidelity");

    const json& flows = require_field(doc, "", "flows");
    if (!flows.is_array()) throw ConfigError("/flows", "expected an array");
    for (size_t i = 0; i < flows.size(); ++i) c.flows.push_back(parse_flow(flows[i], "/flows/" + std::to_string(i)));

    read_opt(doc, "", "seed", c.seed, as_u64);
    if (const json* m = optional_field(doc, "metrics")) c.metrics = parse_metrics(*m, "/metrics");
    read_opt(doc, "", "substeps_per_window", c.substeps_per_window, as_u32);
    read_opt(doc, "", "expiry_windows", c.expiry_windows, as_u64);

    validate(c);
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot open scenario file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str());
}

void validate(const ScenarioConfig& c) {
    if (c.window_ns == 0) throw ConfigError("/window_ns", "must be positive");
    if (c.duration_ns == 0) throw ConfigError("/duration_ns", "must be positive");
    if (c.duration_ns % c.window_ns != 0) {
        throw ConfigError("/duration_ns", "duration_ns " + std::to_string(c.duration_ns) +
                                              " is not a multiple of window_ns " + std::to_string(c.window_ns));
    }
    const MetricsConfig& m = c.metrics;
    if (m.sample_period_ns == 0 || m.sample_period_ns % c.window_ns != 0) {
        throw ConfigError("/metrics/sample_period_ns", "sample_period_ns " + std::to_string(m.sample_period_ns) +
                                                           " is not a positive multiple of window_ns " +
                                                           std::to_string(c.window_ns));
    }
    if (c.duration_ns % m.sample_period_ns != 0) {
        throw ConfigError("/duration_ns", "duration_ns " + std::to_string(c.duration_ns) +
                                              " is not a multiple of sample_period_ns " +
                                              std::to_string(m.sample_period_ns));
    }
    if (m.smoothing_window_ns == 0 || m.smoothing_window_ns % m.sample_period_ns != 0) {
        throw ConfigError("/metrics/smoothing_window_ns", "smoothing_window_ns " +
                                                              std::to_string(m.smoothing_window_ns) +
                                                              " is not a positive multiple of sample_period_ns " +
                                                              std::to_string(m.sample_period_ns));
    }
    if (m.histogram_bins == 0) throw ConfigError("/metrics/histogram_bins", "must be positive");
    if (c.substeps_per_window == 0 || c.window_ns % c.substeps_per_window != 0) {
        throw ConfigError("/substeps_per_window", "must be positive and divide window_ns");
    }
    if (c.expiry_windows == 0) throw ConfigError("/expiry_windows", "must be positive");

    validate(c.world);
    validate(c.radio, "/radio");

    if (c.tracks.empty()) throw ConfigError("/tracks", "at least one agent is required");
    std::set<uint32_t> ids;
    for (size_t i = 0; i < c.tracks.size(); ++i) {
        const std::string path = "/tracks/" + std::to_string(i);
        const AgentTrack& t = c.tracks[i];
        validate(t, path);
        if (!ids.insert(t.agent_id).second) throw ConfigError(path + "/agent_id", "duplicate agent id");
        for (size_t w = 0; w < t.waypoints.size(); ++w) {
            if (!c.world.bounds.contains(t.waypoints[w])) {
                throw ConfigError(path + "/waypoints/" + std::to_string(w), "waypoint lies outside the world bounds");
            }
        }
        if (!c.agent_address_map.address_of(t.agent_id)) {
            throw ConfigError(path + "/agent_id",
                              "agent " + std::to_string(t.agent_id) + " has no entry in agent_address_map");
        }
    }
    if (*ids.rbegin() != ids.size() - 1) {
        throw ConfigError("/tracks", "agent ids must be 0.." + std::to_string(ids.size() - 1));
    }
    for (size_t i = 0; i < c.agent_address_map.entries().size(); ++i) {
        const AgentAddress& e = c.agent_address_map.entries()[i];
        if (ids.count(e.agent_id) == 0) {
            throw ConfigError("/agent_address_map/" + std::to_string(i) + "/agent_id",
                              "agent " + std::to_string(e.agent_id) + " has no track");
        }
    }

    for (size_t i = 0; i < c.flows.size(); ++i) {
        const std::string path = "/flows/" + std::to_string(i);
        const FlowSpec& f = c.flows[i];
        if (!c.agent_address_map.contains(f.src)) {
            throw ConfigError(path + "/src", f.src.to_string() + " is not in agent_address_map");
        }
        if (!c.agent_address_map.contains(f.dst)) {
            throw ConfigError(path + "/dst", f.dst.to_string() + " is not in agent_address_map");
        }
        if (f.src == f.dst) throw ConfigError(path + "/dst", "source and destination are the same address");
        if (f.payload_size == 0 || f.payload_size > 65'000) {
            throw ConfigError(path + "/payload_size", "must lie in [1, 65000]");
        }
        if (f.arq_window == 0) throw ConfigError(path + "/arq_window", "must be positive");
        if (f.retransmit_timeout_ns == 0) throw ConfigError(path + "/retransmit_timeout_ns", "must be positive");
    }
}

std::string scenario_to_json(const ScenarioConfig& c, int indent) {
    json doc;
    doc["name"] = c.name;
    json obstacles = json::array();
    for (const Box& b : c.world.obstacles) {
        obstacles.push_back({{"min", vec3_json(b.min)}, {"max", vec3_json(b.max)},
                             {"penetration_loss_db", b.penetration_loss_db}});
    }
    doc["world"] = {{"bounds", {{"min", vec3_json(c.world.bounds.min)}, {"max", vec3_json(c.world.bounds.max)}}},
                    {"obstacles", obstacles}};
    json tracks = json::array();
    for (const AgentTrack& t : c.tracks) {
        json wps = json::array();
        for (const Vec3& w : t.waypoints) wps.push_back(vec3_json(w));
        tracks.push_back({{"agent_id", t.agent_id},
                          {"waypoints", wps},
                          {"speed", t.speed},
                          {"loop", t.loop},
                          {"yaw_aligned", t.yaw_aligned}});
    }
    doc["tracks"] = tracks;
    json map = json::array();
    for (const AgentAddress& e : c.agent_address_map.entries()) {
        map.push_back({{"agent_id", e.agent_id}, {"address", e.address.to_string()}});
    }
    doc["agent_address_map"] = map;
    json mcs = json::array();
    for (const McsEntry& e : c.radio.mcs_table) {
        mcs.push_back({{"snr_threshold_db", e.snr_threshold_db}, {"phy_rate_bps", e.phy_rate_bps}});
    }
    doc["radio"] = {{"tx_power_dbm", c.radio.tx_power_dbm},
                    {"noise_floor_dbm", c.radio.noise_floor_dbm},
                    {"pl0_db", c.radio.pl0_db},
                    {"ref_distance_m", c.radio.ref_distance_m},
                    {"path_loss_exponent", c.radio.path_loss_exponent},
                    {"per_packet_overhead_ns", c.radio.per_packet_overhead_ns},
                    {"mcs_table", mcs},
                    {"ber_at_threshold", c.radio.ber_at_threshold},
                    {"ber_decade_per_db", c.radio.ber_decade_per_db},
                    {"queue_capacity", c.radio.queue_capacity}};
    doc["window_ns"] = c.window_ns;
    doc["duration_ns"] = c.duration_ns;
    if (c.fidelity.kind() == ChannelFidelity::Kind::kDisk) {
        doc["fidelity"] = {{"kind", "disk"}, {"radius_m", c.fidelity.radius()}};
    } else {
        doc["fidelity"] = {{"kind", "los_nlos"}};
    }
    json flows = json::array();
    for (const FlowSpec& f : c.flows) {
        flows.push_back({{"src", f.src.to_string()},
                         {"dst", f.dst.to_string()},
                         {"payload_size", f.payload_size},
                         {"arq_window", f.arq_window},
                         {"retransmit_timeout_ns", f.retransmit_timeout_ns}});
    }
    doc["flows"] = flows;
    doc["seed"] = c.seed;
    doc["metrics"] = {{"sample_period_ns", c.metrics.sample_period_ns},
                      {"smoothing_window_ns", c.metrics.smoothing_window_ns},
                      {"histogram_bins", c.metrics.histogram_bins}};
    doc["substeps_per_window"] = c.substeps_per_window;
    doc["expiry_windows"] = c.expiry_windows;
    return doc.dump(indent);
}

}  // namespace cosim
