#include "cosim/physics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "cosim/error.hpp"

namespace cosim {

namespace {

constexpr double kNsPerSecond = 1e9;

// Segment k runs from waypoint k to waypoint k+1 (or back to 0 on a loop).
size_t segment_count(const AgentTrack& track) {
    const size_t n = track.waypoints.size();
    if (n < 2) return 0;
    return track.loop ? n : n - 1;
}

std::pair<Vec3, Vec3> segment(const AgentTrack& track, size_t k) {
    const auto& w = track.waypoints;
    return {w[k], w[(k + 1) % w.size()]};
}

// Locates `arc` (already wrapped/clamped to [0, length]) on the polyline.
std::pair<size_t, double> locate(const AgentTrack& track, double arc) {
    const size_t segs = segment_count(track);
    for (size_t k = 0; k < segs; ++k) {
        const auto [a, b] = segment(track, k);
        const double len = distance(a, b);
        if (arc <= len || k + 1 == segs) return {k, std::min(arc, len)};
        arc -= len;
    }
    return {0, 0.0};
}

double wrap_arc(const AgentTrack& track, double travelled) {
    const double len = track.length();
    if (len <= 0.0) return 0.0;
    if (track.loop) return std::fmod(travelled, len);
    return std::min(travelled, len);
}

Pose pose_of(const AgentTrack& track, double arc) {
    Pose pose;
    pose.position = track.point_at(arc);
    if (track.yaw_aligned) {
        if (auto dir = track.direction_at(arc)) pose.orientation = Quat::from_yaw(std::atan2(dir->y, dir->x));
    }
    return pose;
}

}  // namespace

double AgentTrack::length() const {
    double total = 0.0;
    for (size_t k = 0; k < segment_count(*this); ++k) {
        const auto [a, b] = segment(*this, k);
        total += distance(a, b);
    }
    return total;
}

Vec3 AgentTrack::point_at(double arc) const {
    if (segment_count(*this) == 0) return waypoints.front();
    const auto [k, s] = locate(*this, arc);
    const auto [a, b] = segment(*this, k);
    const double len = distance(a, b);
    return a + (b - a) * (s / len);
}

std::optional<Vec3> AgentTrack::direction_at(double arc) const {
    if (segment_count(*this) == 0) return std::nullopt;
    const auto [k, s] = locate(*this, arc);
    (void)s;
    const auto [a, b] = segment(*this, k);
    return b - a;
}

ChannelFidelity ChannelFidelity::disk(double radius_m) {
    if (!(radius_m > 0.0) || !std::isfinite(radius_m)) throw ConfigError("fidelity.radius_m", "disk radius must be > 0");
    return ChannelFidelity(Kind::kDisk, radius_m);
}

void validate(const Box& box, const std::string& path) {
    if (!is_finite(box.min) || !is_finite(box.max)) throw ConfigError(path, "box corners must be finite");
    if (!(box.min.x < box.max.x && box.min.y < box.max.y && box.min.z < box.max.z)) {
        throw ConfigError(path, "min corner must be below max corner on every axis");
    }
    if (!(box.penetration_loss_db >= 0.0) || !std::isfinite(box.penetration_loss_db)) {
        throw ConfigError(path, "penetration_loss_db must be >= 0");
    }
}

void validate(const WorldModel& world) {
    validate(world.bounds, "/world/bounds");
    for (size_t i = 0; i < world.obstacles.size(); ++i) {
        const std::string path = "/world/obstacles/" + std::to_string(i);
        const Box& b = world.obstacles[i];
        validate(b, path);
        if (!world.bounds.contains(b.min) || !world.bounds.contains(b.max)) {
            throw ConfigError(path, "obstacle lies outside the world bounds");
        }
    }
}

void validate(const AgentTrack& track, const std::string& path) {
    if (track.waypoints.empty()) throw ConfigError(path + "/waypoints", "a track needs at least one waypoint");
    for (size_t i = 0; i < track.waypoints.size(); ++i) {
        if (!is_finite(track.waypoints[i])) {
            throw ConfigError(path + "/waypoints/" + std::to_string(i), "waypoint must be finite");
        }
        if (i > 0 && track.waypoints[i] == track.waypoints[i - 1]) {
            throw ConfigError(path + "/waypoints/" + std::to_string(i), "duplicate consecutive waypoint");
        }
    }
    if (track.loop && track.waypoints.size() > 1 && track.waypoints.back() == track.waypoints.front()) {
        throw ConfigError(path + "/waypoints", "loop track repeats its first waypoint at the end");
    }
    if (!(track.speed > 0.0) || !std::isfinite(track.speed)) throw ConfigError(path + "/speed", "speed must be > 0");
}

AgentState initial_state(const AgentTrack& track) {
    AgentState s;
    s.agent_id = track.agent_id;
    s.pose = pose_of(track, 0.0);
    return s;
}

AgentState advance_agent(const AgentTrack& track, const AgentState& state, uint64_t dt_ns) {
    AgentState next = state;
    next.elapsed_ns = state.elapsed_ns + dt_ns;
    // Arc is recomputed from total elapsed time so long runs do not accumulate drift.
    const double travelled = track.speed * (static_cast<double>(next.elapsed_ns) / kNsPerSecond);
    next.arc_position = wrap_arc(track, travelled);
    next.pose = pose_of(track, next.arc_position);
    return next;
}

std::vector<AgentState> step_world(std::span<const AgentTrack> tracks, std::span<const AgentState> agents,
                                   uint64_t dt_ns) {
    if (tracks.size() != agents.size()) throw ConfigError("", "step_world: one track per agent required");
    std::vector<AgentState> out;
    out.reserve(agents.size());
    for (size_t i = 0; i < agents.size(); ++i) out.push_back(advance_agent(tracks[i], agents[i], dt_ns));
    return out;
}

std::optional<SegmentCrossing> segment_box_crossing(const Vec3& p0, const Vec3& p1, const Box& box) {
    const Vec3 d = p1 - p0;
    double t_enter = 0.0;
    double t_exit = 1.0;
    for (int axis = 0; axis < 3; ++axis) {
        const double o = p0[axis];
        const double lo = box.min[axis];
        const double hi = box.max[axis];
        const double dir = d[axis];
        if (dir == 0.0) {
            // Parallel to this slab: must lie strictly inside it, otherwise the
            // segment misses the box or slides along a face.
            if (!(o > lo && o < hi)) return std::nullopt;
            continue;
        }
        double t0 = (lo - o) / dir;
        double t1 = (hi - o) / dir;
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
        if (!(t_exit > t_enter)) return std::nullopt;
    }
    SegmentCrossing c;
    c.t_entry = t_enter;
    c.t_exit = t_exit;
    c.entry = t_enter == 0.0 ? p0 : p0 + d * t_enter;
    c.exit = t_exit == 1.0 ? p1 : p0 + d * t_exit;
    return c;
}

ChannelData extract_channel_data(const WorldModel& world, std::span<const AgentState> agents,
                                 const ChannelFidelity& fidelity) {
    const size_t n = agents.size();
    std::vector<const AgentState*> by_id(n, nullptr);
    for (const AgentState& a : agents) {
        if (a.agent_id >= n || by_id[a.agent_id] != nullptr) {
            throw ConfigError("/tracks", "agent ids must be dense 0..n-1 without duplicates");
        }
        by_id[a.agent_id] = &a;
    }

    ChannelData cd;
    cd.node_list.reserve(n);
    for (const AgentState* a : by_id) cd.node_list.push_back(a->pose);

    struct Hit {
        double t;
        size_t box;
        Vec3 entry;
    };
    std::vector<Hit> hits;
    for (uint32_t i = 0; i < n; ++i) {
        for (uint32_t j = i + 1; j < n; ++j) {
            const Vec3& pi = cd.node_list[i].position;
            const Vec3& pj = cd.node_list[j].position;
            PathDetails pd;
            pd.ids = {i, j};
            if (fidelity.kind() == ChannelFidelity::Kind::kDisk) {
                pd.los = distance(pi, pj) <= fidelity.radius();
                cd.path_details.push_back(std::move(pd));
                continue;
            }
            hits.clear();
            if (!(pi == pj)) {
                for (size_t b = 0; b < world.obstacles.size(); ++b) {
                    if (auto c = segment_box_crossing(pi, pj, world.obstacles[b])) hits.push_back({c->t_entry, b, c->entry});
                }
            }
            std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
                return a.t != b.t ? a.t < b.t : a.box < b.box;
            });
            if (hits.empty()) {
                pd.los = true;
                pd.num_hops = {0};
            } else {
                pd.los = false;
                pd.num_hops = {static_cast<uint32_t>(hits.size())};
                for (const Hit& h : hits) {
                    pd.hop_points.push_back({h.entry.x, h.entry.y, h.entry.z, world.obstacles[h.box].penetration_loss_db});
                }
            }
            cd.path_details.push_back(std::move(pd));
        }
    }
    return cd;
}

ReferencePhysicsSim::ReferencePhysicsSim(WorldModel world, std::vector<AgentTrack> tracks)
    : world_(std::move(world)), tracks_(std::move(tracks)) {
    std::sort(tracks_.begin(), tracks_.end(),
              [](const AgentTrack& a, const AgentTrack& b) { return a.agent_id < b.agent_id; });
    agents_.reserve(tracks_.size());
    for (const AgentTrack& t : tracks_) agents_.push_back(initial_state(t));
}

void ReferencePhysicsSim::step(uint64_t dt_ns) {
    agents_ = step_world(tracks_, agents_, dt_ns);
    time_ns_ += dt_ns;
}

ChannelData ReferencePhysicsSim::channel_snapshot(const ChannelFidelity& fidelity) {
    return extract_channel_data(world_, agents_, fidelity);
}

SocketPhysicsSim::SocketPhysicsSim(std::unique_ptr<PeerLink> link) : link_(std::move(link)) {}

SocketPhysicsSim::~SocketPhysicsSim() {
    if (link_) link_->close();
}

void SocketPhysicsSim::request(uint64_t dt_ns) {
    link_->send(PhysicsUpdate{MsgType::kBegin, dt_ns, {}});
    Message reply = link_->receive();
    const auto* p = std::get_if<PhysicsUpdate>(&reply);
    if (p == nullptr || p->msg_type != MsgType::kEnd) {
        throw ProtocolError("external physics simulator must reply with PhysicsUpdate END");
    }
    if (p->time_val != time_ns_ + dt_ns) throw DesyncError(time_ns_ + dt_ns, p->time_val, "physics step reply");
    time_ns_ = p->time_val;
    snapshot_ = p->channel_data.empty() ? ChannelData{} : unpack_channel_data(p->channel_data);
}

void SocketPhysicsSim::step(uint64_t dt_ns) { request(dt_ns); }

ChannelData SocketPhysicsSim::channel_snapshot(const ChannelFidelity&) {
    if (!snapshot_) request(0);
    return *snapshot_;
}

uint64_t serve_physics(PeerLink& link, PhysicsSim& sim, const ChannelFidelity& fidelity) {
    uint64_t served = 0;
    for (;;) {
        Message msg;
        try {
            msg = link.receive();
        } catch (const TransportError& e) {
            if (e.kind() == TransportErrorKind::kClosed) break;
            throw;
        }
        const auto* p = std::get_if<PhysicsUpdate>(&msg);
        if (p == nullptr || p->msg_type != MsgType::kBegin) {
            throw ProtocolError("physics server expects PhysicsUpdate BEGIN step requests");
        }
        if (p->time_val > 0) sim.step(p->time_val);
        link.send(PhysicsUpdate{MsgType::kEnd, sim.sim_time(), pack_channel_data(sim.channel_snapshot(fidelity))});
        ++served;
    }
    link.close();
    return served;
}

}  // namespace cosim
