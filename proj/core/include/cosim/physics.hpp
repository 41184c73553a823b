#pragma once

// Reference world simulator: static axis-aligned box obstacles, agents that
// follow piecewise-linear tracks at constant speed, and extraction of the
// ChannelData snapshot at disk or LOS/NLOS fidelity.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cosim/link.hpp"
#include "cosim/vec3.hpp"
#include "cosim/wire.hpp"

namespace cosim {

struct Box {
    Vec3 min;
    Vec3 max;
    double penetration_loss_db = 0.0;  // loss per crossing

    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
    }
};

struct WorldModel {
    std::vector<Box> obstacles;
    Box bounds;
};

struct AgentTrack {
    uint32_t agent_id = 0;
    std::vector<Vec3> waypoints;
    double speed = 1.0;  // m/s
    bool loop = false;
    // Orient the agent along its direction of travel (yaw about +z) instead of identity.
    bool yaw_aligned = false;

    // Polyline length; a loop includes the closing segment back to the first waypoint.
    double length() const;
    Vec3 point_at(double arc) const;
    // Direction of travel at `arc`, or nullopt for a stationary track.
    std::optional<Vec3> direction_at(double arc) const;
};

struct AgentState {
    uint32_t agent_id = 0;
    Pose pose;
    double arc_position = 0.0;  // m along the track
    uint64_t elapsed_ns = 0;    // time travelled since the start
};

class ChannelFidelity {
public:
    enum class Kind : uint8_t { kDisk, kLosNlos };

    static ChannelFidelity disk(double radius_m);
    static ChannelFidelity los_nlos() { return ChannelFidelity(Kind::kLosNlos, 0.0); }

    Kind kind() const { return kind_; }
    double radius() const { return radius_; }

private:
    ChannelFidelity(Kind kind, double radius) : kind_(kind), radius_(radius) {}

    Kind kind_;
    double radius_;
};

// Throw ConfigError on invariant violations.
void validate(const Box& box, const std::string& path);
void validate(const WorldModel& world);
void validate(const AgentTrack& track, const std::string& path);

AgentState initial_state(const AgentTrack& track);
AgentState advance_agent(const AgentTrack& track, const AgentState& state, uint64_t dt_ns);

// Advances every agent by dt_ns. tracks[i] drives agents[i].
std::vector<AgentState> step_world(std::span<const AgentTrack> tracks, std::span<const AgentState> agents,
                                   uint64_t dt_ns);

struct SegmentCrossing {
    Vec3 entry;
    Vec3 exit;
    double t_entry = 0.0;  // segment parameters in [0, 1]
    double t_exit = 0.0;
};

// Slab-method segment/AABB overlap. nullopt when the segment misses the box or
// only grazes it (zero-length contact, or sliding along a face).
std::optional<SegmentCrossing> segment_box_crossing(const Vec3& p0, const Vec3& p1, const Box& box);

// Requires agents to carry ids 0..n-1 (any order).
ChannelData extract_channel_data(const WorldModel& world, std::span<const AgentState> agents,
                                 const ChannelFidelity& fidelity);

// Contract every physics backend implements for the physics coordinator.
class PhysicsSim {
public:
    virtual ~PhysicsSim() = default;
    virtual void step(uint64_t dt_ns) = 0;
    virtual ChannelData channel_snapshot(const ChannelFidelity& fidelity) = 0;
    virtual uint64_t sim_time() const = 0;
};

class ReferencePhysicsSim final : public PhysicsSim {
public:
    ReferencePhysicsSim(WorldModel world, std::vector<AgentTrack> tracks);

    void step(uint64_t dt_ns) override;
    ChannelData channel_snapshot(const ChannelFidelity& fidelity) override;
    uint64_t sim_time() const override { return time_ns_; }

    const WorldModel& world() const { return world_; }
    std::span<const AgentState> agents() const { return agents_; }

private:
    WorldModel world_;
    std::vector<AgentTrack> tracks_;
    std::vector<AgentState> agents_;
    uint64_t time_ns_ = 0;
};

// External physics simulator reached over a PeerLink. Each request is a
// PhysicsUpdate BEGIN whose time_val is the step in ns (0 = query only);
// the reply is an END carrying the simulator time and the compressed
// snapshot. The remote side decides the snapshot fidelity.
class SocketPhysicsSim final : public PhysicsSim {
public:
    explicit SocketPhysicsSim(std::unique_ptr<PeerLink> link);
    ~SocketPhysicsSim() override;

    void step(uint64_t dt_ns) override;
    ChannelData channel_snapshot(const ChannelFidelity& fidelity) override;
    uint64_t sim_time() const override { return time_ns_; }

private:
    void request(uint64_t dt_ns);

    std::unique_ptr<PeerLink> link_;
    std::optional<ChannelData> snapshot_;
    uint64_t time_ns_ = 0;
};

// Serves SocketPhysicsSim requests from `sim` until the client closes.
// Returns the number of requests served.
uint64_t serve_physics(PeerLink& link, PhysicsSim& sim, const ChannelFidelity& fidelity);

}  // namespace cosim
