#include "cosim/phys_coord.hpp"

#include <utility>

#include "cosim/error.hpp"

namespace cosim {

std::vector<uint64_t> substep_schedule(uint64_t window_ns, uint32_t substeps) {
    if (substeps == 0) throw ConfigError("substeps_per_window", "must be at least 1");
    if (window_ns % substeps != 0) {
        throw ConfigError("substeps_per_window", "window of " + std::to_string(window_ns) +
                                                     " ns is not divisible into " + std::to_string(substeps) +
                                                     " equal substeps");
    }
    return std::vector<uint64_t>(substeps, window_ns / substeps);
}

PhysicsDriver::PhysicsDriver(PhysicsSim& sim, ChannelFidelity fidelity, std::vector<uint64_t> schedule)
    : sim_(sim), fidelity_(fidelity), schedule_(std::move(schedule)) {}

Message PhysicsDriver::simulate(uint64_t window_start, uint64_t window, const std::optional<Message>&) {
    uint64_t stepped = 0;
    for (uint64_t dt : schedule_) {
        sim_.step(dt);
        stepped += dt;
    }
    if (stepped != window) throw ConfigError("substeps_per_window", "substep schedule does not sum to the window");
    if (sim_.sim_time() != window_start + window) {
        throw DesyncError(window_start + window, sim_.sim_time(), "physics simulator clock");
    }
    ChannelData cd = sim_.channel_snapshot(fidelity_);
    ++extractions_;
    if (observer_) observer_(window_start + window, cd);
    return PhysicsUpdate{MsgType::kEnd, window_start, pack_channel_data(cd)};
}

std::unique_ptr<PhysicsSim> make_physics_backend(const PhysCoordConfig& config, WorldModel world,
                                                 std::vector<AgentTrack> tracks) {
    if (config.physics_backend.kind == PhysicsBackend::Kind::kSocket) {
        auto link = SocketLink::connect_tcp(config.physics_backend.host, config.physics_backend.port);
        link->set_receive_timeout(std::chrono::seconds(10));
        return std::make_unique<SocketPhysicsSim>(std::move(link));
    }
    return std::make_unique<ReferencePhysicsSim>(std::move(world), std::move(tracks));
}

PhysRunSummary run_physics_coordinator(const PhysCoordConfig& config, PeerLink& link, PhysicsSim& sim,
                                       PhysicsDriver::SnapshotObserver observer) {
    if (config.window_ns == 0) throw ConfigError("window_ns", "must be positive");
    if (config.duration_ns % config.window_ns != 0) {
        throw ConfigError("duration_ns", "duration " + std::to_string(config.duration_ns) +
                                             " is not a multiple of the window " + std::to_string(config.window_ns));
    }
    PhysicsDriver driver(sim, config.fidelity, substep_schedule(config.window_ns, config.substeps_per_window));
    if (observer) driver.set_observer(std::move(observer));

    SyncPeer peer(Role::kPhysicsSide, config.window_ns);
    const uint64_t windows = config.duration_ns / config.window_ns;
    peer.start(link);
    for (uint64_t k = 0; k < windows; ++k) peer.run_window(link, driver);
    peer.shutdown(link);

    PhysRunSummary summary;
    summary.windows = peer.stats().windows_completed;
    summary.agents = sim.channel_snapshot(config.fidelity).node_list.size();
    summary.physics_time_ns = sim.sim_time();
    summary.extractions = driver.extractions();
    summary.frames_sent = link.frames_sent();
    summary.sync = peer.stats();
    return summary;
}

}  // namespace cosim
