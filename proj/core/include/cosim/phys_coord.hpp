#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cosim/address_map.hpp"
#include "cosim/link.hpp"
#include "cosim/physics.hpp"
#include "cosim/sync.hpp"

namespace cosim {

struct PhysicsBackend {
    enum class Kind : uint8_t { kReference, kSocket };
    Kind kind = Kind::kReference;
    std::string host;  // kSocket only
    uint16_t port = 0;
};

struct PhysCoordConfig {
    uint64_t window_ns = kDefaultWindowNs;
    uint64_t duration_ns = 0;
    uint32_t substeps_per_window = 1;
    ChannelFidelity fidelity = ChannelFidelity::los_nlos();
    PhysicsBackend physics_backend;
    AgentAddressMap agent_address_map;
};

// Equal substeps summing exactly to `window_ns`. Throws ConfigError when
// `substeps` is zero or does not divide the window.
std::vector<uint64_t> substep_schedule(uint64_t window_ns, uint32_t substeps);

// Physics-side window driver: steps the simulator by exactly one window,
// samples the channel at the window end and returns it compressed as the END
// payload. That snapshot is what the network side applies to the next window.
class PhysicsDriver final : public SimDriver {
public:
    using SnapshotObserver = std::function<void(uint64_t window_end, const ChannelData&)>;

    PhysicsDriver(PhysicsSim& sim, ChannelFidelity fidelity, std::vector<uint64_t> schedule);

    Message simulate(uint64_t window_start, uint64_t window, const std::optional<Message>& peer_end) override;

    void set_observer(SnapshotObserver observer) { observer_ = std::move(observer); }
    uint64_t extractions() const { return extractions_; }

private:
    PhysicsSim& sim_;
    ChannelFidelity fidelity_;
    std::vector<uint64_t> schedule_;
    SnapshotObserver observer_;
    uint64_t extractions_ = 0;
};

struct PhysRunSummary {
    uint64_t windows = 0;
    uint64_t agents = 0;
    uint64_t physics_time_ns = 0;
    uint64_t extractions = 0;
    uint64_t frames_sent = 0;
    SyncStats sync;
};

// Builds the configured backend. kReference wraps `world`/`tracks`; kSocket
// connects to an external simulator speaking the serve_physics protocol.
std::unique_ptr<PhysicsSim> make_physics_backend(const PhysCoordConfig& config, WorldModel world,
                                                 std::vector<AgentTrack> tracks);

// Runs the PHYSICS_SIDE of the lockstep for duration_ns / window_ns windows,
// then shuts the link down.
PhysRunSummary run_physics_coordinator(const PhysCoordConfig& config, PeerLink& link, PhysicsSim& sim,
                                       PhysicsDriver::SnapshotObserver observer = {});

}  // namespace cosim
