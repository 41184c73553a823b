#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "cosim/address_map.hpp"
#include "cosim/capture.hpp"
#include "cosim/link.hpp"
#include "cosim/netsim.hpp"
#include "cosim/sync.hpp"

namespace cosim {

using BerRng = std::mt19937_64;

// Flips each bit independently with probability `ber`. Output length equals
// input length; ber == 0 returns the payload unchanged, ber == 1 its complement.
Bytes apply_ber(ByteView payload, double ber, BerRng& rng);

struct CapturedPacket {
    uint64_t pkt_id = 0;
    Bytes payload;
    Ipv4 src;
    Ipv4 dst;
    uint64_t captured_at = 0;  // start of the window in which it was captured
    bool manifested = false;
};

struct NetCoordConfig {
    uint64_t window_ns = kDefaultWindowNs;
    uint64_t duration_ns = 0;
    uint64_t expiry_windows = 30'000;
    uint64_t seed = 0;
    AgentAddressMap agent_address_map;
};

struct LatencyRecord {
    uint64_t pkt_id = 0;
    uint64_t captured_at = 0;
    uint64_t released_in = 0;  // start of the release window
};

struct NetCounters {
    uint64_t captured = 0;
    uint64_t rejected = 0;  // unconfigured destination or empty payload
    uint64_t released = 0;
    uint64_t expired = 0;
    uint64_t late_clearances = 0;  // clearances for packets that had already expired
    uint64_t bytes_captured = 0;
    uint64_t bytes_released = 0;
    uint64_t bits_flipped = 0;
};

class NetworkCoordinator {
public:
    NetworkCoordinator(NetCoordConfig config, CaptureBackend& backend);

    // Drains the backend into the pending queue, stamping captured_at = window_start.
    size_t capture(uint64_t window_start);

    // BEGIN manifest for window t of every packet captured since the previous manifest.
    NetworkUpdate build_manifest(uint64_t t);

    // Applies BER to each cleared packet and delivers it. Throws ProtocolError
    // for an id that was never submitted.
    size_t release(const NetworkUpdate& clearances);

    // Discards held packets older than expiry_windows at window start t.
    size_t expire(uint64_t t);

    const NetCounters& counters() const { return counters_; }
    const std::vector<LatencyRecord>& latency() const { return latency_; }
    const std::map<uint64_t, CapturedPacket>& held() const { return held_; }
    const NetCoordConfig& config() const { return config_; }

private:
    NetCoordConfig config_;
    CaptureBackend& backend_;
    BerRng rng_;
    uint64_t next_id_ = 0;
    uint64_t next_manifest_id_ = 0;
    std::map<uint64_t, CapturedPacket> held_;
    std::set<uint64_t> expired_ids_;
    std::vector<LatencyRecord> latency_;
    NetCounters counters_;
};

// Called at the end of every window (time = window end) after releases and
// before capture; applications react to deliveries and send new traffic here.
using ApplicationHook = std::function<void(uint64_t now_ns, const ChannelData* channel)>;

// Network-side window driver: applies the channel sampled at the end of the
// previous window, submits the manifest, advances the simulator, releases
// clearances, runs the application hook and captures new traffic.
class NetworkDriver final : public SimDriver {
public:
    NetworkDriver(NetworkCoordinator& coordinator, NetSimInterface& netsim, ApplicationHook hook = {});

    Message simulate(uint64_t window_start, uint64_t window, const std::optional<Message>& peer_end) override;

    const std::optional<ChannelData>& channel() const { return channel_; }

private:
    NetworkCoordinator& coordinator_;
    NetSimInterface& netsim_;
    ApplicationHook hook_;
    std::optional<ChannelData> channel_;
};

struct NetRunSummary {
    uint64_t windows = 0;
    NetCounters counters;
    std::vector<LatencyRecord> latency;
    uint64_t frames_sent = 0;
    SyncStats sync;
};

// Runs the NETWORK_SIDE of the lockstep for duration_ns / window_ns windows.
NetRunSummary run_network_coordinator(const NetCoordConfig& config, PeerLink& link, NetSimInterface& netsim,
                                      CaptureBackend& backend, ApplicationHook hook = {});

}  // namespace cosim
