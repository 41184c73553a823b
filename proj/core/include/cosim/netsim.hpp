#pragma once

// Reference network simulator. Channel geometry becomes per-pair radio state
// (log-distance path loss plus wall penetration, SNR, MCS rate, BER); captured
// packets are served by one shared medium, one transmission at a time.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cosim/address_map.hpp"
#include "cosim/link.hpp"
#include "cosim/wire.hpp"

namespace cosim {

struct McsEntry {
    double snr_threshold_db = 0.0;
    double phy_rate_bps = 0.0;
};

// 802.11n-flavoured single-stream table.
std::vector<McsEntry> default_mcs_table();

struct RadioParams {
    double tx_power_dbm = 20.0;
    double noise_floor_dbm = -90.0;
    double pl0_db = 40.0;
    double ref_distance_m = 1.0;
    double path_loss_exponent = 2.4;
    uint64_t per_packet_overhead_ns = 200'000;
    std::vector<McsEntry> mcs_table = default_mcs_table();
    double ber_at_threshold = 1e-2;
    double ber_decade_per_db = 3.0;
    uint32_t queue_capacity = 100;
};

// Throws ConfigError (path prefix `path`) on invalid parameters.
void validate(const RadioParams& params, const std::string& path = "/radio");

struct LinkState {
    std::pair<uint32_t, uint32_t> pair{0, 0};
    double distance_m = 0.0;
    double wall_loss_db = 0.0;
    double path_loss_db = 0.0;
    double snr_db = 0.0;
    std::optional<double> phy_rate_bps;  // nullopt: LINK_DOWN
    double ber = 0.5;

    bool up() const { return phy_rate_bps.has_value(); }
};

// Radio state for one pair at `distance_m` behind `wall_loss_db` of walls.
// Distances below the reference distance use the reference loss.
LinkState compute_link_state(double distance_m, double wall_loss_db, const RadioParams& params);

// Link-layer service time: fixed overhead plus airtime, rounded up to the ns.
uint64_t service_time_ns(uint32_t length_bytes, double phy_rate_bps, const RadioParams& params);

struct MediumEvent {
    enum class Kind : uint8_t { kTxStart, kTxEnd };
    uint64_t time_ns = 0;
    Kind kind = Kind::kTxStart;
    uint64_t pkt_id = 0;
    Ipv4 src;
    Ipv4 dst;
};

struct TxRecord {
    uint64_t pkt_id = 0;
    uint64_t tx_start_ns = 0;
    uint64_t tx_end_ns = 0;
    double ber = 0.0;
};

// Contract for network simulator backends driven by the network coordinator.
class NetSimInterface {
public:
    virtual ~NetSimInterface() = default;
    virtual void apply_channel(const ChannelData& cd) = 0;
    // Runs [window_start, window_start + window) with the BEGIN manifest and
    // returns an END update whose clearance lists name the finished packets.
    virtual NetworkUpdate advance(uint64_t window_start, uint64_t window, const NetworkUpdate& manifest) = 0;
};

class ReferenceNetSim final : public NetSimInterface {
public:
    ReferenceNetSim(RadioParams params, AgentAddressMap addresses);

    void apply_channel(const ChannelData& cd) override;
    NetworkUpdate advance(uint64_t window_start, uint64_t window, const NetworkUpdate& manifest) override;

    // LINK_DOWN state for pairs without channel information.
    LinkState link(uint32_t a, uint32_t b) const;

    // Clearances of the most recent advance(), in clearance order.
    const std::vector<TxRecord>& last_window_trace() const { return last_trace_; }
    // Every TX_START/TX_END, when enabled.
    void enable_event_log(bool on) { log_events_ = on; }
    const std::vector<MediumEvent>& event_log() const { return events_; }

    const std::vector<uint64_t>& dropped() const { return dropped_; }
    size_t queued() const;
    bool in_flight() const { return current_.has_value(); }
    const RadioParams& params() const { return params_; }

private:
    struct Queued {
        uint64_t pkt_id;
        uint64_t enqueue_ns;
        uint32_t src_node;
        uint32_t dst_node;
        Ipv4 src;
        Ipv4 dst;
        uint32_t length;
    };
    struct Transmission {
        Queued pkt;
        uint64_t tx_start;
        uint64_t tx_end;
        double ber;
    };

    void check_manifest(uint64_t window_start, uint64_t window, const NetworkUpdate& manifest);
    void log(MediumEvent::Kind kind, uint64_t time, const Queued& pkt);

    RadioParams params_;
    AgentAddressMap addresses_;
    std::map<std::pair<uint32_t, uint32_t>, LinkState> links_;
    std::map<uint32_t, std::deque<Queued>> queues_;
    std::optional<Transmission> current_;
    uint64_t medium_free_ns_ = 0;
    std::set<uint64_t> submitted_;
    std::vector<uint64_t> dropped_;
    std::vector<TxRecord> last_trace_;
    bool log_events_ = false;
    std::vector<MediumEvent> events_;
};

// Network simulator reached over a PeerLink. A pending channel update travels
// as a PhysicsUpdate BEGIN(window_start) ahead of the NetworkUpdate BEGIN
// manifest; the reply is the NetworkUpdate END.
class SocketNetSim final : public NetSimInterface {
public:
    explicit SocketNetSim(std::unique_ptr<PeerLink> link);
    ~SocketNetSim() override;

    void apply_channel(const ChannelData& cd) override;
    NetworkUpdate advance(uint64_t window_start, uint64_t window, const NetworkUpdate& manifest) override;

private:
    std::unique_ptr<PeerLink> link_;
    std::optional<Bytes> pending_channel_;
};

// Serves SocketNetSim requests with `sim` and a fixed window until the client
// closes. Returns the number of windows served.
uint64_t serve_network_simulator(PeerLink& link, NetSimInterface& sim, uint64_t window_ns);

}  // namespace cosim
