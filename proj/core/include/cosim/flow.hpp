#pragma once

// Reliable application flows over the in-process capture backend: a greedy
// sliding-window ARQ with CRC-32 protected data packets and cumulative ACKs
// that also name the sequence number that triggered them.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "cosim/capture.hpp"
#include "cosim/wire.hpp"

namespace cosim {

struct FlowSpec {
    Ipv4 src;
    Ipv4 dst;
    uint32_t payload_size = 1000;
    uint32_t arq_window = 16;
    uint64_t retransmit_timeout_ns = 200'000'000;
};

struct DeliveryRecord {
    uint32_t flow = 0;
    uint64_t seq = 0;
    uint64_t first_send_ns = 0;
    uint64_t delivered_ns = 0;
    uint32_t bytes = 0;

    uint64_t delay_ns() const { return delivered_ns - first_send_ns; }
};

struct FlowCounters {
    uint64_t data_sent = 0;  // transmissions, including retransmissions
    uint64_t retransmissions = 0;
    uint64_t timeouts = 0;
    uint64_t fast_retransmissions = 0;
    uint64_t bytes_sent = 0;  // payload bytes over all transmissions
    uint64_t bytes_delivered = 0;
    uint64_t data_received = 0;  // CRC-valid data packets, duplicates included
    uint64_t duplicates = 0;
    uint64_t acks_sent = 0;
    uint64_t acks_received = 0;
    uint64_t payload_mismatches = 0;  // CRC-valid packets whose payload differs from what was sent
};

struct FlowState {
    struct Outstanding {
        uint64_t first_send_ns = 0;
        uint64_t last_send_ns = 0;
        uint64_t tx_index = 0;  // position of the latest transmission in send order
        uint32_t sends = 0;
    };

    uint64_t next_seq = 0;
    std::vector<uint64_t> first_send_ns;  // indexed by seq
    std::map<uint64_t, Outstanding> unacked;
    std::vector<DeliveryRecord> delivered;  // in delivery order, seqs strictly increasing
    FlowCounters counters;

    // Receiver side.
    uint64_t next_expected = 0;
    std::set<uint64_t> reorder;  // received beyond next_expected
};

// Wire layout of flow packets. Every field is little-endian and the CRC-32
// covers everything before it.
//   data: u8 type=1, u32 flow, u64 seq, u32 crc, payload
//   ack:  u8 type=2, u32 flow, u64 cumulative, u64 trigger, u32 crc
inline constexpr size_t kDataHeaderSize = 17;
inline constexpr size_t kAckSize = 25;

// Deterministic payload of `seq`, so receivers can check delivered bytes.
Bytes flow_payload(uint32_t flow, uint64_t seq, uint32_t size);

Bytes encode_data_packet(uint32_t flow, uint64_t seq, ByteView payload);
Bytes encode_ack_packet(uint32_t flow, uint64_t cumulative, uint64_t trigger);

struct FlowPacket {
    enum class Kind : uint8_t { kData, kAck };
    Kind kind = Kind::kData;
    uint32_t flow = 0;
    uint64_t seq = 0;  // data seq, or the cumulative ack
    uint64_t trigger = 0;
    ByteView payload;
};

// nullopt when the packet is truncated, of unknown type or fails its CRC.
std::optional<FlowPacket> decode_flow_packet(ByteView packet);

// All flows of a scenario. tick() is the application step: it is called once
// per window, after the coordinator has released that window's packets.
class FlowSet {
public:
    // A later transmission acknowledged this many sends ahead marks an
    // outstanding packet as lost.
    static constexpr uint64_t kReorderThreshold = 3;

    FlowSet(std::vector<FlowSpec> specs, InProcessBackend& backend);

    void tick(uint64_t now_ns);

    const std::vector<FlowSpec>& specs() const { return specs_; }
    const std::vector<FlowState>& states() const { return states_; }
    // Packets dropped for a failed CRC, truncation or an unknown flow.
    uint64_t corrupted() const { return corrupted_; }

    // Every delivery of every flow, ordered by (delivered_ns, flow, seq).
    std::vector<DeliveryRecord> ledger() const;

private:
    void on_data(uint32_t flow, uint64_t seq, ByteView payload, uint64_t now_ns);
    void on_ack(uint32_t flow, uint64_t cumulative, uint64_t trigger);
    void transmit(uint32_t flow, uint64_t seq, FlowState::Outstanding& out, uint64_t now_ns);
    void pump_sender(uint32_t flow, uint64_t now_ns);

    std::vector<FlowSpec> specs_;
    std::vector<FlowState> states_;
    std::vector<uint64_t> highest_acked_tx_;
    std::vector<uint64_t> next_tx_index_;
    InProcessBackend& backend_;
    std::vector<Ipv4> endpoints_;  // distinct addresses used by the flows, sorted
    uint64_t corrupted_ = 0;
};

}  // namespace cosim
