#include "cosim/flow.hpp"

#include <zlib.h>

#include <algorithm>
#include <random>
#include <tuple>
#include <utility>

#include "cosim/error.hpp"

namespace cosim {

namespace {

constexpr uint8_t kTypeData = 1;
constexpr uint8_t kTypeAck = 2;

uint32_t crc32_of(ByteView bytes) {
    return static_cast<uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

void put_u32(Bytes& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(ByteView in, size_t at) {
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | in[at + i];
    return v;
}

uint64_t get_u64(ByteView in, size_t at) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | in[at + i];
    return v;
}

}  // namespace

Bytes flow_payload(uint32_t flow, uint64_t seq, uint32_t size) {
    std::mt19937_64 gen((uint64_t{flow} << 48) ^ seq);
    Bytes out(size);
    for (size_t i = 0; i < size; i += 8) {
        const uint64_t word = gen();
        for (size_t b = 0; b < 8 && i + b < size; ++b) out[i + b] = static_cast<uint8_t>(word >> (8 * b));
    }
    return out;
}

Bytes encode_data_packet(uint32_t flow, uint64_t seq, ByteView payload) {
    Bytes out;
    out.reserve(kDataHeaderSize + payload.size());
    out.push_back(kTypeData);
    put_u32(out, flow);
    put_u64(out, seq);
    // The CRC sits between header and payload but covers both.
    uLong crc = ::crc32(0L, out.data(), static_cast<uInt>(out.size()));
    crc = ::crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
    put_u32(out, static_cast<uint32_t>(crc));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Bytes encode_ack_packet(uint32_t flow, uint64_t cumulative, uint64_t trigger) {
    Bytes out;
    out.reserve(kAckSize);
    out.push_back(kTypeAck);
    put_u32(out, flow);
    put_u64(out, cumulative);
    put_u64(out, trigger);
    put_u32(out, crc32_of(out));
    return out;
}

std::optional<FlowPacket> decode_flow_packet(ByteView packet) {
    if (packet.empty()) return std::nullopt;
    FlowPacket p;
    if (packet[0] == kTypeData) {
        if (packet.size() < kDataHeaderSize) return std::nullopt;
        ByteView payload = packet.subspan(kDataHeaderSize);
        uLong crc = ::crc32(0L, packet.data(), 13);
        crc = ::crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
        if (static_cast<uint32_t>(crc) != get_u32(packet, 13)) return std::nullopt;
        p.kind = FlowPacket::Kind::kData;
        p.flow = get_u32(packet, 1);
        p.seq = get_u64(packet, 5);
        p.payload = payload;
        return p;
    }
    if (packet[0] == kTypeAck) {
        if (packet.size() != kAckSize) return std::nullopt;
        if (crc32_of(packet.first(21)) != get_u32(packet, 21)) return std::nullopt;
        p.kind = FlowPacket::Kind::kAck;
        p.flow = get_u32(packet, 1);
        p.seq = get_u64(packet, 5);
        p.trigger = get_u64(packet, 13);
        return p;
    }
    return std::nullopt;
}

FlowSet::FlowSet(std::vector<FlowSpec> specs, InProcessBackend& backend)
    : specs_(std::move(specs)),
      states_(specs_.size()),
      highest_acked_tx_(specs_.size(), 0),
      next_tx_index_(specs_.size(), 1),
      backend_(backend) {
    std::set<Ipv4> addrs;
    for (size_t i = 0; i < specs_.size(); ++i) {
        const FlowSpec& s = specs_[i];
        const std::string path = "/flows/" + std::to_string(i);
        if (s.payload_size == 0) throw ConfigError(path + "/payload_size", "must be positive");
        if (s.arq_window == 0) throw ConfigError(path + "/arq_window", "must be positive");
        if (s.retransmit_timeout_ns == 0) throw ConfigError(path + "/retransmit_timeout_ns", "must be positive");
        backend_.endpoint(s.src);
        backend_.endpoint(s.dst);
        addrs.insert(s.src);
        addrs.insert(s.dst);
    }
    endpoints_.assign(addrs.begin(), addrs.end());
}

void FlowSet::tick(uint64_t now_ns) {
    for (Ipv4 addr : endpoints_) {
        for (const RawPacket& raw : backend_.endpoint(addr).receive_all()) {
            auto pkt = decode_flow_packet(raw.payload);
            if (!pkt || pkt->flow >= specs_.size()) {
                ++corrupted_;
                continue;
            }
            if (pkt->kind == FlowPacket::Kind::kData) {
                on_data(pkt->flow, pkt->seq, pkt->payload, now_ns);
            } else {
                on_ack(pkt->flow, pkt->seq, pkt->trigger);
            }
        }
    }
    for (uint32_t f = 0; f < specs_.size(); ++f) pump_sender(f, now_ns);
}

void FlowSet::on_data(uint32_t flow, uint64_t seq, ByteView payload, uint64_t now_ns) {
    const FlowSpec& spec = specs_[flow];
    FlowState& st = states_[flow];
    ++st.counters.data_received;

    if (seq >= st.next_seq) {
        // Never sent by us: only a CRC collision gets here.
        ++st.counters.payload_mismatches;
        return;
    }
    const Bytes expected = flow_payload(flow, seq, spec.payload_size);
    if (!std::equal(payload.begin(), payload.end(), expected.begin(), expected.end())) {
        ++st.counters.payload_mismatches;
        return;
    }

    if (seq < st.next_expected || st.reorder.count(seq) != 0) {
        ++st.counters.duplicates;
    } else {
        st.reorder.insert(seq);
        while (!st.reorder.empty() && *st.reorder.begin() == st.next_expected) {
            st.delivered.push_back(
                {flow, st.next_expected, st.first_send_ns[st.next_expected], now_ns, spec.payload_size});
            st.counters.bytes_delivered += spec.payload_size;
            st.reorder.erase(st.reorder.begin());
            ++st.next_expected;
        }
    }
    backend_.endpoint(spec.dst).send(spec.src, encode_ack_packet(flow, st.next_expected, seq));
    ++st.counters.acks_sent;
}

void FlowSet::on_ack(uint32_t flow, uint64_t cumulative, uint64_t trigger) {
    FlowState& st = states_[flow];
    ++st.counters.acks_received;
    if (auto it = st.unacked.find(trigger); it != st.unacked.end()) {
        highest_acked_tx_[flow] = std::max(highest_acked_tx_[flow], it->second.tx_index);
        st.unacked.erase(it);
    }
    st.unacked.erase(st.unacked.begin(), st.unacked.lower_bound(cumulative));
}

void FlowSet::transmit(uint32_t flow, uint64_t seq, FlowState::Outstanding& out, uint64_t now_ns) {
    const FlowSpec& spec = specs_[flow];
    FlowState& st = states_[flow];
    if (out.sends > 0) ++st.counters.retransmissions;
    out.last_send_ns = now_ns;
    out.tx_index = next_tx_index_[flow]++;
    ++out.sends;
    ++st.counters.data_sent;
    st.counters.bytes_sent += spec.payload_size;
    backend_.endpoint(spec.src).send(spec.dst, encode_data_packet(flow, seq, flow_payload(flow, seq, spec.payload_size)));
}

void FlowSet::pump_sender(uint32_t flow, uint64_t now_ns) {
    const FlowSpec& spec = specs_[flow];
    FlowState& st = states_[flow];
    for (auto& [seq, out] : st.unacked) {
        if (out.tx_index + kReorderThreshold <= highest_acked_tx_[flow]) {
            ++st.counters.fast_retransmissions;
            transmit(flow, seq, out, now_ns);
        } else if (now_ns - out.last_send_ns >= spec.retransmit_timeout_ns) {
            ++st.counters.timeouts;
            transmit(flow, seq, out, now_ns);
        }
    }
    while (st.unacked.size() < spec.arq_window) {
        const uint64_t seq = st.next_seq++;
        FlowState::Outstanding& out = st.unacked[seq];
        out.first_send_ns = now_ns;
        st.first_send_ns.push_back(now_ns);
        transmit(flow, seq, out, now_ns);
    }
}

std::vector<DeliveryRecord> FlowSet::ledger() const {
    std::vector<DeliveryRecord> all;
    for (const FlowState& st : states_) all.insert(all.end(), st.delivered.begin(), st.delivered.end());
    std::sort(all.begin(), all.end(), [](const DeliveryRecord& a, const DeliveryRecord& b) {
        return std::tie(a.delivered_ns, a.flow, a.seq) < std::tie(b.delivered_ns, b.flow, b.seq);
    });
    return all;
}

}  // namespace cosim
