#pragma once

// Protocol messages exchanged between the coordinators and the external
// simulators, their binary encoding and the stream framing.
//
// Frame layout (all integers little-endian):
//
//   "RNS1" | tag:u8 | payload_len:u32 | payload
//
// tag 0x00 carries a PhysicsUpdate, 0x01 a NetworkUpdate. Payload fields are
// written in declaration order; lists are prefixed by a u32 count, byte
// strings by a u32 length, IPv4 addresses are 4 bytes in network order and
// floats are IEEE-754 doubles.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cosim/vec3.hpp"

namespace cosim {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

// IPv4 address held in host byte order.
class Ipv4 {
public:
    constexpr Ipv4() = default;
    constexpr explicit Ipv4(uint32_t host_order) : value_(host_order) {}
    constexpr Ipv4(uint8_t a, uint8_t b, uint8_t c, uint8_t d)
        : value_((uint32_t{a} << 24) | (uint32_t{b} << 16) | (uint32_t{c} << 8) | uint32_t{d}) {}

    // Parses dotted-quad notation; nullopt on anything else.
    static std::optional<Ipv4> parse(std::string_view text);

    constexpr uint32_t value() const { return value_; }
    std::string to_string() const;

    friend constexpr auto operator<=>(const Ipv4&, const Ipv4&) = default;

private:
    uint32_t value_ = 0;
};

struct Pose {
    Vec3 position;
    Quat orientation;

    friend bool operator==(const Pose&, const Pose&) = default;
};

// One environmental interaction along a path: a point and its transition loss in dB.
struct HopPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double loss_db = 0.0;

    friend bool operator==(const HopPoint&, const HopPoint&) = default;
};

// Signal paths between two agents. `num_hops[k]` hop points belong to path k,
// stored back to back in `hop_points`.
struct PathDetails {
    std::array<uint32_t, 2> ids{0, 0};
    bool los = false;
    std::vector<uint32_t> num_hops;
    std::vector<HopPoint> hop_points;

    friend bool operator==(const PathDetails&, const PathDetails&) = default;
};

// Geometric channel snapshot. node_list is indexed by agent id.
struct ChannelData {
    std::vector<Pose> node_list;
    std::vector<PathDetails> path_details;

    friend bool operator==(const ChannelData&, const ChannelData&) = default;
};

enum class MsgType : uint8_t { kBegin = 0x00, kEnd = 0x01 };

const char* to_string(MsgType type);

struct PhysicsUpdate {
    MsgType msg_type = MsgType::kBegin;
    uint64_t time_val = 0;  // ns
    Bytes channel_data;     // compressed ChannelData, possibly empty

    friend bool operator==(const PhysicsUpdate&, const PhysicsUpdate&) = default;
};

struct NetworkUpdate {
    MsgType msg_type = MsgType::kBegin;
    uint64_t time_val = 0;  // ns

    // Capture manifest.
    std::vector<uint64_t> pkt_id;
    std::vector<uint32_t> pkt_lengths;
    std::vector<Ipv4> src_ip;
    std::vector<Ipv4> dst_ip;

    // Clearance manifest.
    std::vector<uint64_t> clear_pkt_id;
    std::vector<Ipv4> clear_src_ip;
    std::vector<Ipv4> clear_dst_ip;
    std::vector<double> ber;

    friend bool operator==(const NetworkUpdate&, const NetworkUpdate&) = default;
};

using Message = std::variant<PhysicsUpdate, NetworkUpdate>;

MsgType msg_type_of(const Message& msg);
uint64_t time_val_of(const Message& msg);

inline constexpr std::array<uint8_t, 4> kFrameMagic{'R', 'N', 'S', '1'};
inline constexpr uint8_t kPhysicsUpdateTag = 0x00;
inline constexpr uint8_t kNetworkUpdateTag = 0x01;
inline constexpr size_t kFrameHeaderSize = 9;
inline constexpr uint32_t kMaxFramePayload = 16u << 20;
inline constexpr size_t kMaxDecompressedSize = size_t{64} << 20;

// Invariant checks; throw WireError(kInvariantViolation) naming the invariant.
void validate(const ChannelData& cd);
void validate(const PhysicsUpdate& msg);
void validate(const NetworkUpdate& msg);

Bytes encode_frame(const Message& msg);
void append_frame(const Message& msg, Bytes& out);

struct FrameDecode {
    // nullopt means the input holds only a prefix of a frame.
    std::optional<Message> message;
    // Bytes following the decoded frame (the whole input when incomplete).
    ByteView remaining;
};

// Streaming-safe frame decoder. Throws WireError on malformed input.
FrameDecode decode_frame(ByteView bytes);

Bytes encode_channel_data(const ChannelData& cd);
ChannelData decode_channel_data(ByteView bytes);

// Raw DEFLATE (RFC 1951).
Bytes compress_channel_data(ByteView raw);
Bytes decompress_channel_data(ByteView compressed, size_t max_output = kMaxDecompressedSize);

// Convenience: encode + compress / decompress + decode.
Bytes pack_channel_data(const ChannelData& cd);
ChannelData unpack_channel_data(ByteView compressed);

}  // namespace cosim
