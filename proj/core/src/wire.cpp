#include "cosim/wire.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <set>
#include <utility>

#include "cosim/error.hpp"

namespace cosim {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
public:
    explicit Writer(Bytes& out) : out_(out) {}

    void u8(uint8_t v) { out_.push_back(v); }

    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }

    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }

    void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

    void count(size_t n, const char* field) {
        if (n > UINT32_MAX) throw WireError(WireErrorKind::kInvariantViolation, field, "list too long");
        u32(static_cast<uint32_t>(n));
    }

    void ipv4(Ipv4 addr) {
        const uint32_t v = addr.value();
        out_.push_back(static_cast<uint8_t>(v >> 24));
        out_.push_back(static_cast<uint8_t>(v >> 16));
        out_.push_back(static_cast<uint8_t>(v >> 8));
        out_.push_back(static_cast<uint8_t>(v));
    }

    void bytes(ByteView b, const char* field) {
        count(b.size(), field);
        out_.insert(out_.end(), b.begin(), b.end());
    }

    void patch_u32(size_t at, uint32_t v) {
        for (int i = 0; i < 4; ++i) out_[at + i] = static_cast<uint8_t>(v >> (8 * i));
    }

    size_t size() const { return out_.size(); }

private:
    Bytes& out_;
};

class Reader {
public:
    explicit Reader(ByteView in) : in_(in) {}

    uint8_t u8(const char* field) {
        need(1, field);
        return in_[pos_++];
    }

    uint32_t u32(const char* field) {
        need(4, field);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t{in_[pos_ + i]} << (8 * i);
        pos_ += 4;
        return v;
    }

    uint64_t u64(const char* field) {
        need(8, field);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t{in_[pos_ + i]} << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64(const char* field) { return std::bit_cast<double>(u64(field)); }

    Ipv4 ipv4(const char* field) {
        need(4, field);
        const uint32_t v = (uint32_t{in_[pos_]} << 24) | (uint32_t{in_[pos_ + 1]} << 16) |
                           (uint32_t{in_[pos_ + 2]} << 8) | uint32_t{in_[pos_ + 3]};
        pos_ += 4;
        return Ipv4(v);
    }

    // Reads a list count and checks that `elem_size * count` bytes can follow.
    uint32_t count(const char* field, size_t elem_size) {
        const uint32_t n = u32(field);
        if (elem_size != 0 && n > (in_.size() - pos_) / elem_size) {
            throw WireError(WireErrorKind::kMalformedPayload, field,
                            "declared count " + std::to_string(n) + " exceeds the remaining payload");
        }
        return n;
    }

    Bytes bytes(const char* field) {
        const uint32_t n = count(field, 1);
        Bytes out(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }

    MsgType msg_type(const char* field) {
        const uint8_t v = u8(field);
        if (v > 0x01) {
            throw WireError(WireErrorKind::kMalformedPayload, field, "unknown msg_type " + std::to_string(v));
        }
        return static_cast<MsgType>(v);
    }

    void expect_end(const char* what) const {
        if (pos_ != in_.size()) {
            throw WireError(WireErrorKind::kMalformedPayload, what,
                            std::to_string(in_.size() - pos_) + " unexpected trailing bytes");
        }
    }

private:
    void need(size_t n, const char* field) const {
        if (in_.size() - pos_ < n) {
            throw WireError(WireErrorKind::kMalformedPayload, field, "payload ends inside field");
        }
    }

    ByteView in_;
    size_t pos_ = 0;
};

[[noreturn]] void invariant(const std::string& field, const std::string& detail) {
    throw WireError(WireErrorKind::kInvariantViolation, field, detail);
}

template <typename T>
std::vector<T> read_list(Reader& r, const char* field, size_t elem_size, T (Reader::*read)(const char*)) {
    const uint32_t n = r.count(field, elem_size);
    std::vector<T> out;
    out.reserve(n);
    for (uint32_t i = 0; i < n; ++i) out.push_back((r.*read)(field));
    return out;
}

void write_physics(Writer& w, const PhysicsUpdate& msg) {
    w.u8(static_cast<uint8_t>(msg.msg_type));
    w.u64(msg.time_val);
    w.bytes(msg.channel_data, "channel_data");
}

void write_network(Writer& w, const NetworkUpdate& msg) {
    w.u8(static_cast<uint8_t>(msg.msg_type));
    w.u64(msg.time_val);
    w.count(msg.pkt_id.size(), "pkt_id");
    for (uint64_t v : msg.pkt_id) w.u64(v);
    w.count(msg.pkt_lengths.size(), "pkt_lengths");
    for (uint32_t v : msg.pkt_lengths) w.u32(v);
    w.count(msg.src_ip.size(), "src_ip");
    for (Ipv4 v : msg.src_ip) w.ipv4(v);
    w.count(msg.dst_ip.size(), "dst_ip");
    for (Ipv4 v : msg.dst_ip) w.ipv4(v);
    w.count(msg.clear_pkt_id.size(), "clear_pkt_id");
    for (uint64_t v : msg.clear_pkt_id) w.u64(v);
    w.count(msg.clear_src_ip.size(), "clear_src_ip");
    for (Ipv4 v : msg.clear_src_ip) w.ipv4(v);
    w.count(msg.clear_dst_ip.size(), "clear_dst_ip");
    for (Ipv4 v : msg.clear_dst_ip) w.ipv4(v);
    w.count(msg.ber.size(), "ber");
    for (double v : msg.ber) w.f64(v);
}

PhysicsUpdate read_physics(Reader& r) {
    PhysicsUpdate msg;
    msg.msg_type = r.msg_type("msg_type");
    msg.time_val = r.u64("time_val");
    msg.channel_data = r.bytes("channel_data");
    r.expect_end("PhysicsUpdate");
    return msg;
}

NetworkUpdate read_network(Reader& r) {
    NetworkUpdate msg;
    msg.msg_type = r.msg_type("msg_type");
    msg.time_val = r.u64("time_val");
    msg.pkt_id = read_list(r, "pkt_id", 8, &Reader::u64);
    msg.pkt_lengths = read_list(r, "pkt_lengths", 4, &Reader::u32);
    msg.src_ip = read_list(r, "src_ip", 4, &Reader::ipv4);
    msg.dst_ip = read_list(r, "dst_ip", 4, &Reader::ipv4);
    msg.clear_pkt_id = read_list(r, "clear_pkt_id", 8, &Reader::u64);
    msg.clear_src_ip = read_list(r, "clear_src_ip", 4, &Reader::ipv4);
    msg.clear_dst_ip = read_list(r, "clear_dst_ip", 4, &Reader::ipv4);
    msg.ber = read_list(r, "ber", 8, &Reader::f64);
    r.expect_end("NetworkUpdate");
    return msg;
}

}  // namespace

const char* to_string(WireErrorKind kind) {
    switch (kind) {
        case WireErrorKind::kBadMagic: return "bad-magic";
        case WireErrorKind::kUnknownTag: return "unknown-tag";
        case WireErrorKind::kOversizeFrame: return "oversize-frame";
        case WireErrorKind::kMalformedPayload: return "malformed-payload";
        case WireErrorKind::kInvariantViolation: return "invariant-violation";
        case WireErrorKind::kCompression: return "compression";
    }
    return "unknown";
}

WireError::WireError(WireErrorKind kind, std::string field, const std::string& detail)
    : Error(std::string("malformed frame [") + to_string(kind) + "] " + field + ": " + detail),
      kind_(kind),
      field_(std::move(field)) {}

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
    uint32_t value = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
        if (p == end || *p < '0' || *p > '9') return std::nullopt;
        unsigned v = 0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc() || v > 255 || next - p > 3) return std::nullopt;
        value = (value << 8) | v;
        p = next;
    }
    if (p != end) return std::nullopt;
    return Ipv4(value);
}

std::string Ipv4::to_string() const {
    return std::to_string(value_ >> 24) + "." + std::to_string((value_ >> 16) & 0xFF) + "." +
           std::to_string((value_ >> 8) & 0xFF) + "." + std::to_string(value_ & 0xFF);
}

const char* to_string(MsgType type) { return type == MsgType::kBegin ? "BEGIN" : "END"; }

MsgType msg_type_of(const Message& msg) {
    return std::visit([](const auto& m) { return m.msg_type; }, msg);
}

uint64_t time_val_of(const Message& msg) {
    return std::visit([](const auto& m) { return m.time_val; }, msg);
}

void validate(const ChannelData& cd) {
    for (size_t i = 0; i < cd.node_list.size(); ++i) {
        const Pose& p = cd.node_list[i];
        const std::string where = "node_list[" + std::to_string(i) + "]";
        const Quat& q = p.orientation;
        if (!is_finite(p.position) || !std::isfinite(q.x) || !std::isfinite(q.y) || !std::isfinite(q.z) ||
            !std::isfinite(q.w)) {
            invariant(where, "pose components must be finite");
        }
        if (std::abs(q.norm() - 1.0) > 1e-6) invariant(where, "orientation quaternion is not unit norm");
    }
    const size_t n = cd.node_list.size();
    std::set<std::pair<uint32_t, uint32_t>> pairs;
    for (size_t k = 0; k < cd.path_details.size(); ++k) {
        const PathDetails& pd = cd.path_details[k];
        const std::string where = "path_details[" + std::to_string(k) + "]";
        if (pd.ids[0] == pd.ids[1]) invariant(where + ".ids", "ids[0] == ids[1]");
        if (pd.ids[0] >= n || pd.ids[1] >= n) invariant(where + ".ids", "id outside node_list");
        const auto key = std::minmax(pd.ids[0], pd.ids[1]);
        if (!pairs.insert(key).second) invariant(where + ".ids", "more than one entry for an agent pair");
        uint64_t hops = 0;
        for (uint32_t h : pd.num_hops) hops += h;
        if (hops != pd.hop_points.size()) invariant(where + ".num_hops", "sum(num_hops) != count(hop_points)");
        for (const HopPoint& hp : pd.hop_points) {
            if (!std::isfinite(hp.x) || !std::isfinite(hp.y) || !std::isfinite(hp.z) || !std::isfinite(hp.loss_db)) {
                invariant(where + ".hop_points", "hop point components must be finite");
            }
            if (hp.loss_db < 0.0) invariant(where + ".hop_points", "negative loss");
        }
    }
}

void validate(const PhysicsUpdate& msg) {
    if (msg.msg_type != MsgType::kBegin && msg.msg_type != MsgType::kEnd) invariant("msg_type", "unknown value");
    if (msg.channel_data.empty()) return;
    ChannelData cd;
    try {
        cd = unpack_channel_data(msg.channel_data);
    } catch (const WireError& e) {
        invariant("channel_data", std::string("does not decode to ChannelData: ") + e.what());
    }
}

void validate(const NetworkUpdate& msg) {
    if (msg.msg_type != MsgType::kBegin && msg.msg_type != MsgType::kEnd) invariant("msg_type", "unknown value");
    const size_t n = msg.pkt_id.size();
    if (msg.pkt_lengths.size() != n || msg.src_ip.size() != n || msg.dst_ip.size() != n) {
        invariant("pkt_id", "capture manifest lists have unequal lengths");
    }
    const size_t c = msg.clear_pkt_id.size();
    if (msg.clear_src_ip.size() != c || msg.clear_dst_ip.size() != c || msg.ber.size() != c) {
        invariant("clear_pkt_id", "clearance manifest lists have unequal lengths");
    }
    for (double b : msg.ber) {
        if (!(b >= 0.0 && b <= 1.0)) invariant("ber", "value outside [0, 1]");
    }
    std::vector<uint64_t> ids = msg.pkt_id;
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) invariant("pkt_id", "duplicate id");
}

void append_frame(const Message& msg, Bytes& out) {
    std::visit([](const auto& m) { validate(m); }, msg);
    Writer w(out);
    for (uint8_t b : kFrameMagic) w.u8(b);
    w.u8(std::holds_alternative<PhysicsUpdate>(msg) ? kPhysicsUpdateTag : kNetworkUpdateTag);
    const size_t len_at = w.size();
    w.u32(0);
    const size_t start = w.size();
    if (const auto* p = std::get_if<PhysicsUpdate>(&msg)) {
        write_physics(w, *p);
    } else {
        write_network(w, std::get<NetworkUpdate>(msg));
    }
    const size_t payload = w.size() - start;
    if (payload > kMaxFramePayload) {
        out.resize(len_at - 5);
        throw WireError(WireErrorKind::kOversizeFrame, "payload_length", "payload exceeds 16 MiB");
    }
    w.patch_u32(len_at, static_cast<uint32_t>(payload));
}

Bytes encode_frame(const Message& msg) {
    Bytes out;
    append_frame(msg, out);
    return out;
}

FrameDecode decode_frame(ByteView bytes) {
    const size_t magic_avail = std::min(bytes.size(), kFrameMagic.size());
    if (!std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(magic_avail), kFrameMagic.begin())) {
        throw WireError(WireErrorKind::kBadMagic, "magic", "frame does not start with RNS1");
    }
    if (bytes.size() < 5) return {std::nullopt, bytes};
    const uint8_t tag = bytes[4];
    if (tag != kPhysicsUpdateTag && tag != kNetworkUpdateTag) {
        throw WireError(WireErrorKind::kUnknownTag, "tag", "unknown message tag " + std::to_string(tag));
    }
    if (bytes.size() < kFrameHeaderSize) return {std::nullopt, bytes};
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= uint32_t{bytes[5 + i]} << (8 * i);
    if (len > kMaxFramePayload) {
        throw WireError(WireErrorKind::kOversizeFrame, "payload_length",
                        "declared length " + std::to_string(len) + " exceeds the 16 MiB cap");
    }
    if (bytes.size() - kFrameHeaderSize < len) return {std::nullopt, bytes};

    Reader r(bytes.subspan(kFrameHeaderSize, len));
    FrameDecode out;
    if (tag == kPhysicsUpdateTag) {
        PhysicsUpdate msg = read_physics(r);
        validate(msg);
        out.message = std::move(msg);
    } else {
        NetworkUpdate msg = read_network(r);
        validate(msg);
        out.message = std::move(msg);
    }
    out.remaining = bytes.subspan(kFrameHeaderSize + len);
    return out;
}

Bytes encode_channel_data(const ChannelData& cd) {
    validate(cd);
    Bytes out;
    out.reserve(8 + cd.node_list.size() * 56 + cd.path_details.size() * 32);
    Writer w(out);
    w.count(cd.node_list.size(), "node_list");
    for (const Pose& p : cd.node_list) {
        w.f64(p.position.x);
        w.f64(p.position.y);
        w.f64(p.position.z);
        w.f64(p.orientation.x);
        w.f64(p.orientation.y);
        w.f64(p.orientation.z);
        w.f64(p.orientation.w);
    }
    w.count(cd.path_details.size(), "path_details");
    for (const PathDetails& pd : cd.path_details) {
        w.u32(pd.ids[0]);
        w.u32(pd.ids[1]);
        w.u8(pd.los ? 1 : 0);
        w.count(pd.num_hops.size(), "num_hops");
        for (uint32_t h : pd.num_hops) w.u32(h);
        for (const HopPoint& hp : pd.hop_points) {
            w.f64(hp.x);
            w.f64(hp.y);
            w.f64(hp.z);
            w.f64(hp.loss_db);
        }
    }
    return out;
}

ChannelData decode_channel_data(ByteView bytes) {
    Reader r(bytes);
    ChannelData cd;
    const uint32_t agents = r.count("node_list", 56);
    cd.node_list.reserve(agents);
    for (uint32_t i = 0; i < agents; ++i) {
        Pose p;
        p.position.x = r.f64("node_list");
        p.position.y = r.f64("node_list");
        p.position.z = r.f64("node_list");
        p.orientation.x = r.f64("node_list");
        p.orientation.y = r.f64("node_list");
        p.orientation.z = r.f64("node_list");
        p.orientation.w = r.f64("node_list");
        cd.node_list.push_back(p);
    }
    const uint32_t paths = r.count("path_details", 13);
    cd.path_details.reserve(paths);
    for (uint32_t k = 0; k < paths; ++k) {
        PathDetails pd;
        pd.ids[0] = r.u32("path_details.ids");
        pd.ids[1] = r.u32("path_details.ids");
        const uint8_t los = r.u8("path_details.los");
        if (los > 1) throw WireError(WireErrorKind::kMalformedPayload, "path_details.los", "not a boolean");
        pd.los = los == 1;
        pd.num_hops = read_list(r, "path_details.num_hops", 4, &Reader::u32);
        uint64_t hops = 0;
        for (uint32_t h : pd.num_hops) hops += h;
        // 32 bytes per hop point; an absurd total fails on the first missing read.
        if (hops > bytes.size() / 32) {
            throw WireError(WireErrorKind::kMalformedPayload, "path_details.hop_points",
                            "hop count exceeds the remaining payload");
        }
        pd.hop_points.reserve(static_cast<size_t>(hops));
        for (uint64_t h = 0; h < hops; ++h) {
            HopPoint hp;
            hp.x = r.f64("path_details.hop_points");
            hp.y = r.f64("path_details.hop_points");
            hp.z = r.f64("path_details.hop_points");
            hp.loss_db = r.f64("path_details.hop_points");
            pd.hop_points.push_back(hp);
        }
        cd.path_details.push_back(std::move(pd));
    }
    r.expect_end("ChannelData");
    validate(cd);
    return cd;
}

Bytes pack_channel_data(const ChannelData& cd) { return compress_channel_data(encode_channel_data(cd)); }

ChannelData unpack_channel_data(ByteView compressed) {
    return decode_channel_data(decompress_channel_data(compressed));
}

}  // namespace cosim
