#include <gtest/gtest.h>

#include <cstring>

#include "../support/random_messages.hpp"
#include "cosim/error.hpp"
#include "cosim/wire.hpp"

using namespace cosim;

namespace {

Bytes bytes_of(std::initializer_list<int> v) {
    Bytes out;
    for (int b : v) out.push_back(static_cast<uint8_t>(b));
    return out;
}

WireErrorKind decode_error(const Bytes& frame) {
    try {
        auto d = decode_frame(frame);
        ADD_FAILURE() << "decoded without error, complete=" << d.message.has_value();
    } catch (const WireError& e) {
        return e.kind();
    }
    return WireErrorKind::kCompression;
}

}  // namespace

TEST(Ipv4, ParsesDottedQuad) {
    EXPECT_EQ(Ipv4::parse("10.0.0.1"), Ipv4(10, 0, 0, 1));
    EXPECT_EQ(Ipv4::parse("255.255.255.255")->value(), 0xffffffffu);
    EXPECT_EQ(Ipv4(192, 168, 1, 20).to_string(), "192.168.1.20");
    for (const char* bad : {"", "10.0.0", "10.0.0.256", "10.0.0.1.", "a.b.c.d", "10..0.1", " 10.0.0.1"}) {
        EXPECT_FALSE(Ipv4::parse(bad).has_value()) << bad;
    }
}

TEST(Wire, PhysicsUpdateGoldenBytes) {
    PhysicsUpdate m{MsgType::kEnd, 0x0102030405060708ull, {}};
    const Bytes expected = bytes_of({'R', 'N', 'S', '1', 0x00, 13, 0, 0, 0, 0x01, 8, 7, 6, 5, 4, 3, 2, 1, 0, 0, 0, 0});
    EXPECT_EQ(encode_frame(m), expected);
}

TEST(Wire, NetworkUpdateGoldenBytes) {
    NetworkUpdate m;
    m.time_val = 5;
    m.pkt_id = {7};
    m.pkt_lengths = {1000};
    m.src_ip = {Ipv4(10, 0, 0, 1)};
    m.dst_ip = {Ipv4(10, 0, 0, 2)};
    const Bytes expected = bytes_of({'R', 'N', 'S', '1', 0x01, 61, 0, 0, 0,
                                     0x00,                                  // BEGIN
                                     5, 0, 0, 0, 0, 0, 0, 0,                // time_val
                                     1, 0, 0, 0, 7, 0, 0, 0, 0, 0, 0, 0,    // pkt_id
                                     1, 0, 0, 0, 0xe8, 0x03, 0, 0,          // pkt_lengths
                                     1, 0, 0, 0, 10, 0, 0, 1,               // src_ip, network order
                                     1, 0, 0, 0, 10, 0, 0, 2,               // dst_ip
                                     0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    EXPECT_EQ(encode_frame(m), expected);
}

TEST(Wire, RandomRoundTripIsBitExact) {
    fixtures::Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        Message m = i % 2 ? Message{fixtures::random_physics_update(rng)} : Message{fixtures::random_network_update(rng)};
        const Bytes frame = encode_frame(m);
        FrameDecode d = decode_frame(frame);
        ASSERT_TRUE(d.message.has_value());
        EXPECT_TRUE(d.remaining.empty());
        EXPECT_EQ(*d.message, m);
        EXPECT_EQ(encode_frame(*d.message), frame);
    }
}

TEST(Wire, ChannelDataRoundTrip) {
    fixtures::Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const ChannelData cd = fixtures::random_channel(rng);
        EXPECT_EQ(decode_channel_data(encode_channel_data(cd)), cd);
        EXPECT_EQ(unpack_channel_data(pack_channel_data(cd)), cd);
    }
}

TEST(Wire, EncodingIsDeterministic) {
    fixtures::Rng a(5);
    fixtures::Rng b(5);
    for (int i = 0; i < 20; ++i) {
        EXPECT_EQ(encode_frame(fixtures::random_physics_update(a)), encode_frame(fixtures::random_physics_update(b)));
    }
}

TEST(Wire, StreamingDecodeHandlesEveryPrefix) {
    fixtures::Rng rng(8);
    Bytes stream;
    std::vector<Message> sent;
    for (int i = 0; i < 3; ++i) {
        sent.push_back(fixtures::random_network_update(rng));
        append_frame(sent.back(), stream);
    }
    const size_t first_len = encode_frame(sent[0]).size();
    for (size_t cut = 0; cut < first_len; ++cut) {
        FrameDecode d = decode_frame(ByteView(stream).first(cut));
        EXPECT_FALSE(d.message.has_value()) << cut;
        EXPECT_EQ(d.remaining.size(), cut);
    }
    ByteView rest(stream);
    for (const Message& m : sent) {
        FrameDecode d = decode_frame(rest);
        ASSERT_TRUE(d.message.has_value());
        EXPECT_EQ(*d.message, m);
        rest = d.remaining;
    }
    EXPECT_TRUE(rest.empty());
}

TEST(WireMalformed, BadMagic) {
    Bytes f = encode_frame(PhysicsUpdate{});
    f[3] = '2';
    EXPECT_EQ(decode_error(f), WireErrorKind::kBadMagic);
    EXPECT_EQ(decode_error(bytes_of({'X'})), WireErrorKind::kBadMagic);
}

TEST(WireMalformed, UnknownTag) {
    Bytes f = encode_frame(PhysicsUpdate{});
    f[4] = 0x07;
    EXPECT_EQ(decode_error(f), WireErrorKind::kUnknownTag);
}

TEST(WireMalformed, OversizeLength) {
    Bytes f = bytes_of({'R', 'N', 'S', '1', 0x00, 0x01, 0x00, 0x00, 0x01});  // 16 MiB + 1
    EXPECT_EQ(decode_error(f), WireErrorKind::kOversizeFrame);
}

TEST(WireMalformed, TruncatedPayload) {
    // The header declares 13 bytes but the payload ends inside channel_data's length.
    Bytes f = encode_frame(PhysicsUpdate{});
    f.resize(f.size() - 2);
    f[5] = static_cast<uint8_t>(f.size() - kFrameHeaderSize);
    EXPECT_EQ(decode_error(f), WireErrorKind::kMalformedPayload);
}

TEST(WireMalformed, TrailingBytesInsidePayload) {
    Bytes f = encode_frame(PhysicsUpdate{});
    f.push_back(0);
    f[5] += 1;
    EXPECT_EQ(decode_error(f), WireErrorKind::kMalformedPayload);
}

TEST(WireMalformed, ListCountBeyondPayload) {
    NetworkUpdate m;
    m.pkt_id = {1};
    m.pkt_lengths = {10};
    m.src_ip = {Ipv4(1, 2, 3, 4)};
    m.dst_ip = {Ipv4(5, 6, 7, 8)};
    Bytes f = encode_frame(m);
    f[kFrameHeaderSize + 9] = 0xff;  // pkt_id count
    EXPECT_EQ(decode_error(f), WireErrorKind::kMalformedPayload);
}

TEST(WireMalformed, UnknownMsgType) {
    Bytes f = encode_frame(PhysicsUpdate{});
    f[kFrameHeaderSize] = 0x02;
    EXPECT_EQ(decode_error(f), WireErrorKind::kMalformedPayload);
}

TEST(WireMalformed, InvariantBreaks) {
    NetworkUpdate unequal;
    unequal.pkt_id = {1, 2};
    unequal.pkt_lengths = {10};
    unequal.src_ip = {Ipv4(), Ipv4()};
    unequal.dst_ip = {Ipv4(), Ipv4()};
    EXPECT_THROW(encode_frame(unequal), WireError);

    // Build the frame by hand: the clearance lists disagree in length.
    NetworkUpdate ok;
    ok.clear_pkt_id = {4};
    ok.clear_src_ip = {Ipv4(1, 1, 1, 1)};
    ok.clear_dst_ip = {Ipv4(2, 2, 2, 2)};
    ok.ber = {0.25};
    Bytes f = encode_frame(ok);
    const size_t ber_count_at = f.size() - 8 - 4;
    f[ber_count_at] = 0;
    f.resize(f.size() - 8);
    f[5] -= 8;
    EXPECT_EQ(decode_error(f), WireErrorKind::kInvariantViolation);

    Bytes g = encode_frame(ok);
    const double bad = 1.5;
    std::memcpy(&g[g.size() - 8], &bad, 8);
    EXPECT_EQ(decode_error(g), WireErrorKind::kInvariantViolation);

    NetworkUpdate dup;
    dup.pkt_id = {9, 9};
    dup.pkt_lengths = {1, 1};
    dup.src_ip = {Ipv4(), Ipv4()};
    dup.dst_ip = {Ipv4(), Ipv4()};
    try {
        encode_frame(dup);
        FAIL();
    } catch (const WireError& e) {
        EXPECT_EQ(e.kind(), WireErrorKind::kInvariantViolation);
        EXPECT_EQ(e.field(), "pkt_id");
    }
}

TEST(WireMalformed, ChannelDataInvariants) {
    ChannelData cd;
    cd.node_list.resize(2);
    PathDetails pd;
    pd.ids = {0, 1};
    pd.num_hops = {2};
    pd.hop_points.resize(1);
    cd.path_details.push_back(pd);
    EXPECT_THROW(validate(cd), WireError);

    cd.path_details[0].hop_points.resize(2);
    EXPECT_NO_THROW(validate(cd));
    cd.path_details[0].ids = {1, 1};
    EXPECT_THROW(validate(cd), WireError);
    cd.path_details[0].ids = {0, 2};
    EXPECT_THROW(validate(cd), WireError);
    cd.path_details[0].ids = {1, 0};
    cd.path_details.push_back(cd.path_details[0]);
    EXPECT_THROW(validate(cd), WireError);

    ChannelData q;
    q.node_list.push_back({{0, 0, 0}, {0, 0, 0, 2}});
    EXPECT_THROW(validate(q), WireError);
}

TEST(WireMalformed, CorruptCompressedChannelData) {
    EXPECT_THROW(decompress_channel_data(bytes_of({0xff, 0xff, 0xff, 0x00})), WireError);
    PhysicsUpdate m{MsgType::kBegin, 1, bytes_of({0xde, 0xad, 0xbe, 0xef})};
    Bytes f = encode_frame(PhysicsUpdate{MsgType::kBegin, 1, pack_channel_data(ChannelData{})});
    // Swap in an undecodable blob of the same framing.
    Bytes g = bytes_of({'R', 'N', 'S', '1', 0x00, 17, 0, 0, 0, 0x00, 1, 0, 0, 0, 0, 0, 0, 0, 4, 0, 0, 0,
                        0xde, 0xad, 0xbe, 0xef});
    EXPECT_EQ(decode_error(g), WireErrorKind::kInvariantViolation);
    EXPECT_THROW(encode_frame(m), WireError);
    EXPECT_NO_THROW(decode_frame(f));
}

TEST(WireMalformed, DecompressionCap) {
    const Bytes big(1 << 20, 0);
    const Bytes packed = compress_channel_data(big);
    EXPECT_LT(packed.size(), big.size() / 100);
    try {
        decompress_channel_data(packed, 1000);
        FAIL();
    } catch (const WireError& e) {
        EXPECT_EQ(e.kind(), WireErrorKind::kCompression);
    }
    EXPECT_EQ(decompress_channel_data(packed).size(), big.size());
}
