#include "doctest.h"

#include <cmath>

#include "chdrt/chdr.hpp"
#include "chdrt/util.hpp"

using namespace chdrt;

TEST_SUITE_BEGIN("chdr");

// Golden wire vectors, worked out by hand from the header bit layout:
//   [63:58] vc [57] eob [56] eov [55:53] type [52:48] mdata [47:32] seq
//   [31:16] length [15:0] dst_epid
TEST_CASE("header golden vectors")
{
    ChdrHeader h;
    h.pkt_type = PktType::DataWithTs;
    h.seq_num = 1;
    h.length = 24;
    h.dst_epid = 2;
    CHECK(encode_header(h) == 0x00E0000100180002ULL);
    CHECK(decode_header(0x00E0000100180002ULL) == h);

    ChdrHeader s;
    s.pkt_type = PktType::StreamStatus;
    s.length = 8;
    CHECK(encode_header(s) == 0x0020000000080000ULL);
    CHECK(decode_header(0x0020000000080000ULL) == s);

    ChdrHeader f; // every field loaded, flags set
    f.vc = 0x2A;
    f.eob = true;
    f.eov = true;
    f.pkt_type = PktType::Control;
    f.num_mdata = 0x15;
    f.seq_num = 0xBEEF;
    f.length = 0x1234;
    f.dst_epid = 0xCAFE;
    const uint64_t word = (0x2AULL << 58) | (1ULL << 57) | (1ULL << 56) | (0x4ULL << 53) |
                          (0x15ULL << 48) | (0xBEEFULL << 32) | (0x1234ULL << 16) | 0xCAFEULL;
    CHECK(encode_header(f) == word);
    CHECK(decode_header(word) == f);
}

TEST_CASE("header field overflow is rejected")
{
    ChdrHeader h;
    h.vc = 0x40;
    CHECK_THROWS_AS(encode_header(h), FieldOverflow);
    h.vc = 0;
    h.num_mdata = 0x20;
    CHECK_THROWS_AS(encode_header(h), FieldOverflow);
}

TEST_CASE("unassigned packet type codes are rejected")
{
    CHECK_THROWS_AS(decode_header(0x3ULL << 53), InvalidPktType);
    CHECK_THROWS_AS(decode_header(0x5ULL << 53), InvalidPktType);
    // every assigned code round-trips
    for (uint8_t code : { 0x0, 0x1, 0x2, 0x4, 0x6, 0x7 }) {
        const uint64_t word = static_cast<uint64_t>(code) << 53;
        CHECK(static_cast<uint8_t>(decode_header(word).pkt_type) == code);
    }
}

TEST_CASE("header encode/decode round-trip over random fields")
{
    Rng rng(0x11);
    const PktType types[] = { PktType::Management, PktType::StreamStatus,
                              PktType::StreamCmd,  PktType::Control,
                              PktType::DataNoTs,   PktType::DataWithTs };
    for (int i = 0; i < 2000; i++) {
        ChdrHeader h;
        h.vc = static_cast<uint8_t>(rng.next_below(64));
        h.eob = rng.next_below(2) != 0;
        h.eov = rng.next_below(2) != 0;
        h.pkt_type = types[rng.next_below(6)];
        h.num_mdata = static_cast<uint8_t>(rng.next_below(32));
        h.seq_num = static_cast<uint16_t>(rng.next_u64());
        h.length = static_cast<uint16_t>(rng.next_u64());
        h.dst_epid = static_cast<uint16_t>(rng.next_u64());
        CHECK(decode_header(encode_header(h)) == h);
    }
}

TEST_CASE("data packet layout: 512 samples make a 2064-byte packet")
{
    SampleBlock block;
    block.start_tick = 0x123456789ABCDEF0ULL;
    block.samples.assign(512, Cf32(0.25f, -0.5f));
    ChdrPacket p = make_data_packet(block, 7, 0x0010, true);
    CHECK(p.header.length == 2064); // 8 header + 8 timestamp + 512*4 payload
    CHECK(p.header.pkt_type == PktType::DataWithTs);
    CHECK(p.timestamp == block.start_tick);

    const std::vector<uint8_t> wire = encode_packet(p);
    CHECK(wire.size() == 2064);
    const ChdrPacket back = decode_packet(wire);
    CHECK(back == p);

    // payload is sc16: little-endian int16 I then Q per sample
    const int16_t i0 = static_cast<int16_t>(get_le16(&back.payload[0]));
    const int16_t q0 = static_cast<int16_t>(get_le16(&back.payload[2]));
    CHECK(i0 == 8192);  // round(0.25 * 32767)
    CHECK(q0 == -16384); // round(-0.5 * 32767)
}

TEST_CASE("packet round-trip over random contents")
{
    Rng rng(0x22);
    const PktType types[] = { PktType::Management, PktType::StreamStatus,
                              PktType::StreamCmd,  PktType::Control,
                              PktType::DataNoTs,   PktType::DataWithTs };
    for (int i = 0; i < 500; i++) {
        ChdrPacket p;
        p.header.pkt_type = types[rng.next_below(6)];
        p.header.vc = static_cast<uint8_t>(rng.next_below(64));
        p.header.eob = rng.next_below(2) != 0;
        p.header.seq_num = static_cast<uint16_t>(rng.next_u64());
        p.header.dst_epid = static_cast<uint16_t>(rng.next_u64());
        if (p.header.pkt_type == PktType::DataWithTs)
            p.timestamp = rng.next_u64();
        const size_t n_mdata = rng.next_below(4);
        p.mdata.resize(8 * n_mdata);
        for (auto& b : p.mdata)
            b = static_cast<uint8_t>(rng.next_u64());
        p.header.num_mdata = static_cast<uint8_t>(n_mdata);
        p.payload.resize(8 * rng.next_below(16));
        for (auto& b : p.payload)
            b = static_cast<uint8_t>(rng.next_u64());
        p.header.length = static_cast<uint16_t>(8 + (p.timestamp ? 8 : 0) +
                                                p.mdata.size() + p.payload.size());

        const std::vector<uint8_t> wire = encode_packet(p);
        CHECK(wire.size() == p.header.length);
        CHECK(decode_packet(wire) == p);
    }
}

TEST_CASE("decode rejects length-inconsistent buffers")
{
    SampleBlock block;
    block.samples.assign(16, Cf32(0.1f, 0.1f));
    std::vector<uint8_t> wire = encode_packet(make_data_packet(block, 0, 1, true));

    SUBCASE("truncated buffer")
    {
        std::vector<uint8_t> cut(wire.begin(), wire.end() - 4);
        CHECK_THROWS_AS(decode_packet(cut), Error);
    }
    SUBCASE("trailing garbage")
    {
        wire.push_back(0);
        CHECK_THROWS_AS(decode_packet(wire), Error);
    }
    SUBCASE("shorter than a header")
    {
        std::vector<uint8_t> tiny(7, 0);
        CHECK_THROWS_AS(decode_packet(tiny), Error);
    }
    SUBCASE("header length lies")
    {
        // claim 8 more bytes than are present
        ChdrHeader h = decode_header(get_le64(wire.data()));
        h.length = static_cast<uint16_t>(h.length + 8);
        std::vector<uint8_t> lied;
        put_le64(lied, encode_header(h));
        lied.insert(lied.end(), wire.begin() + 8, wire.end());
        CHECK_THROWS_AS(decode_packet(lied), Error);
    }
    SUBCASE("timestamped type without room for the timestamp")
    {
        ChdrHeader h;
        h.pkt_type = PktType::DataWithTs;
        h.length = 8;
        std::vector<uint8_t> buf;
        put_le64(buf, encode_header(h));
        CHECK_THROWS_AS(decode_packet(buf), Error);
    }
}

TEST_CASE("fuzzed decode never crashes")
{
    Rng rng(0x33);
    int decoded = 0, rejected = 0;
    for (int i = 0; i < 20000; i++) {
        std::vector<uint8_t> buf(rng.next_below(96));
        for (auto& b : buf)
            b = static_cast<uint8_t>(rng.next_u64());
        // bias half the cases toward consistent lengths so both paths run
        if (buf.size() >= 8 && rng.next_below(2) == 0) {
            ChdrHeader h;
            h.pkt_type = PktType::Control;
            h.length = static_cast<uint16_t>(buf.size());
            std::vector<uint8_t> hdr;
            put_le64(hdr, encode_header(h));
            std::copy(hdr.begin(), hdr.end(), buf.begin());
        }
        try {
            (void)decode_packet(buf);
            decoded++;
        } catch (const Error&) {
            rejected++;
        }
    }
    CHECK(decoded > 0);
    CHECK(rejected > 0);
}

TEST_CASE("sc16 quantizer: endpoints, rounding, saturation, monotonicity")
{
    CHECK(quantize_sc16(0.0f) == 0);
    CHECK(quantize_sc16(1.0f) == 32767);
    CHECK(quantize_sc16(-1.0f) == -32767);
    CHECK(quantize_sc16(0.5f) == 16384); // round(16383.5) away from zero
    CHECK(quantize_sc16(2.0f) == 32767);
    CHECK(quantize_sc16(-2.0f) == -32768);

    Rng rng(0x44);
    for (int i = 0; i < 5000; i++) {
        const float a = static_cast<float>(rng.next_double() * 4.0 - 2.0);
        const float b = static_cast<float>(rng.next_double() * 4.0 - 2.0);
        const float lo = std::min(a, b), hi = std::max(a, b);
        CHECK(quantize_sc16(lo) <= quantize_sc16(hi));
    }
}

TEST_CASE("wire sample round-trip loses at most half an LSB and is idempotent")
{
    Rng rng(0x55);
    std::vector<Cf32> x(4096);
    for (auto& v : x)
        v = Cf32(static_cast<float>(rng.next_double() * 2 - 1),
                 static_cast<float>(rng.next_double() * 2 - 1));

    const std::vector<uint8_t> wire = samples_to_wire(x);
    const std::vector<Cf32> back = wire_to_samples(wire);
    REQUIRE(back.size() == x.size());

    float worst = 0;
    for (size_t i = 0; i < x.size(); i++) {
        worst = std::max(worst, std::abs(x[i].real() - back[i].real()));
        worst = std::max(worst, std::abs(x[i].imag() - back[i].imag()));
    }
    CHECK(worst <= 0.5f / 32767.0f + 1e-9f);

    // a second hop is exact: the dequantized grid maps back to itself
    CHECK(samples_to_wire(back) == wire);
}

TEST_CASE("wire decode rejects partial samples")
{
    std::vector<uint8_t> bytes(6, 0);
    CHECK_THROWS_AS(wire_to_samples(bytes), OddLength);
}

TEST_CASE("sequence arithmetic wraps modulo 2^16")
{
    CHECK(seq_add(0xFFFF, 1) == 0);
    CHECK(seq_add(0xFFF0, 0x20) == 0x10);
    CHECK(seq_distance(0xFFFE, 2) == 4);
    CHECK(seq_distance(5, 5) == 0);
}

TEST_SUITE_END();
