#include "doctest.h"

#include <cstdint>
#include <vector>

#include "chdrt/errors.hpp"
#include "chdrt/stream.hpp"
#include "chdrt/util.hpp"

using namespace chdrt;

TEST_SUITE_BEGIN("stream");

namespace {

SampleBlock block_of(size_t n, uint64_t start_tick, float fill = 0.25f)
{
    SampleBlock b;
    b.start_tick = start_tick;
    b.samples.assign(n, Cf32(fill, -fill));
    return b;
}

TxStreamEngine::Config small_config(uint64_t capacity)
{
    TxStreamEngine::Config cfg;
    cfg.device_epid = 2;
    cfg.capacity_bytes = capacity;
    cfg.resync_lead_ticks = 500;
    return cfg;
}

} // namespace

TEST_CASE("status packet encodes to the golden header word")
{
    StreamStatus s;
    s.status = StatusCode::SeqError;
    s.acked_bytes = 0x1122334455667788ULL;
    s.capacity_bytes = 1 << 18;
    ChdrPacket p = make_status_packet(s, 0, 1);

    // type 0x1, length 8 + 24 = 32, seq 0, dst epid 1
    CHECK(encode_header(p.header) == 0x0020000000200001ULL);
    REQUIRE(p.payload.size() == 24);
    StreamStatus back = parse_status(p);
    CHECK(back.status == StatusCode::SeqError);
    CHECK(back.acked_bytes == 0x1122334455667788ULL);
    CHECK(back.capacity_bytes == 1 << 18);
}

TEST_CASE("command packet encodes to the golden header word")
{
    StreamCmd c;
    c.code = CmdCode::HaltReq;
    ChdrPacket p = make_cmd_packet(c, 0, 2);

    // type 0x2, length 32, seq 0, dst epid 2
    CHECK(encode_header(p.header) == 0x0040000000200002ULL);
    StreamCmd back = parse_cmd(p);
    CHECK(back.code == CmdCode::HaltReq);
    CHECK(back.arg0 == 0);
    CHECK(back.arg1 == 0);
}

TEST_CASE("command round trip preserves both arguments")
{
    StreamCmd c;
    c.code = CmdCode::ResyncReq;
    c.arg0 = 0xBEEF;
    c.arg1 = 123456789;
    StreamCmd back = parse_cmd(make_cmd_packet(c, 9, 2));
    CHECK(back.code == CmdCode::ResyncReq);
    CHECK(back.arg0 == 0xBEEF);
    CHECK(back.arg1 == 123456789);
}

TEST_CASE("parsers reject wrong types and lengths")
{
    ChdrPacket data = make_data_packet(block_of(4, 0), 0, 2, true);
    CHECK_THROWS_AS((void)parse_status(data), BadPacketType);
    CHECK_THROWS_AS((void)parse_cmd(data), BadPacketType);

    ChdrPacket bad = make_status_packet(StreamStatus{}, 0, 1);
    bad.payload.resize(16);
    bad.header.length = 8 + 16;
    CHECK_THROWS_AS((void)parse_status(bad), LengthMismatch);

    ChdrPacket badc = make_cmd_packet(StreamCmd{}, 0, 1);
    badc.payload.push_back(0);
    badc.header.length = 8 + 25;
    CHECK_THROWS_AS((void)parse_cmd(badc), LengthMismatch);
}

TEST_CASE("response codes carry bit 7")
{
    CHECK(!is_cmd_response(CmdCode::HaltReq));
    CHECK(!is_cmd_response(CmdCode::FlushReq));
    CHECK(!is_cmd_response(CmdCode::ResyncReq));
    CHECK(is_cmd_response(CmdCode::HaltAck));
    CHECK(is_cmd_response(CmdCode::FlushAck));
    CHECK(is_cmd_response(CmdCode::ResyncAck));
}

TEST_CASE("nominal submit path: sequence numbers, credits, acks")
{
    TxStreamEngine eng(small_config(1 << 16));
    CHECK(eng.state() == TxState::Idle);
    CHECK_THROWS_AS((void)eng.submit_block(block_of(32, 0)), NotStreaming);

    eng.start(0);
    CHECK(eng.state() == TxState::Streaming);

    auto p0 = eng.submit_block(block_of(32, 100));
    REQUIRE(p0.has_value());
    CHECK(p0->header.seq_num == 0);
    CHECK(p0->header.pkt_type == PktType::DataWithTs);
    CHECK(p0->header.dst_epid == 2);
    CHECK(p0->timestamp == 100);
    CHECK(p0->header.length == 16 + 32 * 4);

    auto p1 = eng.submit_block(block_of(32, 132));
    REQUIRE(p1.has_value());
    CHECK(p1->header.seq_num == 1);
    CHECK(eng.next_seq() == 2);
    CHECK(eng.credits().bytes_sent == 2 * 144);
    CHECK(eng.credits().in_flight() == 2 * 144);

    eng.on_status(StreamStatus{ StatusCode::Ok, 144, 1 << 16 }, 200);
    CHECK(eng.credits().in_flight() == 144);
    CHECK(eng.packets_sent() == 2);
}

TEST_CASE("credit exhaustion parks one block and drops the overrun")
{
    // capacity fits exactly two 144-byte packets
    TxStreamEngine eng(small_config(300));
    eng.start(0);

    CHECK(eng.submit_block(block_of(32, 0, 0.1f)).has_value());
    CHECK(eng.submit_block(block_of(32, 32, 0.2f)).has_value());
    CHECK(eng.can_accept());

    // third exceeds credits: parked
    CHECK(!eng.submit_block(block_of(32, 64, 0.3f)).has_value());
    CHECK(eng.pending_depth() == 1);
    CHECK(!eng.can_accept());
    CHECK(eng.blocks_dropped() == 0);

    // fourth displaces the parked third, which is gone for good
    CHECK(!eng.submit_block(block_of(32, 96, 0.4f)).has_value());
    CHECK(eng.pending_depth() == 1);
    CHECK(eng.blocks_dropped() == 1);

    // still no credits
    CHECK(!eng.poll_pending().has_value());

    // one packet acked: the parked block (the fourth) goes out next
    eng.on_status(StreamStatus{ StatusCode::Ok, 144, 300 }, 50);
    auto p = eng.poll_pending();
    REQUIRE(p.has_value());
    CHECK(p->header.seq_num == 2);
    REQUIRE(p->timestamp.has_value());
    CHECK(*p->timestamp == 96); // block 64 was dropped, not retransmitted
    CHECK(eng.pending_depth() == 0);
    CHECK(eng.can_accept());
}

TEST_CASE("recovery runs exactly three exchanges and adopts the resync reply")
{
    TxStreamEngine eng(small_config(1 << 16));
    eng.start(0);
    (void)eng.submit_block(block_of(32, 0));
    (void)eng.submit_block(block_of(32, 32));
    CHECK(eng.next_seq() == 2);

    // error report opens the episode and emits the halt request
    auto halt = eng.on_status(StreamStatus{ StatusCode::SeqError, 0, 0 }, 1000);
    REQUIRE(halt.has_value());
    CHECK(parse_cmd(*halt).code == CmdCode::HaltReq);
    CHECK(eng.state() == TxState::ErrorDetected);
    CHECK(eng.recovery_episodes() == 1);
    CHECK(eng.recovery_requests_sent() == 1);

    // repeated error reports during recovery are idempotent
    CHECK(!eng.on_status(StreamStatus{ StatusCode::SeqError, 0, 0 }, 1001).has_value());
    CHECK(eng.recovery_episodes() == 1);

    // submissions are refused mid-recovery
    CHECK_THROWS_AS((void)eng.submit_block(block_of(32, 64)), NotStreaming);

    // wrong ack for the stage is a protocol violation
    CHECK_THROWS_AS(
        (void)eng.on_cmd_response(StreamCmd{ CmdCode::FlushAck, 0, 0 }, 1005),
        ProtocolViolation);

    auto flush = eng.on_cmd_response(StreamCmd{ CmdCode::HaltAck, 0, 0 }, 1010);
    REQUIRE(flush.has_value());
    CHECK(parse_cmd(*flush).code == CmdCode::FlushReq);
    CHECK(eng.state() == TxState::AwaitFlushAck);

    auto resync = eng.on_cmd_response(StreamCmd{ CmdCode::FlushAck, 0, 0 }, 1020);
    REQUIRE(resync.has_value());
    StreamCmd req = parse_cmd(*resync);
    CHECK(req.code == CmdCode::ResyncReq);
    CHECK(req.arg0 == 2);           // proposes to continue the numbering
    CHECK(req.arg1 == 1020 + 500);  // now + configured lead
    CHECK(eng.state() == TxState::AwaitResyncAck);

    // device confirms with its own choice; engine adopts it
    auto done = eng.on_cmd_response(StreamCmd{ CmdCode::ResyncAck, 7, 9999 }, 1030);
    CHECK(!done.has_value());
    CHECK(eng.state() == TxState::Streaming);
    CHECK(eng.next_seq() == 7);
    CHECK(eng.resumption_tick() == 9999);
    CHECK(eng.recovery_requests_sent() == 3);

    // epoch reset: the flushed bytes no longer count against credits
    CHECK(eng.credits().bytes_sent == 0);
    CHECK(eng.credits().bytes_acked == 0);

    auto next = eng.submit_block(block_of(32, 10000));
    REQUIRE(next.has_value());
    CHECK(next->header.seq_num == 7);
}

TEST_CASE("error report drops the parked block")
{
    TxStreamEngine eng(small_config(150)); // one packet of credit
    eng.start(0);
    CHECK(eng.submit_block(block_of(32, 0)).has_value());
    CHECK(!eng.submit_block(block_of(32, 32)).has_value());
    CHECK(eng.pending_depth() == 1);

    (void)eng.on_status(StreamStatus{ StatusCode::SeqError, 0, 0 }, 100);
    CHECK(eng.pending_depth() == 0);
    CHECK(eng.blocks_dropped() == 1);
}

TEST_CASE("acks while streaming reject recovery responses and vice versa")
{
    TxStreamEngine eng(small_config(1 << 16));
    eng.start(0);
    CHECK_THROWS_AS(
        (void)eng.on_cmd_response(StreamCmd{ CmdCode::HaltAck, 0, 0 }, 1),
        UnexpectedStatus);

    (void)eng.on_status(StreamStatus{ StatusCode::SeqError, 0, 0 }, 2);
    // a request code has no business on the response path
    CHECK_THROWS_AS(
        (void)eng.on_cmd_response(StreamCmd{ CmdCode::HaltReq, 0, 0 }, 3),
        ProtocolViolation);
}

TEST_CASE("on_packet dispatches and rejects data packets")
{
    TxStreamEngine eng(small_config(1 << 16));
    eng.start(0);
    ChdrPacket ok = make_status_packet(StreamStatus{ StatusCode::Ok, 0, 0 }, 0, 1);
    CHECK(!eng.on_packet(ok, 0).has_value());
    ChdrPacket data = make_data_packet(block_of(4, 0), 0, 1, true);
    CHECK_THROWS_AS((void)eng.on_packet(data, 0), BadPacketType);
}

TEST_CASE("stale acks from before the epoch reset cannot outrun the ledger")
{
    TxStreamEngine eng(small_config(1 << 16));
    eng.start(0);
    (void)eng.submit_block(block_of(32, 0)); // 144 bytes sent

    // ack claims more than was ever sent this epoch: clamp, don't underflow
    eng.on_status(StreamStatus{ StatusCode::Ok, 10000, 1 << 16 }, 10);
    CHECK(eng.credits().bytes_acked == 144);
    CHECK(eng.credits().in_flight() == 0);

    // a lower ack never rolls the ledger backwards
    eng.on_status(StreamStatus{ StatusCode::Ok, 50, 1 << 16 }, 11);
    CHECK(eng.credits().bytes_acked == 144);
}

TEST_CASE("sequence numbers wrap at 16 bits")
{
    TxStreamEngine eng(small_config(1 << 16));
    eng.start(0xFFFE);
    const uint16_t want[] = { 0xFFFE, 0xFFFF, 0x0000, 0x0001 };
    for (uint16_t w : want) {
        auto p = eng.submit_block(block_of(8, 0));
        REQUIRE(p.has_value());
        CHECK(p->header.seq_num == w);
    }
}

TEST_CASE("rx stream reports gaps that match the ground truth")
{
    // Random drops over a wrapping sequence: RxStream must account for every
    // missing packet exactly once.
    Rng rng(2024);
    RxStream rx;
    uint64_t truth_missing = 0;
    bool first = true;
    uint16_t prev_seq = 0;
    uint64_t delivered = 0;

    for (uint32_t i = 0; i < 10000; i++) {
        const uint16_t seq = static_cast<uint16_t>(0xFF00 + i); // crosses the wrap
        if (rng.next_below(10) == 0)
            continue; // dropped in transit
        ChdrPacket p = make_data_packet(block_of(4, i * 4), seq, 1, true, false);
        auto r = rx.on_packet(p);
        if (!first) {
            const uint16_t miss = static_cast<uint16_t>(seq - prev_seq - 1);
            truth_missing += miss;
            if (miss == 0) {
                CHECK(!r.gap.has_value());
            } else {
                REQUIRE(r.gap.has_value());
                CHECK(r.gap->missing == miss);
                CHECK(r.gap->after_seq == prev_seq);
            }
        } else {
            CHECK(!r.gap.has_value());
        }
        CHECK(r.block.start_tick == i * 4);
        first = false;
        prev_seq = seq;
        delivered++;
    }
    CHECK(rx.gap_count() == truth_missing);
    CHECK(rx.packet_count() == delivered);
    CHECK(truth_missing > 500); // the scenario actually exercised drops
}

TEST_CASE("rx stream surfaces eob and rejects non-data packets")
{
    RxStream rx;
    ChdrPacket p = make_data_packet(block_of(4, 77), 0, 1, true, true);
    auto r = rx.on_packet(p);
    CHECK(r.eob);
    CHECK(r.block.start_tick == 77);
    REQUIRE(r.block.samples.size() == 4);

    ChdrPacket s = make_status_packet(StreamStatus{}, 0, 1);
    CHECK_THROWS_AS((void)rx.on_packet(s), BadPacketType);
}

TEST_CASE("property: credits and pending depth hold over a 100k-packet trace")
{
    // Randomized closed loop against a device mirror. After every event the
    // two load-bearing invariants must hold: bytes in flight never exceed
    // the advertised capacity, and at most one block is ever parked.
    const uint64_t capacity = 1 << 14;
    TxStreamEngine eng(small_config(capacity));
    eng.start(0);

    Rng rng(31337);
    uint64_t now = 0;
    uint64_t device_bytes = 0;   // device-side accepted-bytes ledger
    uint16_t expect_seq = 0;     // device-side expected data seq
    uint64_t capacity_violations = 0;
    uint64_t pending_violations = 0;
    uint64_t seq_mismatches = 0;
    uint64_t episodes = 0;

    auto audit = [&] {
        if (eng.credits().in_flight() > capacity)
            capacity_violations++;
        if (eng.pending_depth() > 1)
            pending_violations++;
    };
    auto account = [&](const ChdrPacket& p) {
        if (p.header.seq_num != expect_seq)
            seq_mismatches++;
        expect_seq = seq_add(p.header.seq_num, 1);
        device_bytes += p.header.length;
    };

    uint64_t guard = 0;
    while (eng.packets_sent() < 100000 && guard++ < 1000000) {
        now += 1 + rng.next_below(8);
        const uint64_t r = rng.next_below(100);
        if (r < 70) {
            const size_t n = 16 + rng.next_below(241); // 16..256 samples
            if (auto p = eng.submit_block(block_of(n, now)))
                account(*p);
        } else if (r < 97) {
            eng.on_status(StreamStatus{ StatusCode::Ok, device_bytes, capacity }, now);
            if (auto p = eng.poll_pending())
                account(*p);
        } else {
            // full error round trip driven by the mirror
            auto halt = eng.on_status(StreamStatus{ StatusCode::SeqError, device_bytes, capacity }, now);
            REQUIRE(halt.has_value());
            audit();
            auto flush = eng.on_cmd_response(StreamCmd{ CmdCode::HaltAck, 0, 0 }, now + 1);
            REQUIRE(flush.has_value());
            auto resync = eng.on_cmd_response(StreamCmd{ CmdCode::FlushAck, 0, 0 }, now + 2);
            REQUIRE(resync.has_value());
            StreamCmd req = parse_cmd(*resync);
            const uint64_t resume = std::max(req.arg1, now + 100);
            (void)eng.on_cmd_response(StreamCmd{ CmdCode::ResyncAck, req.arg0, resume }, now + 3);
            expect_seq = static_cast<uint16_t>(req.arg0);
            device_bytes = 0; // flush emptied the device buffer
            episodes++;
        }
        audit();
    }

    CHECK(eng.packets_sent() >= 100000);
    CHECK(capacity_violations == 0);
    CHECK(pending_violations == 0);
    CHECK(seq_mismatches == 0);
    CHECK(episodes == eng.recovery_episodes());
    CHECK(eng.recovery_requests_sent() == 3 * episodes);
    CHECK(episodes > 100); // the mix actually produced recoveries
    MESSAGE("trace: ", eng.packets_sent(), " packets, ", episodes, " recovery episodes");
}

TEST_SUITE_END();
