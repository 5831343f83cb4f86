#include "chdrt/stream.hpp"

#include <algorithm>

#include "chdrt/util.hpp"

namespace chdrt {

namespace {

std::vector<uint8_t> three_words(uint64_t a, uint64_t b, uint64_t c)
{
    std::vector<uint8_t> buf;
    buf.reserve(24);
    put_le64(buf, a);
    put_le64(buf, b);
    put_le64(buf, c);
    return buf;
}

} // namespace

ChdrPacket make_status_packet(const StreamStatus& s, uint16_t seq_num, uint16_t dst_epid)
{
    ChdrPacket p;
    p.header.pkt_type = PktType::StreamStatus;
    p.header.seq_num = seq_num;
    p.header.dst_epid = dst_epid;
    p.payload = three_words(static_cast<uint64_t>(s.status), s.acked_bytes, s.capacity_bytes);
    p.header.length = static_cast<uint16_t>(8 + p.payload.size());
    return p;
}

ChdrPacket make_cmd_packet(const StreamCmd& c, uint16_t seq_num, uint16_t dst_epid)
{
    ChdrPacket p;
    p.header.pkt_type = PktType::StreamCmd;
    p.header.seq_num = seq_num;
    p.header.dst_epid = dst_epid;
    p.payload = three_words(static_cast<uint64_t>(c.code), c.arg0, c.arg1);
    p.header.length = static_cast<uint16_t>(8 + p.payload.size());
    return p;
}

StreamStatus parse_status(const ChdrPacket& p)
{
    if (p.header.pkt_type != PktType::StreamStatus)
        throw BadPacketType("expected StreamStatus packet");
    if (p.payload.size() != 24)
        throw LengthMismatch("StreamStatus payload must be 24 bytes");
    StreamStatus s;
    s.status = static_cast<StatusCode>(get_le64(p.payload.data()));
    s.acked_bytes = get_le64(p.payload.data() + 8);
    s.capacity_bytes = get_le64(p.payload.data() + 16);
    return s;
}

StreamCmd parse_cmd(const ChdrPacket& p)
{
    if (p.header.pkt_type != PktType::StreamCmd)
        throw BadPacketType("expected StreamCmd packet");
    if (p.payload.size() != 24)
        throw LengthMismatch("StreamCmd payload must be 24 bytes");
    StreamCmd c;
    c.code = static_cast<CmdCode>(get_le64(p.payload.data()));
    c.arg0 = get_le64(p.payload.data() + 8);
    c.arg1 = get_le64(p.payload.data() + 16);
    return c;
}

const char* tx_state_name(TxState s)
{
    switch (s) {
    case TxState::Idle:           return "Idle";
    case TxState::Streaming:      return "Streaming";
    case TxState::ErrorDetected:  return "ErrorDetected";
    case TxState::AwaitFlushAck:  return "AwaitFlushAck";
    case TxState::AwaitResyncAck: return "AwaitResyncAck";
    }
    return "?";
}

TxStreamEngine::TxStreamEngine(Config cfg)
    : cfg_(cfg)
{
    fc_.capacity_bytes = cfg_.capacity_bytes;
}

void TxStreamEngine::start(uint16_t first_seq)
{
    state_ = TxState::Streaming;
    next_seq_ = first_seq;
}

ChdrPacket TxStreamEngine::emit_data(const SampleBlock& block, bool eob)
{
    ChdrPacket p = make_data_packet(block, next_seq_, cfg_.device_epid, true, eob);
    next_seq_ = seq_add(next_seq_, 1);
    fc_.bytes_sent += p.header.length;
    packets_sent_++;
    return p;
}

ChdrPacket TxStreamEngine::emit_cmd(CmdCode code, uint64_t arg0, uint64_t arg1)
{
    recovery_requests_sent_++;
    return make_cmd_packet(StreamCmd{ code, arg0, arg1 }, cmd_seq_++, cfg_.device_epid);
}

std::optional<ChdrPacket> TxStreamEngine::submit_block(const SampleBlock& block, bool eob)
{
    if (state_ != TxState::Streaming)
        throw NotStreaming(std::string("submit_block in state ") + tx_state_name(state_));

    const uint64_t pkt_bytes = 16 + block.samples.size() * 4;
    if (!pending_ && fc_.can_send(pkt_bytes))
        return emit_data(block, eob);

    if (pending_) {
        // single-slot contract: a second deferred block is an overrun and the
        // oldest one is dropped, never hidden in a queue
        blocks_dropped_++;
    }
    pending_ = block;
    pending_eob_ = eob;
    return std::nullopt;
}

std::optional<ChdrPacket> TxStreamEngine::poll_pending()
{
    if (!pending_ || state_ != TxState::Streaming)
        return std::nullopt;
    const uint64_t pkt_bytes = 16 + pending_->samples.size() * 4;
    if (!fc_.can_send(pkt_bytes))
        return std::nullopt;
    ChdrPacket p = emit_data(*pending_, pending_eob_);
    pending_.reset();
    pending_eob_ = false;
    return p;
}

std::optional<ChdrPacket> TxStreamEngine::on_status(const StreamStatus& s, uint64_t now)
{
    if (s.status == StatusCode::Ok) {
        // clamp: a stale ack from before an epoch reset must not outrun the
        // ledger of the current epoch
        const uint64_t acked = std::min(s.acked_bytes, fc_.bytes_sent);
        if (acked > fc_.bytes_acked)
            fc_.bytes_acked = acked;
        return std::nullopt;
    }

    // seq_error
    if (state_ != TxState::Streaming)
        return std::nullopt; // already recovering, idempotent
    state_ = TxState::ErrorDetected;
    recovery_episodes_++;
    if (pending_) {
        // samples in the gap are not retransmitted
        pending_.reset();
        pending_eob_ = false;
        blocks_dropped_++;
    }
    (void)now;
    return emit_cmd(CmdCode::HaltReq);
}

std::optional<ChdrPacket> TxStreamEngine::on_cmd_response(const StreamCmd& c, uint64_t now)
{
    if (!is_cmd_response(c.code))
        throw ProtocolViolation("request code on the response path");
    if (state_ == TxState::Streaming || state_ == TxState::Idle)
        throw UnexpectedStatus(std::string("recovery ack in state ") + tx_state_name(state_));

    switch (state_) {
    case TxState::ErrorDetected:
        if (c.code != CmdCode::HaltAck)
            throw ProtocolViolation("awaiting halt ack");
        state_ = TxState::AwaitFlushAck;
        return emit_cmd(CmdCode::FlushReq);

    case TxState::AwaitFlushAck:
        if (c.code != CmdCode::FlushAck)
            throw ProtocolViolation("awaiting flush ack");
        state_ = TxState::AwaitResyncAck;
        return emit_cmd(CmdCode::ResyncReq, next_seq_, now + cfg_.resync_lead_ticks);

    case TxState::AwaitResyncAck:
        if (c.code != CmdCode::ResyncAck)
            throw ProtocolViolation("awaiting resync ack");
        next_seq_ = static_cast<uint16_t>(c.arg0);
        resumption_tick_ = c.arg1;
        // epoch reset: the flush discarded everything in flight
        fc_.bytes_sent = 0;
        fc_.bytes_acked = 0;
        state_ = TxState::Streaming;
        return std::nullopt;

    default:
        throw ProtocolViolation("unreachable recovery state");
    }
}

std::optional<ChdrPacket> TxStreamEngine::on_packet(const ChdrPacket& p, uint64_t now)
{
    switch (p.header.pkt_type) {
    case PktType::StreamStatus:
        return on_status(parse_status(p), now);
    case PktType::StreamCmd:
        return on_cmd_response(parse_cmd(p), now);
    default:
        throw BadPacketType(std::string("engine cannot consume ") +
                            pkt_type_name(p.header.pkt_type));
    }
}

RxStream::Result RxStream::on_packet(const ChdrPacket& p)
{
    if (p.header.pkt_type != PktType::DataNoTs && p.header.pkt_type != PktType::DataWithTs)
        throw BadPacketType(std::string("non-data packet on the data path: ") +
                            pkt_type_name(p.header.pkt_type));

    Result r;
    r.block.samples = wire_to_samples(p.payload);
    r.block.start_tick = p.timestamp.value_or(0);
    r.eob = p.header.eob;

    if (started_) {
        const uint16_t missing = seq_distance(expected_seq_, p.header.seq_num);
        if (missing != 0) {
            gap_count_ += missing;
            r.gap = GapReport{ seq_add(expected_seq_, static_cast<uint16_t>(-1)), missing };
        }
    }
    started_ = true;
    expected_seq_ = seq_add(p.header.seq_num, 1);
    packet_count_++;
    return r;
}

} // namespace chdrt
