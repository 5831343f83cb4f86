#ifndef CHDRT_STREAM_HPP_
#define CHDRT_STREAM_HPP_

#include <cstdint>
#include <optional>

#include "chdrt/chdr.hpp"

namespace chdrt {

// ---------------------------------------------------------------------------
// StreamStatus / StreamCmd payloads.
//
// Both are fixed 24-byte payloads of three little-endian 64-bit words:
//
//   StreamStatus:  word0 = status code (0 ok, 1 seq_error)
//                  word1 = cumulative accepted bytes this epoch
//                  word2 = device buffer capacity in bytes
//
//   StreamCmd:     word0 = command code
//                  word1, word2 = arguments (zero when unused)
//
// Command codes: 0x01 halt, 0x02 flush, 0x03 resync; the device response to
// each carries the same code with bit 7 set (0x81/0x82/0x83).
// Resync request: arg0 = proposed next seq_num, arg1 = proposed resume tick.
// Resync ack: arg0 = confirmed next seq_num, arg1 = confirmed resume tick.
// ---------------------------------------------------------------------------

enum class StatusCode : uint64_t {
    Ok = 0,
    SeqError = 1,
};

struct StreamStatus {
    StatusCode status = StatusCode::Ok;
    uint64_t acked_bytes = 0;
    uint64_t capacity_bytes = 0;
};

enum class CmdCode : uint64_t {
    HaltReq = 0x01,
    FlushReq = 0x02,
    ResyncReq = 0x03,
    HaltAck = 0x81,
    FlushAck = 0x82,
    ResyncAck = 0x83,
};

struct StreamCmd {
    CmdCode code = CmdCode::HaltReq;
    uint64_t arg0 = 0;
    uint64_t arg1 = 0;
};

ChdrPacket make_status_packet(const StreamStatus& s, uint16_t seq_num, uint16_t dst_epid);
ChdrPacket make_cmd_packet(const StreamCmd& c, uint16_t seq_num, uint16_t dst_epid);
StreamStatus parse_status(const ChdrPacket& p); // throws BadPacketType / LengthMismatch
StreamCmd parse_cmd(const ChdrPacket& p);

inline bool is_cmd_response(CmdCode c) { return static_cast<uint64_t>(c) & 0x80; }

// ---------------------------------------------------------------------------
// Host-side Tx stream engine
// ---------------------------------------------------------------------------

enum class TxState {
    Idle,
    Streaming,
    ErrorDetected,  // seq_error seen, halt request sent, awaiting halt ack
    AwaitFlushAck,
    AwaitResyncAck,
};

const char* tx_state_name(TxState s);

/// Credit ledger bounding in-flight bytes against the device buffer.
struct FlowControl {
    uint64_t capacity_bytes = 0;
    uint64_t bytes_sent = 0;
    uint64_t bytes_acked = 0;

    uint64_t in_flight() const { return bytes_sent - bytes_acked; }
    bool can_send(uint64_t pkt_bytes) const
    {
        return in_flight() + pkt_bytes <= capacity_bytes;
    }
};

/// Per-stream Tx state machine with credit flow control and the three-exchange
/// sequence-error recovery. The engine itself never queues more than the one
/// block most recently denied by credits; depth is observable via
/// pending_depth().
class TxStreamEngine {
public:
    struct Config {
        uint16_t device_epid = 2;
        uint64_t capacity_bytes = 1 << 18;
        /// Lead added to "now" when proposing a resume tick during resync.
        uint64_t resync_lead_ticks = 4096;
    };

    explicit TxStreamEngine(Config cfg);

    void start(uint16_t first_seq = 0); // Idle -> Streaming

    TxState state() const { return state_; }
    const FlowControl& credits() const { return fc_; }
    uint16_t next_seq() const { return next_seq_; }
    uint64_t resumption_tick() const { return resumption_tick_; }

    /// Emits one DataWithTs packet for the block if credits allow, else parks
    /// the block in the single pending slot. Returns the packet to put on the
    /// wire, or nullopt when deferred. Throws NotStreaming outside Streaming.
    std::optional<ChdrPacket> submit_block(const SampleBlock& block, bool eob = false);

    /// Retries the pending block after credits were freed.
    std::optional<ChdrPacket> poll_pending();

    bool can_accept() const { return state_ == TxState::Streaming && !pending_; }
    size_t pending_depth() const { return pending_ ? 1 : 0; }

    /// Handles a StreamStatus from the device. A seq_error status in Streaming
    /// starts recovery and returns the first recovery request; ok statuses
    /// free credits and return nothing. Repeated seq_error during recovery is
    /// ignored.
    std::optional<ChdrPacket> on_status(const StreamStatus& s, uint64_t now);

    /// Handles a recovery response. Returns the next request, or nullopt when
    /// the third response completed recovery. Throws UnexpectedStatus if a
    /// response arrives while Streaming, ProtocolViolation on a response that
    /// does not match the awaited exchange.
    std::optional<ChdrPacket> on_cmd_response(const StreamCmd& c, uint64_t now);

    /// Dispatches any device->host packet to on_status / on_cmd_response.
    std::optional<ChdrPacket> on_packet(const ChdrPacket& p, uint64_t now);

    // introspection counters
    uint64_t recovery_episodes() const { return recovery_episodes_; }
    uint64_t recovery_requests_sent() const { return recovery_requests_sent_; }
    uint64_t packets_sent() const { return packets_sent_; }
    uint64_t blocks_dropped() const { return blocks_dropped_; }

private:
    ChdrPacket emit_data(const SampleBlock& block, bool eob);
    ChdrPacket emit_cmd(CmdCode code, uint64_t arg0 = 0, uint64_t arg1 = 0);

    Config cfg_;
    TxState state_ = TxState::Idle;
    uint16_t next_seq_ = 0;
    uint16_t cmd_seq_ = 0;
    FlowControl fc_;
    std::optional<SampleBlock> pending_;
    bool pending_eob_ = false;
    uint64_t resumption_tick_ = 0;

    uint64_t recovery_episodes_ = 0;
    uint64_t recovery_requests_sent_ = 0;
    uint64_t packets_sent_ = 0;
    uint64_t blocks_dropped_ = 0;
};

// ---------------------------------------------------------------------------
// Host-side Rx stream
// ---------------------------------------------------------------------------

struct GapReport {
    uint16_t after_seq = 0; // last seq seen before the gap
    uint16_t missing = 0;   // number of packets skipped
};

class RxStream {
public:
    struct Result {
        SampleBlock block;
        std::optional<GapReport> gap;
        bool eob = false;
    };

    /// Converts a data packet into samples, tracking sequence gaps.
    /// Throws BadPacketType for non-data packets.
    Result on_packet(const ChdrPacket& p);

    bool started() const { return started_; }
    uint64_t gap_count() const { return gap_count_; }
    uint64_t packet_count() const { return packet_count_; }

private:
    bool started_ = false;
    uint16_t expected_seq_ = 0;
    uint64_t gap_count_ = 0;
    uint64_t packet_count_ = 0;
};

} // namespace chdrt

#endif
