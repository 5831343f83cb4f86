#ifndef CHDRT_CHDR_HPP_
#define CHDRT_CHDR_HPP_

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "chdrt/errors.hpp"

namespace chdrt {

using Cf32 = std::complex<float>;

/// CHDR packet types. Codes 0x3 and 0x5 are unassigned.
enum class PktType : uint8_t {
    Management   = 0x0,
    StreamStatus = 0x1,
    StreamCmd    = 0x2,
    Control      = 0x4,
    DataNoTs     = 0x6,
    DataWithTs   = 0x7,
};

const char* pkt_type_name(PktType t);

/// 64-bit CHDR header. Wire layout (bit positions in the little-endian word):
///
///   [63:58] vc  [57] eob  [56] eov  [55:53] pkt_type
///   [52:48] num_mdata  [47:32] seq_num  [31:16] length  [15:0] dst_epid
struct ChdrHeader {
    uint8_t vc = 0;        // virtual channel, 6 bits
    bool eob = false;      // end of burst
    bool eov = false;      // end of vector
    PktType pkt_type = PktType::Management;
    uint8_t num_mdata = 0; // 64-bit metadata words after the timestamp, 5 bits
    uint16_t seq_num = 0;  // wraps modulo 2^16
    uint16_t length = 0;   // total packet bytes including this header
    uint16_t dst_epid = 0; // destination stream endpoint

    bool operator==(const ChdrHeader&) const = default;
};

uint64_t encode_header(const ChdrHeader& h); // throws FieldOverflow
ChdrHeader decode_header(uint64_t word);     // throws InvalidPktType

/// One CHDR packet. The timestamp is present iff pkt_type == DataWithTs.
/// Metadata words are preserved on decode but never generated by this
/// implementation.
struct ChdrPacket {
    ChdrHeader header;
    std::optional<uint64_t> timestamp;
    std::vector<uint8_t> mdata;
    std::vector<uint8_t> payload;

    bool operator==(const ChdrPacket&) const = default;
};

std::vector<uint8_t> encode_packet(const ChdrPacket& p);
ChdrPacket decode_packet(std::span<const uint8_t> bytes);

/// A block of baseband samples tied to the tick of its first sample.
struct SampleBlock {
    std::vector<Cf32> samples;
    uint64_t start_tick = 0;
};

/// Builds a data packet from a sample block. with_ts selects DataWithTs and
/// stamps the block's start tick.
ChdrPacket make_data_packet(const SampleBlock& block, uint16_t seq_num,
                            uint16_t dst_epid, bool with_ts, bool eob = false);

std::vector<uint8_t> encode_data_packet(const SampleBlock& block, uint16_t seq_num,
                                        uint16_t dst_epid, bool with_ts);

// sc16 wire sample format: per sample a 16-bit signed I then Q, little-endian,
// full scale 32767 with saturation.
int16_t quantize_sc16(float v);
std::vector<uint8_t> samples_to_wire(std::span<const Cf32> samples);
std::vector<Cf32> wire_to_samples(std::span<const uint8_t> bytes); // throws OddLength

inline uint16_t seq_add(uint16_t seq, uint16_t n) { return static_cast<uint16_t>(seq + n); }
inline uint16_t seq_distance(uint16_t from, uint16_t to)
{
    return static_cast<uint16_t>(to - from);
}

} // namespace chdrt

#endif
