#include "chdrt/chdr.hpp"

#include <cmath>

#include "chdrt/util.hpp"

namespace chdrt {

namespace {

constexpr uint64_t kVcShift = 58;
constexpr uint64_t kEobShift = 57;
constexpr uint64_t kEovShift = 56;
constexpr uint64_t kTypeShift = 53;
constexpr uint64_t kMdataShift = 48;
constexpr uint64_t kSeqShift = 32;
constexpr uint64_t kLenShift = 16;

bool valid_pkt_type(uint8_t code)
{
    switch (code) {
    case 0x0:
    case 0x1:
    case 0x2:
    case 0x4:
    case 0x6:
    case 0x7:
        return true;
    default:
        return false;
    }
}

} // namespace

const char* pkt_type_name(PktType t)
{
    switch (t) {
    case PktType::Management:   return "Management";
    case PktType::StreamStatus: return "StreamStatus";
    case PktType::StreamCmd:    return "StreamCmd";
    case PktType::Control:      return "Control";
    case PktType::DataNoTs:     return "DataNoTs";
    case PktType::DataWithTs:   return "DataWithTs";
    }
    return "?";
}

uint64_t encode_header(const ChdrHeader& h)
{
    if (h.vc > 0x3F)
        throw FieldOverflow("vc exceeds 6 bits");
    if (h.num_mdata > 0x1F)
        throw FieldOverflow("num_mdata exceeds 5 bits");

    uint64_t w = 0;
    w |= static_cast<uint64_t>(h.vc) << kVcShift;
    w |= static_cast<uint64_t>(h.eob ? 1 : 0) << kEobShift;
    w |= static_cast<uint64_t>(h.eov ? 1 : 0) << kEovShift;
    w |= static_cast<uint64_t>(h.pkt_type) << kTypeShift;
    w |= static_cast<uint64_t>(h.num_mdata) << kMdataShift;
    w |= static_cast<uint64_t>(h.seq_num) << kSeqShift;
    w |= static_cast<uint64_t>(h.length) << kLenShift;
    w |= static_cast<uint64_t>(h.dst_epid);
    return w;
}

ChdrHeader decode_header(uint64_t word)
{
    const uint8_t type_code = (word >> kTypeShift) & 0x7;
    if (!valid_pkt_type(type_code))
        throw InvalidPktType("unassigned pkt_type code " + std::to_string(type_code));

    ChdrHeader h;
    h.vc = (word >> kVcShift) & 0x3F;
    h.eob = (word >> kEobShift) & 0x1;
    h.eov = (word >> kEovShift) & 0x1;
    h.pkt_type = static_cast<PktType>(type_code);
    h.num_mdata = (word >> kMdataShift) & 0x1F;
    h.seq_num = static_cast<uint16_t>((word >> kSeqShift) & 0xFFFF);
    h.length = static_cast<uint16_t>((word >> kLenShift) & 0xFFFF);
    h.dst_epid = static_cast<uint16_t>(word & 0xFFFF);
    return h;
}

std::vector<uint8_t> encode_packet(const ChdrPacket& p)
{
    const bool with_ts = p.header.pkt_type == PktType::DataWithTs;
    if (with_ts != p.timestamp.has_value())
        throw LengthMismatch("timestamp presence does not match pkt_type");
    if (p.mdata.size() != static_cast<size_t>(p.header.num_mdata) * 8)
        throw LengthMismatch("mdata byte count does not match num_mdata");

    const size_t total = 8 + (with_ts ? 8 : 0) + p.mdata.size() + p.payload.size();
    if (total > 0xFFFF)
        throw FieldOverflow("packet length exceeds 16 bits");
    if (p.header.length != total)
        throw LengthMismatch("header.length inconsistent with packet contents");

    std::vector<uint8_t> buf;
    buf.reserve(total);
    put_le64(buf, encode_header(p.header));
    if (with_ts)
        put_le64(buf, *p.timestamp);
    buf.insert(buf.end(), p.mdata.begin(), p.mdata.end());
    buf.insert(buf.end(), p.payload.begin(), p.payload.end());
    return buf;
}

ChdrPacket decode_packet(std::span<const uint8_t> bytes)
{
    if (bytes.size() < 8)
        throw LengthMismatch("buffer shorter than a CHDR header");

    ChdrPacket p;
    p.header = decode_header(get_le64(bytes.data()));
    if (p.header.length != bytes.size())
        throw LengthMismatch("buffer size " + std::to_string(bytes.size()) +
                             " does not match header.length " +
                             std::to_string(p.header.length));

    size_t off = 8;
    if (p.header.pkt_type == PktType::DataWithTs) {
        if (bytes.size() < off + 8)
            throw LengthMismatch("packet too short for timestamp");
        p.timestamp = get_le64(bytes.data() + off);
        off += 8;
    }
    const size_t mdata_bytes = static_cast<size_t>(p.header.num_mdata) * 8;
    if (bytes.size() < off + mdata_bytes)
        throw LengthMismatch("packet too short for metadata");
    p.mdata.assign(bytes.begin() + off, bytes.begin() + off + mdata_bytes);
    off += mdata_bytes;
    p.payload.assign(bytes.begin() + off, bytes.end());
    return p;
}

ChdrPacket make_data_packet(const SampleBlock& block, uint16_t seq_num,
                            uint16_t dst_epid, bool with_ts, bool eob)
{
    if (block.samples.empty())
        throw EmptyInput("data packet needs at least one sample");

    ChdrPacket p;
    p.payload = samples_to_wire(block.samples);
    const size_t total = 8 + (with_ts ? 8 : 0) + p.payload.size();
    if (total > 0xFFFF)
        throw FieldOverflow("sample count makes length exceed 16 bits");

    p.header.pkt_type = with_ts ? PktType::DataWithTs : PktType::DataNoTs;
    p.header.seq_num = seq_num;
    p.header.length = static_cast<uint16_t>(total);
    p.header.dst_epid = dst_epid;
    p.header.eob = eob;
    if (with_ts)
        p.timestamp = block.start_tick;
    return p;
}

std::vector<uint8_t> encode_data_packet(const SampleBlock& block, uint16_t seq_num,
                                        uint16_t dst_epid, bool with_ts)
{
    return encode_packet(make_data_packet(block, seq_num, dst_epid, with_ts));
}

int16_t quantize_sc16(float v)
{
    long q = std::lround(static_cast<double>(v) * 32767.0);
    if (q > 32767)
        q = 32767;
    if (q < -32768)
        q = -32768;
    return static_cast<int16_t>(q);
}

std::vector<uint8_t> samples_to_wire(std::span<const Cf32> samples)
{
    std::vector<uint8_t> buf;
    buf.reserve(samples.size() * 4);
    for (const auto& s : samples) {
        put_le16(buf, static_cast<uint16_t>(quantize_sc16(s.real())));
        put_le16(buf, static_cast<uint16_t>(quantize_sc16(s.imag())));
    }
    return buf;
}

std::vector<Cf32> wire_to_samples(std::span<const uint8_t> bytes)
{
    if (bytes.size() % 4 != 0)
        throw OddLength("sc16 payload size " + std::to_string(bytes.size()) +
                        " is not a multiple of 4");
    std::vector<Cf32> out;
    out.reserve(bytes.size() / 4);
    for (size_t i = 0; i < bytes.size(); i += 4) {
        const auto re = static_cast<int16_t>(get_le16(bytes.data() + i));
        const auto im = static_cast<int16_t>(get_le16(bytes.data() + i + 2));
        out.emplace_back(static_cast<float>(re) / 32767.0f,
                         static_cast<float>(im) / 32767.0f);
    }
    return out;
}

} // namespace chdrt
