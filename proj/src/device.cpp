#include "chdrt/device.hpp"

#include <algorithm>

namespace chdrt {

DeviceSim::DeviceSim(DeviceConfig cfg, Link& to_host, Link& from_host)
    : cfg_(cfg)
    , to_host_(to_host)
    , from_host_(from_host)
{
    if (cfg_.spp == 0)
        throw ConfigError("spp must be nonzero");
    if (cfg_.status_cadence == 0)
        throw ConfigError("status cadence must be nonzero");
}

void DeviceSim::set_input(std::vector<Cf32> samples)
{
    input_ = std::move(samples);
    rx_next_t0_ = 0;
    rx_seq_ = 0;
}

void DeviceSim::advance(uint64_t to)
{
    for (uint64_t t = tick_; t < to; t++)
        step(t);
    tick_ = std::max(tick_, to);
}

void DeviceSim::step(uint64_t t)
{
    dispatch_inbound(t);
    produce_rx(t);
    play_out(t);
}

void DeviceSim::dispatch_inbound(uint64_t t)
{
    while (auto bytes = from_host_.poll(t)) {
        ChdrPacket pkt = decode_packet(*bytes);
        if (pkt.header.dst_epid != cfg_.epid) {
            misaddressed_++;
            continue;
        }
        switch (pkt.header.pkt_type) {
        case PktType::DataWithTs:
        case PktType::DataNoTs:
            on_data(pkt, t);
            break;
        case PktType::StreamCmd:
            on_cmd(pkt, t);
            break;
        default:
            // management / control traffic is outside this device's scope
            break;
        }
    }
}

void DeviceSim::produce_rx(uint64_t t)
{
    if (rx_next_t0_ >= input_.size())
        return;
    const size_t count = std::min(cfg_.spp, input_.size() - rx_next_t0_);
    // the packet is ready once its last sample has cleared the ADC pipeline
    if (t != rx_next_t0_ + count + cfg_.adc_delay)
        return;

    SampleBlock block;
    block.start_tick = rx_next_t0_;
    block.samples.assign(input_.begin() + static_cast<ptrdiff_t>(rx_next_t0_),
                         input_.begin() + static_cast<ptrdiff_t>(rx_next_t0_ + count));
    const bool eob = rx_next_t0_ + count == input_.size();
    ChdrPacket pkt = make_data_packet(block, rx_seq_, cfg_.host_epid, true, eob);
    to_host_.send(encode_packet(pkt), t);
    rx_seq_ = seq_add(rx_seq_, 1);
    rx_next_t0_ += count;
    rx_packets_sent_++;
}

void DeviceSim::on_data(const ChdrPacket& pkt, uint64_t t)
{
    if (in_error_) {
        discarded_in_error_++;
        return;
    }
    if (!pkt.timestamp) {
        // playback needs a timestamp; silently dropping would hide the bug
        unexpected_drops_++;
        return;
    }
    const uint16_t seq = pkt.header.seq_num;
    if (seq != expected_seq_) {
        seq_errors_++;
        enter_error(t);
        return;
    }
    const uint64_t ts = *pkt.timestamp;
    if (t > ts) {
        late_packets_++;
        enter_error(t);
        return;
    }

    ScheduledBlock sb;
    sb.samples = wire_to_samples(pkt.payload);
    sb.eob = pkt.header.eob;
    samples_accepted_ += sb.samples.size();
    sched_.emplace(ts, std::move(sb));

    tx_started_ = true;
    tx_active_ = true;
    expected_seq_ = seq_add(seq, 1);
    accepted_++;
    acked_bytes_ += pkt.header.length;
    accepted_since_status_++;
    if (accepted_since_status_ >= cfg_.status_cadence) {
        accepted_since_status_ = 0;
        send_status(StatusCode::Ok, t);
    }
}

void DeviceSim::on_cmd(const ChdrPacket& pkt, uint64_t t)
{
    const StreamCmd cmd = parse_cmd(pkt);
    if (is_cmd_response(cmd.code))
        throw ProtocolViolation("response code in a host-to-device command");

    switch (cmd.code) {
    case CmdCode::HaltReq:
        if (!in_error_ || stage_ != 1)
            throw ProtocolViolation("halt request outside an open error");
        stage_ = 2;
        send_cmd(CmdCode::HaltAck, 0, 0, t);
        break;
    case CmdCode::FlushReq: {
        if (!in_error_ || stage_ != 2)
            throw ProtocolViolation("flush request before halt completed");
        for (const auto& [ts, sb] : sched_)
            samples_flushed_ += sb.samples.size();
        sched_.clear();
        if (cur_valid_ && t >= cur_ts_ && t < cur_ts_ + cur_block_.size())
            samples_flushed_ += cur_ts_ + cur_block_.size() - t;
        cur_valid_ = false;
        stage_ = 3;
        send_cmd(CmdCode::FlushAck, 0, 0, t);
        break;
    }
    case CmdCode::ResyncReq: {
        if (!in_error_ || stage_ != 3)
            throw ProtocolViolation("resync request before flush completed");
        const uint64_t resume = std::max(cmd.arg1, t + cfg_.resume_margin);
        expected_seq_ = static_cast<uint16_t>(cmd.arg0);
        acked_bytes_ = 0;
        accepted_since_status_ = 0;
        in_error_ = false;
        stage_ = 0;
        awaiting_resume_ = true;
        resume_tick_ = resume;
        send_cmd(CmdCode::ResyncAck, cmd.arg0, resume, t);
        break;
    }
    default:
        throw ProtocolViolation("unknown command code");
    }
}

void DeviceSim::play_out(uint64_t t)
{
    if (!tx_active_)
        return;

    if (!cur_valid_ || t >= cur_ts_ + cur_block_.size()) {
        cur_valid_ = false;
        auto it = sched_.find(t);
        if (it != sched_.end()) {
            cur_block_ = std::move(it->second.samples);
            cur_ts_ = t;
            cur_eob_ = it->second.eob;
            cur_valid_ = true;
            sched_.erase(it);
        }
    }

    if (cur_valid_ && t >= cur_ts_) {
        const Cf32 s = cur_block_[t - cur_ts_];
        write_out(t, s);
        samples_played_++;
        playback_started_ = true;
        if (gap_open_) {
            episodes_.push_back({ gap_start_, t });
            gap_open_ = false;
        }
        awaiting_resume_ = false;
        if (t + 1 == cur_ts_ + cur_block_.size() && cur_eob_) {
            tx_active_ = false; // burst finished cleanly
            cur_valid_ = false;
        }
        return;
    }

    if (!playback_started_)
        return; // stream has not begun; the DAC is still idle, not starved

    write_out(t, Cf32(0));
    zeros_played_++;
    if (!gap_open_) {
        gap_open_ = true;
        gap_start_ = t;
    }
    if (!in_error_ && !awaiting_resume_)
        enter_error(t); // underrun discovered at the DAC
}

void DeviceSim::enter_error(uint64_t t)
{
    if (in_error_)
        return;
    in_error_ = true;
    stage_ = 1;
    error_episodes_++;
    send_status(StatusCode::SeqError, t);
}

void DeviceSim::send_status(StatusCode code, uint64_t t)
{
    StreamStatus s;
    s.status = code;
    s.acked_bytes = acked_bytes_;
    s.capacity_bytes = cfg_.capacity_bytes;
    to_host_.send(encode_packet(make_status_packet(s, ctrl_seq_, cfg_.host_epid)), t);
    ctrl_seq_ = seq_add(ctrl_seq_, 1);
    statuses_sent_++;
}

void DeviceSim::send_cmd(CmdCode code, uint64_t arg0, uint64_t arg1, uint64_t t)
{
    StreamCmd c;
    c.code = code;
    c.arg0 = arg0;
    c.arg1 = arg1;
    to_host_.send(encode_packet(make_cmd_packet(c, ctrl_seq_, cfg_.host_epid)), t);
    ctrl_seq_ = seq_add(ctrl_seq_, 1);
}

void DeviceSim::write_out(uint64_t t, Cf32 v)
{
    const uint64_t idx = t + cfg_.dac_delay;
    if (analog_out_.size() <= idx)
        analog_out_.resize(idx + 1, Cf32(0));
    analog_out_[idx] = v;
}

} // namespace chdrt
