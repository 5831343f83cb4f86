#ifndef CHDRT_DEVICE_HPP_
#define CHDRT_DEVICE_HPP_

#include <cstdint>
#include <map>
#include <vector>

#include "chdrt/chdr.hpp"
#include "chdrt/stream.hpp"
#include "chdrt/transport.hpp"

namespace chdrt {

struct DeviceConfig {
    double sample_rate = 100e6;
    size_t spp = 512;              // samples per Rx packet
    uint64_t capacity_bytes = 1 << 18;
    uint64_t adc_delay = 64;       // ticks from analog entry to packet-ready
    uint64_t dac_delay = 64;       // ticks from digital consumption to analog exit
    uint64_t resume_margin = 256;  // floor the device adds when confirming a resume tick
    uint32_t status_cadence = 16;  // accepted packets per ok status
    uint16_t epid = 0x0010;
    uint16_t host_epid = 0x0001;
};

/// One stretch of output starvation: playback emitted zeros for ticks
/// [start_tick, end_tick) and resumed at end_tick.
struct GapEpisode {
    uint64_t start_tick = 0;
    uint64_t end_tick = 0;
    uint64_t length() const { return end_tick - start_tick; }
};

/// Single-channel radio front end driven by a virtual sample clock.
///
/// Rx path: the analog input set via set_input enters the ADC one sample per
/// tick starting at tick 0. Once a packet's worth has been collected the
/// packet leaves for the host adc_delay ticks later, timestamped with the
/// analog-entry tick of its first sample. The final packet carries eob.
///
/// Tx path: arriving data packets must be in sequence and must arrive no
/// later than their timestamp. The DAC consumes the sample stamped t at tick
/// t and the analog output appears dac_delay ticks later. A sequence skip, a
/// late packet, or running out of samples mid-stream raises a stream error:
/// the device reports it, discards all data, and plays zeros until the
/// three-exchange halt/flush/resync handshake finishes and playback reaches
/// the confirmed resume tick. Every zero-filled stretch is recorded as a
/// GapEpisode.
class DeviceSim {
public:
    DeviceSim(DeviceConfig cfg, Link& to_host, Link& from_host);

    /// Analog signal entering the ADC at tick 0. Replaces any prior input.
    void set_input(std::vector<Cf32> samples);

    /// Runs the device up to (but not including) tick `to`.
    void advance(uint64_t to);

    uint64_t tick() const { return tick_; }
    const DeviceConfig& config() const { return cfg_; }

    /// DAC output indexed by absolute tick; unwritten ticks read as zero.
    const std::vector<Cf32>& analog_out() const { return analog_out_; }
    const std::vector<GapEpisode>& gap_episodes() const { return episodes_; }
    bool gap_open() const { return gap_open_; }

    bool in_error() const { return in_error_; }
    uint64_t resume_tick() const { return resume_tick_; }
    uint16_t expected_seq() const { return expected_seq_; }
    size_t scheduled_depth() const { return sched_.size(); }

    // counters
    uint64_t rx_packets_sent() const { return rx_packets_sent_; }
    uint64_t accepted_packets() const { return accepted_; }
    uint64_t discarded_in_error() const { return discarded_in_error_; }
    uint64_t late_packets() const { return late_packets_; }
    uint64_t seq_errors() const { return seq_errors_; }
    uint64_t error_episodes() const { return error_episodes_; }
    uint64_t statuses_sent() const { return statuses_sent_; }
    uint64_t samples_accepted() const { return samples_accepted_; }
    uint64_t samples_played() const { return samples_played_; }
    uint64_t samples_flushed() const { return samples_flushed_; }
    uint64_t zeros_played() const { return zeros_played_; }

private:
    struct ScheduledBlock {
        std::vector<Cf32> samples;
        bool eob = false;
    };

    void step(uint64_t t);
    void dispatch_inbound(uint64_t t);
    void produce_rx(uint64_t t);
    void play_out(uint64_t t);
    void on_data(const ChdrPacket& pkt, uint64_t t);
    void on_cmd(const ChdrPacket& pkt, uint64_t t);
    void enter_error(uint64_t t);
    void send_status(StatusCode code, uint64_t t);
    void send_cmd(CmdCode code, uint64_t arg0, uint64_t arg1, uint64_t t);
    void write_out(uint64_t t, Cf32 v);

    DeviceConfig cfg_;
    Link& to_host_;
    Link& from_host_;
    uint64_t tick_ = 0;

    // Rx production
    std::vector<Cf32> input_;
    size_t rx_next_t0_ = 0;
    uint16_t rx_seq_ = 0;

    // Tx playback
    std::map<uint64_t, ScheduledBlock> sched_; // keyed by first-sample tick
    std::vector<Cf32> cur_block_;
    uint64_t cur_ts_ = 0;
    bool cur_valid_ = false;
    bool cur_eob_ = false;
    bool tx_active_ = false;
    bool tx_started_ = false;
    bool playback_started_ = false;
    uint16_t expected_seq_ = 0;

    // error / recovery
    bool in_error_ = false;
    int stage_ = 0; // 1 after error, 2 after halt, 3 after flush
    bool awaiting_resume_ = false;
    uint64_t resume_tick_ = 0;
    bool gap_open_ = false;
    uint64_t gap_start_ = 0;
    std::vector<GapEpisode> episodes_;

    // flow-control bookkeeping
    uint64_t acked_bytes_ = 0;
    uint32_t accepted_since_status_ = 0;
    uint16_t ctrl_seq_ = 0;

    std::vector<Cf32> analog_out_;

    uint64_t rx_packets_sent_ = 0;
    uint64_t accepted_ = 0;
    uint64_t discarded_in_error_ = 0;
    uint64_t late_packets_ = 0;
    uint64_t seq_errors_ = 0;
    uint64_t error_episodes_ = 0;
    uint64_t statuses_sent_ = 0;
    uint64_t samples_accepted_ = 0;
    uint64_t samples_played_ = 0;
    uint64_t samples_flushed_ = 0;
    uint64_t zeros_played_ = 0;
    uint64_t misaddressed_ = 0;
    uint64_t unexpected_drops_ = 0;
};

} // namespace chdrt

#endif
