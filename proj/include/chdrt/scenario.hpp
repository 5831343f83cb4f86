#ifndef CHDRT_SCENARIO_HPP_
#define CHDRT_SCENARIO_HPP_

#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chdrt/cir.hpp"
#include "chdrt/device.hpp"
#include "chdrt/metrics.hpp"
#include "chdrt/stream.hpp"
#include "chdrt/transport.hpp"
#include "chdrt/upols.hpp"
#include "chdrt/util.hpp"

namespace chdrt {

enum class Mode {
    PassThrough,  // host returns received blocks unchanged
    LtiEmulation, // host convolves received blocks with the channel matrix
};

const char* mode_name(Mode m);

/// One closed-loop experiment: per port, a device digitizes a known analog
/// excitation, the host processes each block and schedules it for replay, and
/// the device's analog output is compared against the latency model and the
/// channel it was meant to apply.
struct ScenarioConfig {
    Mode mode = Mode::LtiEmulation;
    double sample_rate = 100e6;
    size_t spp = 512;   // Rx samples per packet; also the convolution block
    size_t n_ports = 1; // one device (one Rx + one Tx stream) per port
    size_t cir_taps = 512;
    std::string cir_file; // overrides the generated channel when set
    uint64_t seed = 1;

    uint64_t transport_latency = 256; // ticks, each direction
    uint64_t transport_jitter = 0;    // extra ticks, uniform
    uint64_t processing_ticks = 128;  // host budget per block
    uint64_t lead_margin = 256;
    uint64_t adc_delay = 64;
    uint64_t dac_delay = 64;
    uint64_t capacity_bytes = 1 << 18;
    uint32_t status_cadence = 16;
    size_t sounding_periods = 2; // averaged excitation periods per port
    size_t payload_blocks = 0;   // extra QPSK stream body after the sounding

    /// Holds the given host-processed block ordinal for late_delay_ticks
    /// extra ticks, making its packet miss its deadline at the device.
    std::optional<uint64_t> late_block;
    uint64_t late_delay_ticks = 0;

    double bin_width_us = 0.087;
    std::string capture_file; // when set, every host-side packet is recorded

    void validate() const; // throws ConfigError
    LatencyModel model() const;
};

/// Where each part of the generated excitation sits, in ticks from stream
/// start. Everything is aligned to spp so emulation blocks line up with
/// packets. Per port: a staggered QPSK preamble (delay measurement), then a
/// staggered run of Zadoff-Chu periods (channel sounding; the first period
/// settles the channel memory, the rest are averaged).
struct ExcitationLayout {
    size_t preamble_len = 0;
    size_t guard = 0;
    size_t zc_period = 0;
    size_t zc_settle = 1;
    size_t zc_measure = 2;
    size_t payload_offset = 0;
    size_t payload_len = 0;
    size_t total_len = 0;
    std::vector<size_t> preamble_offset;
    std::vector<size_t> sounding_offset; // start of the settle period
};

/// Even-length Zadoff-Chu sequence (root 1): x[k] = exp(-i pi k^2 / n).
/// Constant amplitude, zero circular autocorrelation, flat spectrum.
std::vector<Cf32> zadoff_chu(size_t n);

ExcitationLayout plan_excitation(const ScenarioConfig& cfg);
std::vector<std::vector<Cf32>> build_excitation(const ExcitationLayout& layout,
                                                size_t n_ports, Rng& rng);

/// Random channel matrix: complex-gaussian taps with a gentle power decay.
CirMatrix make_random_cir(Rng& rng, size_t n_out, size_t n_in, size_t taps);

/// Globally rescales the matrix so that no component of any port's convolved
/// output exceeds target_peak for the given per-port excitations; keeps the
/// sc16 quantizer out of saturation.
void scale_cir_to_peak(CirMatrix& cirs, const std::vector<std::vector<Cf32>>& excitations,
                       float target_peak = 0.7f);

struct ScenarioReport {
    Mode mode = Mode::LtiEmulation;
    double sample_rate = 100e6;
    size_t spp = 0;
    size_t n_ports = 0;
    LatencyModel model;
    double predicted_a2a_us = 0;
    double rtt_us = 0;

    std::vector<std::vector<std::optional<A2aResult>>> a2a; // [out][in]
    double a2a_model_dev_ticks = 0; // worst |measured - predicted| over pairs
    uint64_t rx_cadence_ticks = 0;  // common Rx packet spacing, 0 if irregular

    std::vector<std::vector<double>> est_err_db; // [out][in], NaN if not run
    double worst_est_err_db = 0;

    Histogram host_latency; // per block: ticks from analog entry to Tx-ready

    uint64_t rx_packets = 0;
    uint64_t tx_packets = 0;
    uint64_t statuses = 0;
    uint64_t recovery_episodes = 0;
    uint64_t recovery_requests = 0;
    uint64_t stale_blocks_dropped = 0;
    std::vector<GapEpisode> gaps; // all ports
    double gap_max_us = 0;
    double gap_total_us = 0;
    uint64_t samples_played = 0;
    uint64_t zeros_played = 0;
    uint64_t transforms_per_block = 0; // emulation mode only
};

/// Deterministic `metric,value,unit` rows; byte-identical for identical
/// (config, seed).
std::string report_csv(const ScenarioReport& r);
/// Human-readable summary of the same numbers.
std::string report_text(const ScenarioReport& r);

class ScenarioRunner {
public:
    explicit ScenarioRunner(ScenarioConfig cfg);

    ScenarioReport run();

    // introspection for tests and tooling
    const ScenarioConfig& config() const { return cfg_; }
    const LatencyModel& model() const { return model_; }
    const ExcitationLayout& layout() const { return layout_; }
    const std::vector<std::vector<Cf32>>& excitation() const { return excitation_; }
    const CirMatrix& cir() const { return cir_; }
    DeviceSim& device(size_t i) { return *devices_[i]; }
    TxStreamEngine& engine(size_t i) { return engines_[i]; }
    uint64_t horizon() const { return horizon_; }

private:
    struct PairSlot {
        std::vector<std::vector<Cf32>> in;
        std::vector<bool> present;
        size_t have = 0;
        bool eob = false;
    };
    struct PendingSubmit {
        uint64_t ready = 0;
        SampleBlock block;
        bool eob = false;
    };

    void host_step(uint64_t t);
    void on_rx_block(size_t port, SampleBlock block, bool eob, uint64_t t);
    void process_slot(uint64_t t0, PairSlot& slot, uint64_t t);
    void pump_submissions(size_t port, uint64_t t);
    void send_to_device(size_t port, const ChdrPacket& pkt, uint64_t t);
    void record(uint8_t dir, uint8_t port, uint64_t t, const std::vector<uint8_t>& bytes);
    ScenarioReport finalize();

    ScenarioConfig cfg_;
    LatencyModel model_;
    ExcitationLayout layout_;
    std::vector<std::vector<Cf32>> excitation_; // per port analog input
    CirMatrix cir_;

    std::vector<std::unique_ptr<SimLink>> to_host_;   // device -> host
    std::vector<std::unique_ptr<SimLink>> to_device_; // host -> device
    std::vector<std::unique_ptr<DeviceSim>> devices_;
    std::vector<TxStreamEngine> engines_;
    std::vector<RxStream> rx_streams_;
    std::unique_ptr<MimoEmulator<float>> emulator_;

    std::map<uint64_t, PairSlot> pairing_; // keyed by block start tick
    std::vector<std::deque<PendingSubmit>> submit_q_;
    std::vector<double> latencies_us_;
    std::vector<uint64_t> rx_arrivals_port0_;
    uint64_t processed_blocks_ = 0;
    uint64_t rx_packets_ = 0;
    uint64_t stale_dropped_ = 0;
    uint64_t horizon_ = 0;
    std::ofstream capture_;
};

// Capture file layout: the magic "CHDRCAP1", then per packet a fixed
// 16-byte record header (u64 host tick, u8 direction 0=to-host 1=to-device,
// u8 port, u16 zero, u32 payload length) followed by the raw packet bytes.
// All fields little-endian.
inline constexpr char kCaptureMagic[8] = { 'C', 'H', 'D', 'R', 'C', 'A', 'P', '1' };

} // namespace chdrt

#endif
