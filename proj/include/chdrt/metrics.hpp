#ifndef CHDRT_METRICS_HPP_
#define CHDRT_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chdrt/chdr.hpp"

namespace chdrt {

/// Additive latency budget in ticks. host_delta() is the stamp the host adds
/// to a received block's timestamp when scheduling its transmission;
/// analog_to_analog() extends it to the DAC output and equals the end-to-end
/// delay an external observer measures between the two analog ports.
struct LatencyModel {
    uint64_t packetization = 512; // ticks to fill one Rx packet (= spp)
    uint64_t adc_delay = 64;
    uint64_t transport_rx = 256;  // device -> host
    uint64_t processing = 128;    // host budget per block
    uint64_t transport_tx = 256;  // host -> device
    uint64_t lead_margin = 256;   // scheduling headroom at the device
    uint64_t dac_delay = 64;

    uint64_t host_delta() const
    {
        return packetization + adc_delay + transport_rx + processing + transport_tx +
               lead_margin;
    }
    uint64_t analog_to_analog() const { return host_delta() + dac_delay; }
};

// ---------------------------------------------------------------------------
// Latency histogram
// ---------------------------------------------------------------------------

/// Fixed-width histogram over microsecond values with nearest-rank
/// percentiles. Bin b covers [b*width, (b+1)*width).
struct Histogram {
    double bin_width_us = 0.087;
    size_t first_bin = 0;                // index of the first emitted bin
    std::vector<uint64_t> counts;        // bins first_bin .. first_bin+size-1
    uint64_t total = 0;
    double min_us = 0, max_us = 0;
    double p50_us = 0, p99_us = 0, p9999_us = 0, worst_us = 0;
};

/// Builds the histogram. Throws EmptyInput when values is empty and
/// ConfigError on a non-positive bin width.
Histogram make_histogram(std::span<const double> values_us, double bin_width_us = 0.087);

/// Nearest-rank percentile (q in percent) over the given values.
double percentile(std::span<const double> values, double q);

/// CSV rows `bin_start_us,count`, covering the contiguous bin range from the
/// first to the last populated bin (interior zero bins included).
std::string histogram_csv(const Histogram& h);

// ---------------------------------------------------------------------------
// Delay measurement and channel estimation
// ---------------------------------------------------------------------------

struct A2aResult {
    uint64_t delay_ticks = 0;
    double delay_us = 0;
    double peak_corr = 0; // normalized cross-correlation at the peak, in [0,1]
};

/// Finds the lag that best aligns `reference` inside `observed` by FFT
/// cross-correlation over non-negative lags. Throws NoSignal when the
/// normalized peak falls below `min_corr` (no recognizable copy present).
A2aResult measure_a2a(std::span<const Cf32> reference, std::span<const Cf32> observed,
                      double sample_rate, double min_corr = 0.05);

/// Recovers `taps` leading taps of a channel from its response to a periodic
/// excitation by circular deconvolution: H = FFT(y_avg) * conj(X) / |X|^2.
///
/// `period` is one excitation period (length N), `received` the observed
/// stream, `offset` the sample index in `received` where an excitation period
/// boundary lands (alignment comes from the latency model, not from the
/// data). `n_periods` consecutive periods starting there are averaged.
/// Throws LengthMismatch when `received` is too short and IllConditioned when
/// the excitation spectrum has near-zero bins.
std::vector<Cf32> estimate_channel(std::span<const Cf32> period,
                                   std::span<const Cf32> received, size_t offset,
                                   size_t n_periods, size_t taps);

/// Relative error energy in dB: 10*log10(sum|a-b|^2 / sum|b|^2), with b the
/// reference. Returns -inf for an exact match.
double error_db(std::span<const Cf32> estimate, std::span<const Cf32> reference);

} // namespace chdrt

#endif
