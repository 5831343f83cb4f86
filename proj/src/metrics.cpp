#include "chdrt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "chdrt/errors.hpp"
#include "chdrt/fft.hpp"

namespace chdrt {

double percentile(std::span<const double> values, double q)
{
    if (values.empty())
        throw EmptyInput("percentile of an empty set");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    size_t rank = static_cast<size_t>(std::ceil(q / 100.0 * n));
    rank = std::clamp<size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

Histogram make_histogram(std::span<const double> values_us, double bin_width_us)
{
    if (values_us.empty())
        throw EmptyInput("histogram of an empty set");
    if (!(bin_width_us > 0))
        throw ConfigError("histogram bin width must be positive");

    Histogram h;
    h.bin_width_us = bin_width_us;
    h.total = values_us.size();
    h.min_us = *std::min_element(values_us.begin(), values_us.end());
    h.max_us = *std::max_element(values_us.begin(), values_us.end());
    h.worst_us = h.max_us;
    h.p50_us = percentile(values_us, 50.0);
    h.p99_us = percentile(values_us, 99.0);
    h.p9999_us = percentile(values_us, 99.99);

    const auto bin_of = [bin_width_us](double v) {
        return static_cast<size_t>(std::floor(v / bin_width_us));
    };
    h.first_bin = bin_of(h.min_us);
    h.counts.assign(bin_of(h.max_us) - h.first_bin + 1, 0);
    for (double v : values_us)
        h.counts[bin_of(v) - h.first_bin]++;
    return h;
}

std::string histogram_csv(const Histogram& h)
{
    std::string out = "bin_start_us,count\n";
    char line[64];
    for (size_t i = 0; i < h.counts.size(); i++) {
        const double start = static_cast<double>(h.first_bin + i) * h.bin_width_us;
        std::snprintf(line, sizeof(line), "%.6f,%llu\n", start,
                      static_cast<unsigned long long>(h.counts[i]));
        out += line;
    }
    return out;
}

A2aResult measure_a2a(std::span<const Cf32> reference, std::span<const Cf32> observed,
                      double sample_rate, double min_corr)
{
    if (reference.empty() || observed.empty())
        throw EmptyInput("delay measurement needs both signals");

    size_t n = 1;
    while (n < reference.size() + observed.size())
        n <<= 1;

    Fft<double> fft(n);
    std::vector<std::complex<double>> a(n), b(n), fa(n), fb(n);
    for (size_t i = 0; i < reference.size(); i++)
        a[i] = reference[i];
    for (size_t i = 0; i < observed.size(); i++)
        b[i] = observed[i];
    fft.forward(a, fa);
    fft.forward(b, fb);
    for (size_t k = 0; k < n; k++)
        fa[k] = fb[k] * std::conj(fa[k]);
    fft.inverse(fa, fb); // fb[lag] = sum_t observed[t] * conj(reference[t-lag])

    size_t best = 0;
    double best_mag = -1;
    for (size_t lag = 0; lag < observed.size(); lag++) {
        const double mag = std::abs(fb[lag]);
        if (mag > best_mag) {
            best_mag = mag;
            best = lag;
        }
    }

    double ref_energy = 0;
    for (const Cf32& v : reference)
        ref_energy += std::norm(std::complex<double>(v));
    double win_energy = 0;
    const size_t win_end = std::min(observed.size(), best + reference.size());
    for (size_t t = best; t < win_end; t++)
        win_energy += std::norm(std::complex<double>(observed[t]));

    const double denom = std::sqrt(ref_energy * win_energy);
    const double corr = denom > 0 ? best_mag / denom : 0.0;
    if (corr < min_corr)
        throw NoSignal("no recognizable copy of the reference in the observed signal");

    A2aResult r;
    r.delay_ticks = best;
    r.delay_us = static_cast<double>(best) * 1e6 / sample_rate;
    r.peak_corr = corr;
    return r;
}

std::vector<Cf32> estimate_channel(std::span<const Cf32> period,
                                   std::span<const Cf32> received, size_t offset,
                                   size_t n_periods, size_t taps)
{
    const size_t n = period.size();
    if (n == 0 || n_periods == 0)
        throw EmptyInput("estimation needs a period and at least one repetition");
    if (taps == 0 || taps > n)
        throw ConfigError("tap count must be in [1, period length]");
    if (offset + n_periods * n > received.size())
        throw LengthMismatch("received stream shorter than the measurement window");

    std::vector<std::complex<double>> avg(n, 0.0);
    for (size_t p = 0; p < n_periods; p++)
        for (size_t i = 0; i < n; i++)
            avg[i] += std::complex<double>(received[offset + p * n + i]);
    for (auto& v : avg)
        v /= static_cast<double>(n_periods);

    Fft<double> fft(n);
    std::vector<std::complex<double>> x(n), fx(n), fy(n);
    for (size_t i = 0; i < n; i++)
        x[i] = period[i];
    fft.forward(x, fx);
    fft.forward(avg, fy);

    double max_mag = 0;
    for (const auto& v : fx)
        max_mag = std::max(max_mag, std::abs(v));
    const double floor_mag = 1e-6 * max_mag;
    for (size_t k = 0; k < n; k++) {
        const double mag2 = std::norm(fx[k]);
        if (std::sqrt(mag2) < floor_mag)
            throw IllConditioned("excitation spectrum has a near-zero bin");
        fy[k] = fy[k] * std::conj(fx[k]) / mag2;
    }

    fft.inverse(fy, fx);
    std::vector<Cf32> h(taps);
    for (size_t i = 0; i < taps; i++)
        h[i] = Cf32(static_cast<float>(fx[i].real()), static_cast<float>(fx[i].imag()));
    return h;
}

double error_db(std::span<const Cf32> estimate, std::span<const Cf32> reference)
{
    const size_t n = std::max(estimate.size(), reference.size());
    double err = 0, ref = 0;
    for (size_t i = 0; i < n; i++) {
        const std::complex<double> a = i < estimate.size()
                                           ? std::complex<double>(estimate[i])
                                           : std::complex<double>(0);
        const std::complex<double> b = i < reference.size()
                                           ? std::complex<double>(reference[i])
                                           : std::complex<double>(0);
        err += std::norm(a - b);
        ref += std::norm(b);
    }
    if (ref == 0)
        return err == 0 ? -std::numeric_limits<double>::infinity()
                        : std::numeric_limits<double>::infinity();
    if (err == 0)
        return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(err / ref);
}

} // namespace chdrt
