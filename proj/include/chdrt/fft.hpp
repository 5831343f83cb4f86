#ifndef CHDRT_FFT_HPP_
#define CHDRT_FFT_HPP_

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace chdrt {

/// Complex 1-D FFT of a fixed length, backed by FFTW. Each instance owns its
/// transform buffers; instances are single-owner like everything else in the
/// processing path. Plans use FFTW_ESTIMATE so the chosen algorithm (and with
/// it the exact floating-point result) is stable from run to run.
template <typename Real>
class Fft {
public:
    using Complex = std::complex<Real>;

    explicit Fft(size_t n);
    ~Fft();

    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
    Fft(Fft&&) noexcept;
    Fft& operator=(Fft&&) noexcept;

    size_t size() const { return n_; }

    void forward(std::span<const Complex> in, std::span<Complex> out);
    /// Inverse transform scaled by 1/N.
    void inverse(std::span<const Complex> in, std::span<Complex> out);

private:
    struct Impl;
    size_t n_ = 0;
    std::unique_ptr<Impl> impl_;
};

extern template class Fft<float>;
extern template class Fft<double>;

} // namespace chdrt

#endif
