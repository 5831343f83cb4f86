#include "chdrt/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace chdrt {

namespace {

// FFTW plan creation is not thread-safe; execution is.
std::mutex& plan_mutex()
{
    static std::mutex m;
    return m;
}

template <typename Real>
struct FftwApi;

template <>
struct FftwApi<double> {
    using complex = fftw_complex;
    using plan = fftw_plan;
    static void* malloc(size_t n) { return fftw_malloc(n); }
    static void free(void* p) { fftw_free(p); }
    static plan plan_dft(int n, complex* in, complex* out, int sign)
    {
        return fftw_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE);
    }
    static void destroy(plan p) { fftw_destroy_plan(p); }
    static void execute(plan p) { fftw_execute(p); }
};

template <>
struct FftwApi<float> {
    using complex = fftwf_complex;
    using plan = fftwf_plan;
    static void* malloc(size_t n) { return fftwf_malloc(n); }
    static void free(void* p) { fftwf_free(p); }
    static plan plan_dft(int n, complex* in, complex* out, int sign)
    {
        return fftwf_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE);
    }
    static void destroy(plan p) { fftwf_destroy_plan(p); }
    static void execute(plan p) { fftwf_execute(p); }
};

} // namespace

template <typename Real>
struct Fft<Real>::Impl {
    using Api = FftwApi<Real>;
    typename Api::complex* buf_in = nullptr;
    typename Api::complex* buf_out = nullptr;
    typename Api::plan fwd{};
    typename Api::plan inv{};

    explicit Impl(size_t n)
    {
        if (n == 0)
            throw std::invalid_argument("fft size must be nonzero");
        buf_in = static_cast<typename Api::complex*>(
            Api::malloc(sizeof(typename Api::complex) * n));
        buf_out = static_cast<typename Api::complex*>(
            Api::malloc(sizeof(typename Api::complex) * n));
        if (!buf_in || !buf_out)
            throw std::bad_alloc();
        std::lock_guard<std::mutex> lock(plan_mutex());
        fwd = Api::plan_dft(static_cast<int>(n), buf_in, buf_out, FFTW_FORWARD);
        inv = Api::plan_dft(static_cast<int>(n), buf_in, buf_out, FFTW_BACKWARD);
    }

    ~Impl()
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        if (fwd)
            Api::destroy(fwd);
        if (inv)
            Api::destroy(inv);
        Api::free(buf_in);
        Api::free(buf_out);
    }
};

template <typename Real>
Fft<Real>::Fft(size_t n)
    : n_(n)
    , impl_(std::make_unique<Impl>(n))
{
}

template <typename Real>
Fft<Real>::~Fft() = default;

template <typename Real>
Fft<Real>::Fft(Fft&&) noexcept = default;

template <typename Real>
Fft<Real>& Fft<Real>::operator=(Fft&&) noexcept = default;

template <typename Real>
void Fft<Real>::forward(std::span<const Complex> in, std::span<Complex> out)
{
    // std::complex<Real> is layout-compatible with Real[2], the FFTW type
    std::memcpy(impl_->buf_in, in.data(), sizeof(Complex) * n_);
    FftwApi<Real>::execute(impl_->fwd);
    std::memcpy(static_cast<void*>(out.data()), impl_->buf_out, sizeof(Complex) * n_);
}

template <typename Real>
void Fft<Real>::inverse(std::span<const Complex> in, std::span<Complex> out)
{
    std::memcpy(impl_->buf_in, in.data(), sizeof(Complex) * n_);
    FftwApi<Real>::execute(impl_->inv);
    const Real scale = Real(1) / static_cast<Real>(n_);
    const auto* o = reinterpret_cast<const Complex*>(impl_->buf_out);
    for (size_t i = 0; i < n_; i++)
        out[i] = o[i] * scale;
}

template class Fft<float>;
template class Fft<double>;

} // namespace chdrt
