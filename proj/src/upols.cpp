#include "chdrt/upols.hpp"

#include <algorithm>

namespace chdrt {

template <typename Real>
PartitionedFilter<Real> PartitionedFilter<Real>::partition(std::span<const Complex> h,
                                                           size_t block_len,
                                                           Fft<Real>& fft)
{
    if (h.empty())
        throw BlockSizeMismatch("impulse response must have at least one tap");
    if (block_len == 0)
        throw BlockSizeMismatch("block length must be nonzero");
    if (fft.size() != 2 * block_len)
        throw BlockSizeMismatch("fft length must be twice the block length");

    PartitionedFilter<Real> f;
    f.block_len = block_len;
    f.partitions = (h.size() + block_len - 1) / block_len;
    f.source.assign(h.begin(), h.end());
    f.spectra.resize(f.partitions);

    std::vector<Complex> padded(2 * block_len);
    for (size_t p = 0; p < f.partitions; p++) {
        std::fill(padded.begin(), padded.end(), Complex(0));
        const size_t begin = p * block_len;
        const size_t count = std::min(block_len, h.size() - begin);
        std::copy_n(h.begin() + begin, count, padded.begin());
        f.spectra[p].resize(2 * block_len);
        fft.forward(padded, f.spectra[p]);
    }
    return f;
}

template <typename Real>
Fdl<Real>::Fdl(size_t depth, size_t fft_len)
    : slots_(depth, std::vector<Complex>(fft_len, Complex(0)))
{
}

template <typename Real>
void Fdl<Real>::push(std::span<const Complex> spectrum)
{
    write_ = (write_ + 1) % slots_.size();
    std::copy(spectrum.begin(), spectrum.end(), slots_[write_].begin());
}

template <typename Real>
const std::vector<std::complex<Real>>& Fdl<Real>::slot(size_t p) const
{
    return slots_[(write_ + slots_.size() - (p % slots_.size())) % slots_.size()];
}

template <typename Real>
void Fdl<Real>::grow(size_t new_depth)
{
    if (new_depth <= slots_.size())
        return;
    const size_t fft_len = slots_.front().size();
    std::vector<std::vector<Complex>> grown(new_depth,
                                            std::vector<Complex>(fft_len, Complex(0)));
    // keep known history; blocks older than the previous depth read as silence
    for (size_t p = 0; p < slots_.size(); p++)
        grown[(new_depth - p) % new_depth] = slot(p);
    slots_ = std::move(grown);
    write_ = 0;
}

// ---------------------------------------------------------------------------
// SISO convolver
// ---------------------------------------------------------------------------

template <typename Real>
UpolsConvolver<Real>::UpolsConvolver(std::span<const Complex> h, size_t block_len)
    : block_len_(block_len)
    , fft_(2 * block_len)
    , filter_(PartitionedFilter<Real>::partition(h, block_len, fft_))
    , fdl_(filter_.partitions, 2 * block_len)
    , window_(2 * block_len, Complex(0))
    , spectrum_(2 * block_len)
    , acc_(2 * block_len)
    , time_out_(2 * block_len)
{
}

template <typename Real>
UpolsConvolver<Real>::~UpolsConvolver()
{
    delete pending_.exchange(nullptr, std::memory_order_acq_rel);
}

template <typename Real>
void UpolsConvolver<Real>::set_filter(std::span<const Complex> h)
{
    // partition with a private transform so the processing context's FFT
    // buffers are never touched from here
    Fft<Real> fft(2 * block_len_);
    auto* staged = new PartitionedFilter<Real>(
        PartitionedFilter<Real>::partition(h, block_len_, fft));
    delete pending_.exchange(staged, std::memory_order_acq_rel);
}

template <typename Real>
void UpolsConvolver<Real>::adopt_pending()
{
    PartitionedFilter<Real>* staged = pending_.exchange(nullptr, std::memory_order_acq_rel);
    if (!staged)
        return;
    if (staged->partitions > fdl_.depth())
        fdl_.grow(staged->partitions);
    filter_ = std::move(*staged);
    delete staged;
}

template <typename Real>
void UpolsConvolver<Real>::process(std::span<const Complex> in, std::span<Complex> out)
{
    if (in.size() != block_len_ || out.size() != block_len_)
        throw BlockSizeMismatch("process expects exactly one block of samples");

    adopt_pending();

    const size_t n = 2 * block_len_;
    std::copy(window_.begin() + block_len_, window_.end(), window_.begin());
    std::copy(in.begin(), in.end(), window_.begin() + block_len_);

    fft_.forward(window_, spectrum_);
    transforms_++;
    fdl_.push(spectrum_);

    std::fill(acc_.begin(), acc_.end(), Complex(0));
    for (size_t p = 0; p < filter_.partitions; p++) {
        const auto& x = fdl_.slot(p);
        const auto& hp = filter_.spectra[p];
        for (size_t k = 0; k < n; k++)
            acc_[k] += x[k] * hp[k];
        macs_ += n;
    }

    fft_.inverse(acc_, time_out_);
    transforms_++;
    std::copy(time_out_.begin() + block_len_, time_out_.end(), out.begin());
    blocks_++;
}

// ---------------------------------------------------------------------------
// MIMO emulator
// ---------------------------------------------------------------------------

template <typename Real>
typename MimoEmulator<Real>::FilterSet MimoEmulator<Real>::build(const CirMatrixT& cirs)
{
    if (cirs.empty() || cirs.front().empty())
        throw PortCountMismatch("filter matrix must be at least 1x1");
    const size_t n_out = cirs.size();
    const size_t n_in = cirs.front().size();

    FilterSet set;
    Fft<Real> fft(2 * block_len_);
    set.filters.resize(n_out);
    for (size_t j = 0; j < n_out; j++) {
        if (cirs[j].size() != n_in)
            throw PortCountMismatch("ragged filter matrix");
        set.filters[j].reserve(n_in);
        for (size_t i = 0; i < n_in; i++) {
            std::span<const Complex> h(cirs[j][i]);
            static const Complex zero_tap[1] = { Complex(0) };
            if (h.empty())
                h = zero_tap; // absent path behaves as a zero channel
            set.filters[j].push_back(
                PartitionedFilter<Real>::partition(h, block_len_, fft));
            set.partitions = std::max(set.partitions, set.filters[j][i].partitions);
        }
    }
    return set;
}

template <typename Real>
MimoEmulator<Real>::MimoEmulator(const CirMatrixT& cirs, size_t block_len)
    : n_in_(cirs.empty() || cirs.front().empty() ? 0 : cirs.front().size())
    , n_out_(cirs.size())
    , block_len_(block_len)
    , partitions_(0)
    , fft_(2 * block_len)
    , spectrum_(2 * block_len)
    , acc_(2 * block_len)
    , time_out_(2 * block_len)
{
    set_ = build(cirs);
    partitions_ = set_.partitions;
    fdls_.assign(n_in_, Fdl<Real>(partitions_, 2 * block_len_));
    windows_.assign(n_in_, std::vector<Complex>(2 * block_len_, Complex(0)));
}

template <typename Real>
MimoEmulator<Real>::~MimoEmulator()
{
    delete pending_.exchange(nullptr, std::memory_order_acq_rel);
}

template <typename Real>
void MimoEmulator<Real>::set_filter(const CirMatrixT& cirs)
{
    auto staged = std::make_unique<FilterSet>(build(cirs));
    if (staged->filters.size() != n_out_ || staged->filters.front().size() != n_in_)
        throw PortCountMismatch("replacement matrix must keep the port shape");
    delete pending_.exchange(staged.release(), std::memory_order_acq_rel);
}

template <typename Real>
void MimoEmulator<Real>::adopt_pending()
{
    FilterSet* staged = pending_.exchange(nullptr, std::memory_order_acq_rel);
    if (!staged)
        return;
    if (staged->partitions > partitions_) {
        partitions_ = staged->partitions;
        for (auto& fdl : fdls_)
            fdl.grow(partitions_);
    }
    set_ = std::move(*staged);
    delete staged;
}

template <typename Real>
void MimoEmulator<Real>::process(std::span<const std::span<const Complex>> ins,
                                 std::span<const std::span<Complex>> outs)
{
    if (ins.size() != n_in_ || outs.size() != n_out_)
        throw PortCountMismatch("emulator is " + std::to_string(n_out_) + "x" +
                                std::to_string(n_in_));
    for (const auto& in : ins)
        if (in.size() != block_len_)
            throw BlockSizeMismatch("input block length mismatch");
    for (const auto& out : outs)
        if (out.size() != block_len_)
            throw BlockSizeMismatch("output block length mismatch");

    adopt_pending();

    const size_t n = 2 * block_len_;
    for (size_t i = 0; i < n_in_; i++) {
        auto& w = windows_[i];
        std::copy(w.begin() + block_len_, w.end(), w.begin());
        std::copy(ins[i].begin(), ins[i].end(), w.begin() + block_len_);
        fft_.forward(w, spectrum_);
        transforms_++;
        fdls_[i].push(spectrum_);
    }

    for (size_t j = 0; j < n_out_; j++) {
        std::fill(acc_.begin(), acc_.end(), Complex(0));
        for (size_t i = 0; i < n_in_; i++) {
            const auto& filter = set_.filters[j][i];
            for (size_t p = 0; p < filter.partitions; p++) {
                const auto& x = fdls_[i].slot(p);
                const auto& hp = filter.spectra[p];
                for (size_t k = 0; k < n; k++)
                    acc_[k] += x[k] * hp[k];
                macs_ += n;
            }
        }
        fft_.inverse(acc_, time_out_);
        transforms_++;
        std::copy(time_out_.begin() + block_len_, time_out_.end(), outs[j].begin());
    }
    blocks_++;
}

template <typename Real>
void MimoEmulator<Real>::process(std::span<const Complex> in, std::span<Complex> out)
{
    if (n_in_ != 1 || n_out_ != 1)
        throw PortCountMismatch("single-port process on a multi-port emulator");
    const std::span<const Complex> ins[1] = { in };
    const std::span<Complex> outs[1] = { out };
    process(std::span<const std::span<const Complex>>(ins),
            std::span<const std::span<Complex>>(outs));
}

template struct PartitionedFilter<float>;
template struct PartitionedFilter<double>;
template class Fdl<float>;
template class Fdl<double>;
template class UpolsConvolver<float>;
template class UpolsConvolver<double>;
template class MimoEmulator<float>;
template class MimoEmulator<double>;

} // namespace chdrt
