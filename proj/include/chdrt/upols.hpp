#ifndef CHDRT_UPOLS_HPP_
#define CHDRT_UPOLS_HPP_

#include <atomic>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "chdrt/errors.hpp"
#include "chdrt/fft.hpp"

namespace chdrt {

/// Frequency-domain representation of an impulse response cut into
/// ceil(L / B) segments of B taps, each zero-padded to 2B and transformed.
template <typename Real>
struct PartitionedFilter {
    using Complex = std::complex<Real>;

    size_t block_len = 0;  // B
    size_t partitions = 0; // P = ceil(L / B)
    std::vector<std::vector<Complex>> spectra; // P vectors of length 2B
    std::vector<Complex> source; // the CIR this was built from

    static PartitionedFilter partition(std::span<const Complex> h, size_t block_len,
                                       Fft<Real>& fft);
};

/// Frequency-domain delay line: ring of the most recent input-block spectra.
/// slot(0) is the current block, slot(p) the block from p blocks ago.
template <typename Real>
class Fdl {
public:
    using Complex = std::complex<Real>;

    Fdl(size_t depth, size_t fft_len);

    void push(std::span<const Complex> spectrum);
    const std::vector<Complex>& slot(size_t p) const;
    size_t depth() const { return slots_.size(); }

    /// Deepens the line, keeping known history and treating blocks older
    /// than the previous depth as silence.
    void grow(size_t new_depth);

private:
    std::vector<std::vector<Complex>> slots_;
    size_t write_ = 0;
};

/// Uniformly partitioned overlap-save convolver over one input/output port
/// pair, with an on-the-fly filter handoff slot. The processing side adopts a
/// pending filter at the next block boundary; writers never block it.
template <typename Real>
class UpolsConvolver {
public:
    using Complex = std::complex<Real>;

    UpolsConvolver(std::span<const Complex> h, size_t block_len);
    ~UpolsConvolver();

    UpolsConvolver(const UpolsConvolver&) = delete;
    UpolsConvolver& operator=(const UpolsConvolver&) = delete;

    size_t block_len() const { return block_len_; }
    size_t partitions() const { return filter_.partitions; }

    /// Convolves exactly one block. in and out must both hold block_len
    /// samples (they may alias). Throws BlockSizeMismatch otherwise.
    void process(std::span<const Complex> in, std::span<Complex> out);

    /// Stages a replacement impulse response; takes effect at the next block
    /// boundary. May be called from a context other than the processing one;
    /// with several pending writers the last one wins.
    void set_filter(std::span<const Complex> h);

    uint64_t transform_count() const { return transforms_; }
    uint64_t spectral_mac_count() const { return macs_; }
    uint64_t blocks_processed() const { return blocks_; }

private:
    void adopt_pending();

    size_t block_len_;
    Fft<Real> fft_;
    PartitionedFilter<Real> filter_;
    std::atomic<PartitionedFilter<Real>*> pending_{ nullptr };
    Fdl<Real> fdl_;
    std::vector<Complex> window_;   // [previous block | current block]
    std::vector<Complex> spectrum_;
    std::vector<Complex> acc_;
    std::vector<Complex> time_out_;
    uint64_t transforms_ = 0;
    uint64_t macs_ = 0;
    uint64_t blocks_ = 0;
};

/// MIMO fast-convolution channel emulator: an n_out x n_in matrix of
/// partitioned filters sharing one block length, one frequency-domain delay
/// line per input port. Per block it spends n_in forward and n_out inverse
/// transforms, independent of the channel count.
template <typename Real>
class MimoEmulator {
public:
    using Complex = std::complex<Real>;
    using CirMatrixT = std::vector<std::vector<std::vector<Complex>>>; // [out][in][tap]

    MimoEmulator(const CirMatrixT& cirs, size_t block_len);
    ~MimoEmulator();

    MimoEmulator(const MimoEmulator&) = delete;
    MimoEmulator& operator=(const MimoEmulator&) = delete;

    size_t n_in() const { return n_in_; }
    size_t n_out() const { return n_out_; }
    size_t block_len() const { return block_len_; }
    size_t partitions() const { return partitions_; }

    /// One block step: ins[i] and outs[j] each hold block_len samples.
    /// Throws PortCountMismatch / BlockSizeMismatch on shape errors.
    void process(std::span<const std::span<const Complex>> ins,
                 std::span<const std::span<Complex>> outs);

    /// Convenience single-port step (requires a 1x1 emulator).
    void process(std::span<const Complex> in, std::span<Complex> out);

    /// Stages a full replacement filter matrix, adopted at the next block
    /// boundary. Last writer wins; the processing side never blocks.
    void set_filter(const CirMatrixT& cirs);

    uint64_t transform_count() const { return transforms_; }
    uint64_t spectral_mac_count() const { return macs_; }
    uint64_t blocks_processed() const { return blocks_; }

private:
    struct FilterSet {
        size_t partitions = 0;
        // spectra[out][in][p] of length 2B
        std::vector<std::vector<PartitionedFilter<Real>>> filters;
    };

    FilterSet build(const CirMatrixT& cirs);
    void adopt_pending();

    size_t n_in_;
    size_t n_out_;
    size_t block_len_;
    size_t partitions_;
    Fft<Real> fft_;
    FilterSet set_;
    std::atomic<FilterSet*> pending_{ nullptr };
    std::vector<Fdl<Real>> fdls_;               // one per input port
    std::vector<std::vector<Complex>> windows_; // per input port
    std::vector<Complex> spectrum_;
    std::vector<Complex> acc_;
    std::vector<Complex> time_out_;
    uint64_t transforms_ = 0;
    uint64_t macs_ = 0;
    uint64_t blocks_ = 0;
};

extern template struct PartitionedFilter<float>;
extern template struct PartitionedFilter<double>;
extern template class Fdl<float>;
extern template class Fdl<double>;
extern template class UpolsConvolver<float>;
extern template class UpolsConvolver<double>;
extern template class MimoEmulator<float>;
extern template class MimoEmulator<double>;

} // namespace chdrt

#endif
