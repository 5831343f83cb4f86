#ifndef CHDRT_UTIL_HPP_
#define CHDRT_UTIL_HPP_

#include <cstdint>
#include <cstddef>
#include <cmath>
#include <complex>
#include <vector>

namespace chdrt {

// Little-endian byte packing. The wire format is little-endian throughout,
// independent of host byte order.
inline void put_le16(std::vector<uint8_t>& buf, uint16_t v)
{
    buf.push_back(static_cast<uint8_t>(v & 0xFF));
    buf.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_le32(std::vector<uint8_t>& buf, uint32_t v)
{
    for (int i = 0; i < 4; i++)
        buf.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_le64(std::vector<uint8_t>& buf, uint64_t v)
{
    for (int i = 0; i < 8; i++)
        buf.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

inline uint16_t get_le16(const uint8_t* p)
{
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint32_t get_le32(const uint8_t* p)
{
    uint32_t v = 0;
    for (int i = 0; i < 4; i++)
        v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}

inline uint64_t get_le64(const uint8_t* p)
{
    uint64_t v = 0;
    for (int i = 0; i < 8; i++)
        v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

/// Counter-based xoshiro256** generator. Used instead of <random> engines so
/// that every seeded draw sequence is identical across compilers and runs;
/// replay determinism is part of the simulation contract.
class Rng {
public:
    explicit Rng(uint64_t seed)
    {
        // splitmix64 expansion of the seed into the xoshiro state
        uint64_t x = seed;
        for (auto& s : s_) {
            x += 0x9E3779B97F4A7C15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            s = z ^ (z >> 31);
        }
    }

    uint64_t next_u64()
    {
        auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform integer in [0, n). n must be nonzero.
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    /// Uniform double in [0, 1).
    double next_double()
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double next_gauss()
    {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300)
            u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::complex<double> next_cgauss()
    {
        return { next_gauss() * M_SQRT1_2, next_gauss() * M_SQRT1_2 };
    }

    /// Unit-power QPSK symbol.
    std::complex<float> next_qpsk()
    {
        static const float lvl = static_cast<float>(M_SQRT1_2);
        uint64_t b = next_u64();
        return { (b & 1) ? lvl : -lvl, (b & 2) ? lvl : -lvl };
    }

private:
    uint64_t s_[4];
};

} // namespace chdrt

#endif
