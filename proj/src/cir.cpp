#include "chdrt/cir.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "chdrt/errors.hpp"

namespace chdrt {

CirMatrix delta_cir(size_t n_ports)
{
    CirMatrix m(n_ports, std::vector<std::vector<Cf32>>(n_ports));
    for (size_t j = 0; j < n_ports; j++)
        for (size_t i = 0; i < n_ports; i++)
            m[j][i].assign(1, i == j ? Cf32(1.0f, 0.0f) : Cf32(0.0f, 0.0f));
    return m;
}

CirMatrix load_cir(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open CIR file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string raw = buf.str();

    static const char kMagic[] = "cir v1";
    if (raw.rfind(kMagic, 0) == 0) {
        std::istringstream text(raw);
        std::string word_cir, word_v1;
        size_t taps = 0, n_out = 0, n_in = 0;
        text >> word_cir >> word_v1 >> taps >> n_out >> n_in;
        if (!text || taps == 0 || n_out == 0 || n_in == 0)
            throw ConfigError("bad CIR header in " + path);
        CirMatrix m(n_out, std::vector<std::vector<Cf32>>(n_in));
        for (size_t j = 0; j < n_out; j++) {
            for (size_t i = 0; i < n_in; i++) {
                m[j][i].resize(taps);
                for (size_t k = 0; k < taps; k++) {
                    float re = 0, im = 0;
                    if (!(text >> re >> im))
                        throw ConfigError("truncated CIR tap data in " + path);
                    m[j][i][k] = Cf32(re, im);
                }
            }
        }
        float extra;
        if (text >> extra)
            throw ConfigError("trailing data after CIR taps in " + path);
        return m;
    }

    // raw complex64 stream, single response
    if (raw.empty() || raw.size() % 8 != 0)
        throw ConfigError("binary CIR must be a whole number of complex64 values: " + path);
    const size_t taps = raw.size() / 8;
    CirMatrix m(1, std::vector<std::vector<Cf32>>(1));
    m[0][0].resize(taps);
    std::memcpy(m[0][0].data(), raw.data(), raw.size());
    return m;
}

void save_cir(const std::string& path, const CirMatrix& cirs)
{
    if (cirs.empty() || cirs.front().empty())
        throw ConfigError("cannot save an empty CIR matrix");
    const size_t n_out = cirs.size();
    const size_t n_in = cirs.front().size();
    size_t taps = 1;
    for (const auto& row : cirs) {
        if (row.size() != n_in)
            throw ConfigError("ragged CIR matrix");
        for (const auto& h : row)
            taps = std::max(taps, h.size());
    }

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write CIR file: " + path);
    out << "cir v1 " << taps << " " << n_out << " " << n_in << "\n";
    char line[80];
    for (size_t j = 0; j < n_out; j++) {
        for (size_t i = 0; i < n_in; i++) {
            for (size_t k = 0; k < taps; k++) {
                const Cf32 v = k < cirs[j][i].size() ? cirs[j][i][k] : Cf32(0);
                std::snprintf(line, sizeof(line), "%.9g %.9g\n", v.real(), v.imag());
                out << line;
            }
        }
    }
    if (!out)
        throw ConfigError("short write to CIR file: " + path);
}

} // namespace chdrt
