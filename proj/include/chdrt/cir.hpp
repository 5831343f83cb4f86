#ifndef CHDRT_CIR_HPP_
#define CHDRT_CIR_HPP_

#include <string>
#include <vector>

#include "chdrt/chdr.hpp"

namespace chdrt {

/// Channel impulse responses indexed [output port][input port][tap].
using CirMatrix = std::vector<std::vector<std::vector<Cf32>>>;

/// n x n passthrough matrix: unit tap on the diagonal, one zero tap off it.
CirMatrix delta_cir(size_t n_ports = 1);

/// Loads a CIR set. Two encodings are accepted:
///  - text, starting with the magic line `cir v1 <taps> <n_out> <n_in>`
///    followed by n_out*n_in*taps lines of `<re> <im>`, row-major over
///    (out, in, tap);
///  - raw binary complex64 (little-endian float32 re,im pairs), read as a
///    single 1x1 response.
/// Throws ConfigError on malformed content.
CirMatrix load_cir(const std::string& path);

/// Writes the text encoding. Rectangularity is enforced by padding shorter
/// responses with zero taps up to the longest one.
void save_cir(const std::string& path, const CirMatrix& cirs);

} // namespace chdrt

#endif
