#ifndef CHDRT_ERRORS_HPP_
#define CHDRT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace chdrt {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// codec
struct FieldOverflow : Error { using Error::Error; };
struct InvalidPktType : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct OddLength : Error { using Error::Error; };

// stream engine
struct NotStreaming : Error { using Error::Error; };
struct UnexpectedStatus : Error { using Error::Error; };
struct ProtocolViolation : Error { using Error::Error; };
struct BadPacketType : Error { using Error::Error; };

// upols
struct BlockSizeMismatch : Error { using Error::Error; };
struct PortCountMismatch : Error { using Error::Error; };

// harness
struct NoSignal : Error { using Error::Error; };
struct IllConditioned : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

} // namespace chdrt

#endif
