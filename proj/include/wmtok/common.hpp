#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace wmtok {

/// Identifier in the unified token vocabulary.
using TokenId = std::uint32_t;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for malformed inputs, out-of-range parameters and shape mismatches.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Raised when a file cannot be read, written or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace wmtok
