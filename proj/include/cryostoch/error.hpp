#pragma once

#include <stdexcept>
#include <string>

namespace cryostoch {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Grid side lengths that are zero, odd, or do not match between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration (CLI flags, config files, out-of-range parameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or numerical breakdown during evaluation or optimization.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace cryostoch
