// errors.hpp - exception types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace xrforge {

/// Base class for all xrforge failures.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or truncated input file.
class format_error : public error {
public:
    using error::error;
};

/// Structurally valid input carrying invalid values (non-finite HU, ...).
class data_error : public error {
public:
    using error::error;
};

/// Out-of-range or inconsistent function parameter.
class parameter_error : public error {
public:
    using error::error;
};

/// Array dimensions do not match.
class shape_error : public error {
public:
    using error::error;
};

/// Class id or name outside the anatomy taxonomy.
class taxonomy_error : public error {
public:
    using error::error;
};

/// Invalid projection geometry (SDD <= ODD, source inside volume, ...).
class geometry_error : public error {
public:
    using error::error;
};

/// Missing superior-inferior axis or other configuration problem.
class config_error : public error {
public:
    using error::error;
};

/// Degenerate numeric input (zero-norm latent vector, ...).
class numeric_error : public error {
public:
    using error::error;
};

/// Measurement cannot be computed from the given masks.
class measurement_error : public error {
public:
    using error::error;
};

/// Fewer data points than the operation requires.
class insufficient_data_error : public error {
public:
    using error::error;
};

} // namespace xrforge
