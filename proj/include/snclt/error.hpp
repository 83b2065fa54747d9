#pragma once

#include <stdexcept>
#include <string>

namespace snclt {

/// Invalid specification, configuration or argument. CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Degenerate input (zero columns, non-PSD request, failed convergence). CLI exit code 3.
class DegeneracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File read/write or parse failure. CLI exit code 4.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace snclt
