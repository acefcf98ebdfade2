#pragma once

#include <stdexcept>
#include <string>

namespace cbvar {

/// Base for every error raised by the library. Carries the process exit code
/// the command-line front end maps it to.
class Error : public std::runtime_error {
public:
    Error(const std::string& what, int exit_code)
        : std::runtime_error(what), exit_code_(exit_code) {}

    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

/// Invalid user configuration (bad flag values, inconsistent options).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

/// Problems with input data: missing columns, gaps, NaNs, too few rows.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what, 3) {}
};

/// Numerical failure: non-PD matrices, degenerate densities, overflow.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(what, 4) {}
};

}  // namespace cbvar
