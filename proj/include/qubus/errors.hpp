#pragma once

#include <stdexcept>
#include <string>

namespace qubus {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LayoutError : Error { using Error::Error; };
struct ArgumentError : Error { using Error::Error; };
struct TruncationError : Error { using Error::Error; };
struct SingularDetuningError : Error { using Error::Error; };
struct UnsupportedConfigurationError : Error { using Error::Error; };
struct NumericalError : Error { using Error::Error; };
struct IntegrationError : NumericalError { using NumericalError::NumericalError; };
struct NonUniqueSteadyStateError : NumericalError { using NumericalError::NumericalError; };
struct NoPeakError : NumericalError { using NumericalError::NumericalError; };

struct ConfigError : Error {
    int line;
    ConfigError(int line_, const std::string& what)
        : Error(line_ > 0 ? "line " + std::to_string(line_) + ": " + what : what), line(line_) {}
};

}  // namespace qubus
