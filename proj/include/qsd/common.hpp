// qsdkit: shared error taxonomy, version, logging.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qsd {

inline constexpr const char* kToolVersion = "0.1.0";

// Base class for all qsdkit errors. The CLI maps ConfigError to exit code 2
// and every other Error (and unexpected std::exception) to exit code 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration: invalid values, unknown keys, unsupported combinations.
struct ConfigError : Error {
    using Error::Error;
};

// Bad runtime input: empty traces, non-finite points, dimension mismatches.
struct InputError : Error {
    using Error::Error;
};

// State-model validation failures (non-PSD covariance, priors not normalized).
struct ModelError : Error {
    using Error::Error;
};

// Singular or otherwise numerically unusable matrices.
struct NumericalError : Error {
    using Error::Error;
};

// Discriminator fitting failures.
struct FitError : Error {
    using Error::Error;
};

// Training divergence (NaN loss).
struct TrainingError : Error {
    using Error::Error;
};

// Fixed-point parameter overflow.
struct QuantizationError : Error {
    using Error::Error;
};

// Schedule placement does not fit the tile array.
struct PlacementError : Error {
    using Error::Error;
};

// Log level is read once from the QSD_LOG environment variable
// (error|info|debug, default error). Messages go to stderr.
enum class LogLevel : int { error = 0, info = 1, debug = 2 };

LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace qsd
