#pragma once

#include <stdexcept>
#include <string>

namespace sgdsim {

// Common base so callers can catch the library broadly.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rejection sampling ran out of retries (packing generation).
struct AttemptsExhausted : Error { using Error::Error; };

// Vector/packing/dataset sizes disagree with the parameter set.
struct DimensionMismatch : Error { using Error::Error; };

// Parameter combination outside the supported regime.
struct InvalidRegime : Error { using Error::Error; };

// Oracle state no longer satisfies its own invariants.
struct StateCorruption : Error { using Error::Error; };

// Asked a finite schedule for more steps than it holds.
struct ScheduleExhausted : Error { using Error::Error; };

// Index or window argument outside the valid range.
struct OutOfRange : Error { using Error::Error; };

// Bad experiment configuration (CLI flags or config file).
struct ConfigError : Error { using Error::Error; };

// File could not be read, written, or parsed.
struct IoError : Error { using Error::Error; };

}  // namespace sgdsim
