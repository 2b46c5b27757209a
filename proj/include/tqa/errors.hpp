#pragma once

#include <stdexcept>

namespace tqa {

// Base class of every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid caller input: bad distribution parameters, malformed files,
// inconsistent configuration, dimension mismatches.
struct InvalidInput : Error {
  using Error::Error;
};

// Too little (or degenerate) data to compute the requested statistic.
struct InsufficientData : InvalidInput {
  using InvalidInput::InvalidInput;
};

// The sampler could not run: non-finite log density at initialisation,
// or a chain that stopped moving during warmup.
struct SamplingError : Error {
  using Error::Error;
};

// A finished fit did not meet the convergence thresholds.
struct ConvergenceFailure : Error {
  using Error::Error;
};

}  // namespace tqa
