#pragma once

#include <stdexcept>
#include <string>

namespace tacs {

// Process exit codes used by the CLI. Library code throws; main() maps the
// exception type to one of these.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfigError = 2,
    kExitMissingPrerequisite = 3,
    kExitNumericalFailure = 4,
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed config, bad shapes, out-of-range arguments, API misuse.
struct ConfigError : Error {
    using Error::Error;
};

// A required input artifact (dataset, checkpoint, samples) is absent.
struct MissingPrerequisiteError : Error {
    using Error::Error;
};

// Non-finite values, degenerate geometry, diverged training.
struct NumericalError : Error {
    using Error::Error;
};

// Guidance could not produce a usable gradient for a step. Samplers catch
// this (per step) and fall back to the unguided update.
struct GuidanceError : NumericalError {
    using NumericalError::NumericalError;
};

// A property estimator hit a pole (e.g. coincident atoms in the Coulomb
// surrogate). Evaluation code counts these as invalid samples.
struct SingularityError : NumericalError {
    using NumericalError::NumericalError;
};

} // namespace tacs
