#pragma once

#include <stdexcept>
#include <string>

namespace fedmr {

enum class ErrorKind {
    InvalidArchitecture,
    EmptyAggregate,
    ShapeMismatch,
    EmptyPopulation,
    PlanShape,
    InvalidGranularity,
    NumericInput,
    InvalidLabel,
    EmptyBatch,
    EmptyShard,
    MissingReference,
    EmptyEval,
    DegenerateNorm,
    InfeasibleCenters,
    InfeasiblePartition,
    InvalidClientCount,
    InvalidBounds,
    Routing,
    InvalidConfig,
    InvalidManifest,
    IncompatibleRuns,
    UnknownSuite,
    Io,
};

const char* error_kind_name(ErrorKind kind);

/// All library errors carry a machine-checkable kind plus a human message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace fedmr
