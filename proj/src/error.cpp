#include "fedmr/error.hpp"

namespace fedmr {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArchitecture: return "invalid-architecture";
        case ErrorKind::EmptyAggregate: return "empty-aggregate";
        case ErrorKind::ShapeMismatch: return "shape-mismatch";
        case ErrorKind::EmptyPopulation: return "empty-population";
        case ErrorKind::PlanShape: return "plan-shape";
        case ErrorKind::InvalidGranularity: return "invalid-granularity";
        case ErrorKind::NumericInput: return "numeric-input";
        case ErrorKind::InvalidLabel: return "invalid-label";
        case ErrorKind::EmptyBatch: return "empty-batch";
        case ErrorKind::EmptyShard: return "empty-shard";
        case ErrorKind::MissingReference: return "missing-reference";
        case ErrorKind::EmptyEval: return "empty-eval";
        case ErrorKind::DegenerateNorm: return "degenerate-norm";
        case ErrorKind::InfeasibleCenters: return "infeasible-centers";
        case ErrorKind::InfeasiblePartition: return "infeasible-partition";
        case ErrorKind::InvalidClientCount: return "invalid-client-count";
        case ErrorKind::InvalidBounds: return "invalid-bounds";
        case ErrorKind::Routing: return "routing";
        case ErrorKind::InvalidConfig: return "invalid-config";
        case ErrorKind::InvalidManifest: return "invalid-manifest";
        case ErrorKind::IncompatibleRuns: return "incompatible-runs";
        case ErrorKind::UnknownSuite: return "unknown-suite";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace fedmr
