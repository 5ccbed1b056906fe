#include "tride/error.hpp"

namespace tride {

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind)
{
}

const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::EmptyBatch: return "empty-batch";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Config: return "config";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::State: return "state";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Singularity: return "singularity";
    case ErrorKind::Sampling: return "sampling";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Numeric:
    case ErrorKind::Degenerate:
    case ErrorKind::Singularity:
        return 3;
    case ErrorKind::Io:
    case ErrorKind::Parse:
        return 4;
    default:
        return 2;
    }
}

void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

} // namespace tride
