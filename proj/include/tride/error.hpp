#pragma once

#include <stdexcept>
#include <string>

namespace tride {

enum class ErrorKind {
    Shape,
    EmptyBatch,
    Degenerate,
    Precondition,
    Config,
    Numeric,
    State,
    Domain,
    Singularity,
    Sampling,
    Validation,
    Parse,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

/// Process exit code for the CLI: 2 config-like, 3 numeric, 4 io/parse.
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

} // namespace tride
