#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cogstream {

enum class ErrorKind {
    invalid_argument,
    invalid_config,
    io,
    bad_magic,
    version_mismatch,
    truncated,
    non_finite,
    decreasing_timestamps,
    schema,
    degenerate_vector,
    dimension_mismatch,
    parse,
    provider,
    retrieval,
};

std::string_view to_string(ErrorKind kind);

// All engine failures are reported through this type; `kind` is stable and
// is what the CLI prints in its machine-readable error object.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace cogstream
