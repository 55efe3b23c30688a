#include "cogstream/error.hpp"

namespace cogstream {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::invalid_config: return "invalid_config";
    case ErrorKind::io: return "io";
    case ErrorKind::bad_magic: return "bad_magic";
    case ErrorKind::version_mismatch: return "version_mismatch";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::decreasing_timestamps: return "decreasing_timestamps";
    case ErrorKind::schema: return "schema";
    case ErrorKind::degenerate_vector: return "degenerate_vector";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::parse: return "parse";
    case ErrorKind::provider: return "provider";
    case ErrorKind::retrieval: return "retrieval";
    }
    return "unknown";
}

} // namespace cogstream
