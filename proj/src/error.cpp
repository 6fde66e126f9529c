#include "cranioforge/error.hpp"

namespace cranioforge {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid_input";
        case ErrorKind::Schema: return "schema";
        case ErrorKind::InsufficientData: return "insufficient_data";
        case ErrorKind::OutOfRange: return "out_of_range";
        case ErrorKind::Partition: return "partition";
        case ErrorKind::Degenerate: return "degenerate";
        case ErrorKind::Io: return "io";
        case ErrorKind::Numerical: return "numerical";
        case ErrorKind::NotFound: return "not_found";
        case ErrorKind::Conflict: return "conflict";
    }
    return "unknown";
}

}  // namespace cranioforge
