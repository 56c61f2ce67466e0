#include "salr/error.hpp"

namespace salr {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::domain: return "domain";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::format: return "format";
    case ErrorKind::corruption: return "corruption";
    case ErrorKind::bounds: return "bounds";
    case ErrorKind::verification: return "verification";
    case ErrorKind::internal: return "internal";
    }
    return "unknown";
}

} // namespace salr
