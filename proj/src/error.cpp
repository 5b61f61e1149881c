#include "partprobe/error.hpp"

namespace partprobe {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::format: return "format";
    case ErrorKind::missing_sample: return "missing-sample";
    case ErrorKind::corrupt_cache: return "corrupt-cache";
    case ErrorKind::shape: return "shape";
    case ErrorKind::domain: return "domain";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::incomparable: return "incomparable";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage: return 1;
    case ErrorKind::numeric: return 3;
    default: return 2;
  }
}

}  // namespace partprobe
