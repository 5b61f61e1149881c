#pragma once

#include <stdexcept>
#include <string>

namespace partprobe {

enum class ErrorKind {
  usage,          // bad argument, unknown enum name, invalid config
  format,         // malformed bytes or text
  missing_sample, // id absent from a cache manifest
  corrupt_cache,  // payload length disagrees with the manifest
  shape,          // mismatched extents between operands
  domain,         // argument outside a formula's domain
  degenerate,     // zero vector, empty basis and similar
  incomparable,   // embedding vectors of different kernel shapes
  numeric,        // non-finite loss or gradient
  io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit status for the command line tool: 1 usage, 3 numeric
/// failure, 2 for every data/IO problem.
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace partprobe
