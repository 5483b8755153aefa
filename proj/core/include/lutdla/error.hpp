#pragma once

#include <stdexcept>
#include <string>

namespace lutdla {

enum class ErrorKind {
  InvalidInput,   // malformed shapes, non-finite data, bad files
  Configuration,  // inconsistent or missing configuration entries
  Corruption,     // an invariant was violated upstream (e.g. index out of range)
  Divergence,     // training blew up
  Deadlock,       // simulator made no progress / cycle guard tripped
  Infeasible,     // design-space search left nothing standing
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

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidInput, what);
}

}  // namespace lutdla
