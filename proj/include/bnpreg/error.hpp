#pragma once

#include <stdexcept>
#include <string>

namespace bnpreg {

// Broad failure classes. The CLI maps them to exit codes and the HTTP
// service to status codes, so every thrown Error must pick one.
enum class ErrorKind {
  validation,  // bad input, bad spec, bad role assignment
  numerical,   // non-finite density, overflow, sampler blow-up
  not_found,
  conflict,    // e.g. starting a run while one is active
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string reason, const std::string& message)
      : std::runtime_error(message), kind_(kind), reason_(std::move(reason)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Short machine-readable token such as "ragged_row" or "degenerate_column".
  const std::string& reason() const noexcept { return reason_; }

 private:
  ErrorKind kind_;
  std::string reason_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string reason,
                              const std::string& message) {
  throw Error(kind, std::move(reason), message);
}

[[noreturn]] inline void invalid(std::string reason, const std::string& message) {
  throw Error(ErrorKind::validation, std::move(reason), message);
}

}  // namespace bnpreg
