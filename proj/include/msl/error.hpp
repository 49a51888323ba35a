#pragma once

#include <stdexcept>
#include <string>

namespace msl {

/// Failure categories surfaced by the library. The CLI maps them to exit codes.
enum class ErrorKind {
  domain,      // argument outside the mathematical domain of an operation
  shape,       // mismatched lengths or grids
  validation,  // malformed input data or configuration
  numerical,   // an algorithm failed to produce a usable result
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace msl
