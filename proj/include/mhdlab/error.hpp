#pragma once

#include <stdexcept>
#include <string>

namespace mhdlab {

/// Failure categories. The CLI maps each one to an exit status and a
/// machine-readable error document.
enum class ErrorKind {
  config,
  geometry,
  resolution,
  weight,
  shape,
  numerical,
  equilibrium,
  commutator,
  empty_input,
  actuator,
  uncontrollable,
  projection,
  instability,
  precondition,
  fit,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  /// Optional free-form diagnostic (residual history, iteration log).
  const std::string& detail() const { return detail_; }
  Error& with_detail(std::string d) {
    detail_ = std::move(d);
    return *this;
  }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace mhdlab
