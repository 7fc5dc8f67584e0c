#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>

namespace omlat {

/// Bad input: unknown mode names, violated parameter invariants, malformed configs.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Integration blew up or a solver failed to meet its tolerance.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : NumericalError {
  ConvergenceError(const std::string& what, double residual_)
      : NumericalError(what), residual(residual_) {}
  double residual;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::function<void(const std::string&)>& warning_sink() {
  static std::function<void(const std::string&)> sink = [](const std::string& msg) {
    std::clog << "omlat: warning: " << msg << '\n';
  };
  return sink;
}
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Replace the warning sink (stderr by default). Returns the previous one.
inline std::function<void(const std::string&)> set_warning_handler(
    std::function<void(const std::string&)> handler) {
  std::lock_guard lock(detail::warning_mutex());
  auto previous = std::move(detail::warning_sink());
  detail::warning_sink() = std::move(handler);
  return previous;
}

inline void warn(const std::string& message) {
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_sink()) detail::warning_sink()(message);
}

}  // namespace omlat
