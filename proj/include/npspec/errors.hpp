#pragma once

#include <stdexcept>
#include <string>

namespace npspec {

// Thrown when a kernel or kernel-derived quantity is evaluated at coincident
// points, where the integrand is singular and no finite value exists.
class SingularPointError : public std::domain_error {
public:
  explicit SingularPointError(const std::string& what)
      : std::domain_error(what) {}
};

// Thrown when a derivative of higher order than the geometry guarantees is
// requested (the generators expose derivatives only up to a declared order).
class UnsupportedOrderError : public std::domain_error {
public:
  explicit UnsupportedOrderError(const std::string& what)
      : std::domain_error(what) {}
};

// Thrown when a dense linear-algebra backend fails to converge or a computed
// quantity comes back non-finite.
class NumericFailureError : public std::runtime_error {
public:
  explicit NumericFailureError(const std::string& what)
      : std::runtime_error(what) {}
};

// Thrown when a fit or probe is asked to draw conclusions from fewer samples
// than its minimum (e.g. a decay-fit window with fewer than 8 points).
class InsufficientDataError : public std::runtime_error {
public:
  explicit InsufficientDataError(const std::string& what)
      : std::runtime_error(what) {}
};

// Thrown by config parsing/validation; carries a JSON-pointer-style location
// so the CLI can report where in the file the problem is.
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string location, const std::string& message)
      : std::runtime_error(location.empty() ? message
                                            : location + ": " + message),
        location_(std::move(location)) {}
  const std::string& location() const { return location_; }

private:
  std::string location_;
};

}  // namespace npspec
