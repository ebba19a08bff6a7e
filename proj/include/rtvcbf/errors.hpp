#pragma once

#include <stdexcept>
#include <string>

namespace rtvcbf {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid scenario, parameter set or command line. Maps to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (dimensions, ranges).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The barrier lost relative degree two (c2 vanished).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// The safety-filter program did not converge.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state produced by the integrator.
class IntegrationError : public Error {
 public:
  explicit IntegrationError(const std::string& what, long step = -1)
      : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace rtvcbf
