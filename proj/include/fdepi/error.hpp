#pragma once

#include <stdexcept>
#include <string>

namespace fdepi {

// Bad input: malformed files, out-of-range parameters, inconsistent datasets.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A numerical routine could not produce a result (singular system, no convergence).
class NumericalError : public std::runtime_error {
  public:
    NumericalError(std::string module, std::string operation, const std::string& what)
        : std::runtime_error(module + "::" + operation + ": " + what),
          module_(std::move(module)), operation_(std::move(operation)) {}

    const std::string& module() const noexcept { return module_; }
    const std::string& operation() const noexcept { return operation_; }

  private:
    std::string module_;
    std::string operation_;
};

}  // namespace fdepi
