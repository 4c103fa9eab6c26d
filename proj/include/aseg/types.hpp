#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aseg {

using Vec = std::vector<double>;
using ConstVecView = std::span<const double>;
using VecView = std::span<double>;

/// Raised when a configuration or parameter set violates its contract.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an iterative method blows up. Carries the outer iteration index
/// where it was detected (-1 when not attached to an outer loop).
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long iteration = -1)
      : std::runtime_error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " + std::to_string(want) + ")");
  }
}

}  // namespace aseg
