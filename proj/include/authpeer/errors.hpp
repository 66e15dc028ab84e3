#pragma once

#include <stdexcept>
#include <string>

namespace authpeer {

// Bad or missing user input (files, flags, malformed data). Maps to exit code 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside an algorithm (non-finite ELBO, SVD breakdown, ...).
// Maps to exit code 3.
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace authpeer
