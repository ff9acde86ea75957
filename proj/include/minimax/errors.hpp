#pragma once

#include <stdexcept>
#include <string>

namespace minimax {

/// Invalid argument supplied by the caller (bad shape, negative radius, ...).
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// The request is well-formed but outside the domain where the quantity exists.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A numerical routine failed (non-finite objective, bracket failure, ...).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace minimax
