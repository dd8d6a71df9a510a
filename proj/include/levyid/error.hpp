#ifndef LEVYID_ERROR_HPP
#define LEVYID_ERROR_HPP

#include <stdexcept>
#include <string>

namespace levyid {

/// Raised when an argument violates a documented precondition.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised for malformed or inconsistent configuration documents.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a numerical routine cannot produce a finite answer.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

}  // namespace levyid

#endif
