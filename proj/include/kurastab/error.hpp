#ifndef KURASTAB_ERROR_HPP
#define KURASTAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace kurastab {

/// Malformed input: schema violations, invalid graphs, bad parameters.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical procedure failed: no steady state, infeasible approximation,
/// diverging integration.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kurastab

#endif  // KURASTAB_ERROR_HPP
