#pragma once

#include <stdexcept>
#include <string>

namespace cdstar {

// Raised when arguments leave the mathematical domain of an operation
// (N >= 0, t outside [0,1], crossing couplings handed to a mixer, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised when a quantity that must be finite is not: positive probability on
// a cell of infinite reference mass, entropy of a measure charging S_m, ...
class NotFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cdstar
