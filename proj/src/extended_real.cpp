#include "cdstar/extended_real.hpp"

#include <cmath>
#include <cstdio>

#include "cdstar/errors.hpp"

namespace cdstar {

ExtendedReal::ExtendedReal(double value) {
  if (std::isnan(value) || value < 0.0) {
    throw DomainError("ExtendedReal requires a nonnegative value, got " + std::to_string(value));
  }
  if (std::isinf(value)) {
    infinite_ = true;
  } else {
    value_ = value;
  }
}

double ExtendedReal::value() const {
  if (infinite_) throw NotFiniteError("ExtendedReal::value() on infinity");
  return value_;
}

std::string ExtendedReal::to_string() const {
  if (infinite_) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value_);
  return buf;
}

ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
  if (a.infinite_ || b.infinite_) return ExtendedReal::infinity();
  return ExtendedReal(a.value_ + b.value_);
}

ExtendedReal operator*(ExtendedReal a, ExtendedReal b) {
  const bool a_zero = !a.infinite_ && a.value_ == 0.0;
  const bool b_zero = !b.infinite_ && b.value_ == 0.0;
  if (a_zero || b_zero) return ExtendedReal(0.0);
  if (a.infinite_ || b.infinite_) return ExtendedReal::infinity();
  return ExtendedReal(a.value_ * b.value_);
}

}  // namespace cdstar
