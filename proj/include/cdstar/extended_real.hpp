#pragma once

#include <limits>
#include <string>

namespace cdstar {

// Nonnegative real number or +infinity. Infinity absorbs sums and products
// with positive numbers; 0 * infinity is 0 (measure-theoretic convention).
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  explicit ExtendedReal(double value);

  static constexpr ExtendedReal infinity() {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  bool is_infinite() const { return infinite_; }
  bool is_finite() const { return !infinite_; }

  // Finite value; throws NotFiniteError on infinity.
  double value() const;
  // Finite value or +inf as a double.
  double to_double() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  std::string to_string() const;

  friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b);
  friend ExtendedReal operator*(ExtendedReal a, ExtendedReal b);
  ExtendedReal& operator+=(ExtendedReal other) { return *this = *this + other; }
  ExtendedReal& operator*=(ExtendedReal other) { return *this = *this * other; }

  friend bool operator==(const ExtendedReal&, const ExtendedReal&) = default;

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

}  // namespace cdstar
