#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cms {

/// Thrown for malformed rational literals and other spec-document problems.
struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Exact rational number. Wraps GMP's mpq_class and keeps every value in
/// canonical form (lowest terms, positive denominator). All certificate
/// arithmetic in the library goes through this type; no rounding anywhere.
class Rational {
 public:
  Rational() : v_(0) {}
  Rational(long n) : v_(n) {}  // NOLINT: implicit on purpose, mirrors integer literals
  Rational(long num, long den);
  explicit Rational(const mpq_class& v) : v_(v) { v_.canonicalize(); }

  /// Parse "p/q" or a bare integer. Throws SpecError on malformed input,
  /// including a zero denominator.
  static Rational parse(const std::string& text);

  /// Exact conversion of a finite double (every double is a dyadic rational).
  static Rational from_double(double x);

  double to_double() const { return v_.get_d(); }
  std::string str() const;

  bool is_zero() const { return sgn(v_) == 0; }
  bool is_negative() const { return sgn(v_) < 0; }
  bool is_integer() const { return v_.get_den() == 1; }
  Rational abs() const;

  Rational& operator+=(const Rational& o) { v_ += o.v_; return *this; }
  Rational& operator-=(const Rational& o) { v_ -= o.v_; return *this; }
  Rational& operator*=(const Rational& o) { v_ *= o.v_; return *this; }
  Rational& operator/=(const Rational& o);
  Rational operator-() const { return Rational(mpq_class(-v_)); }

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

  friend bool operator==(const Rational& a, const Rational& b) { return a.v_ == b.v_; }
  friend bool operator!=(const Rational& a, const Rational& b) { return a.v_ != b.v_; }
  friend bool operator<(const Rational& a, const Rational& b) { return a.v_ < b.v_; }
  friend bool operator<=(const Rational& a, const Rational& b) { return a.v_ <= b.v_; }
  friend bool operator>(const Rational& a, const Rational& b) { return a.v_ > b.v_; }
  friend bool operator>=(const Rational& a, const Rational& b) { return a.v_ >= b.v_; }

  const mpq_class& raw() const { return v_; }

 private:
  mpq_class v_;
};

/// 2^-k as an exact rational, k >= 0.
Rational dyadic_pow2(int neg_exponent);

}  // namespace cms
