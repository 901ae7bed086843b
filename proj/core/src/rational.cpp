#include "cms/rational.hpp"

#include <cctype>
#include <cmath>

namespace cms {

namespace {

bool valid_integer_literal(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

}  // namespace

Rational::Rational(long num, long den) {
  if (den == 0) throw SpecError("zero denominator");
  v_ = mpq_class(num, den);
  v_.canonicalize();
}

Rational& Rational::operator/=(const Rational& o) {
  if (o.is_zero()) throw SpecError("division by zero rational");
  v_ /= o.v_;
  return *this;
}

Rational Rational::parse(const std::string& text) {
  auto slash = text.find('/');
  if (slash == std::string::npos) {
    if (!valid_integer_literal(text))
      throw SpecError("malformed rational literal: '" + text + "'");
    return Rational(mpq_class(mpz_class(text, 10)));
  }
  std::string num = text.substr(0, slash);
  std::string den = text.substr(slash + 1);
  if (!valid_integer_literal(num) || !valid_integer_literal(den))
    throw SpecError("malformed rational literal: '" + text + "'");
  mpz_class d(den, 10);
  if (d == 0) throw SpecError("zero denominator in rational literal: '" + text + "'");
  mpq_class q(mpz_class(num, 10), d);
  q.canonicalize();
  return Rational(q);
}

Rational Rational::from_double(double x) {
  if (!std::isfinite(x)) throw SpecError("cannot convert non-finite double to rational");
  mpq_class q;
  mpq_set_d(q.get_mpq_t(), x);
  return Rational(q);
}

std::string Rational::str() const { return v_.get_str(); }

Rational Rational::abs() const { return Rational(mpq_class(::abs(v_))); }

Rational dyadic_pow2(int neg_exponent) {
  mpz_class den = 1;
  den <<= neg_exponent;
  mpq_class q(1, den);
  q.canonicalize();
  return Rational(q);
}

}  // namespace cms
