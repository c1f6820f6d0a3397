#include <doctest.h>

#include <stdexcept>

#include "kercoup/rational.hpp"

using kercoup::Rational;

TEST_CASE("rational arithmetic is exact and canonical") {
  const Rational a(1, 3), b(1, 6);
  CHECK(a + b == Rational(1, 2));
  CHECK(a - b == Rational(1, 6));
  CHECK(a * b == Rational(1, 18));
  CHECK(a / b == Rational(2));
  CHECK((Rational(2, 4)).str() == "1/2");
  CHECK((Rational(-2, 4)).str() == "-1/2");
  CHECK(Rational(3, -6) == Rational(-1, 2));  // denominator sign normalized
  CHECK(Rational(7, 1).str() == "7");
}

TEST_CASE("rational parse round trip") {
  for (const char* s : {"0", "1", "-1", "1/2", "-3/7", "12345678901234567890/7"}) {
    const Rational v = Rational::parse(s);
    CHECK(Rational::parse(v.str()) == v);
    CHECK(v.str() == s);
  }
  CHECK(Rational::parse("2/4") == Rational(1, 2));
  CHECK_THROWS_AS(Rational::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(Rational::parse("abc"), std::invalid_argument);
  CHECK_THROWS_AS(Rational::parse("1.5"), std::invalid_argument);
  CHECK_THROWS_AS(Rational::parse("1/0"), std::invalid_argument);
}

TEST_CASE("rational comparisons and helpers") {
  CHECK(Rational(1, 3) < Rational(1, 2));
  CHECK(Rational(-1, 2).is_negative());
  CHECK(Rational(0).is_zero());
  CHECK(Rational(-2, 3).abs() == Rational(2, 3));
  CHECK(kercoup::min(Rational(1, 3), Rational(1, 4)) == Rational(1, 4));
  CHECK(kercoup::max(Rational(1, 3), Rational(1, 4)) == Rational(1, 3));
  CHECK_THROWS_AS(Rational(1) / Rational(0), std::domain_error);
  CHECK(Rational(1, 3).to_double() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("huge denominators stay exact") {
  Rational x(1, 3);
  for (int i = 0; i < 40; ++i) x = x * Rational(1, 7) + Rational(1, 11);
  Rational y = x;
  for (int i = 0; i < 40; ++i) y = (y - Rational(1, 11)) * Rational(7);
  CHECK(y == Rational(1, 3));
}
