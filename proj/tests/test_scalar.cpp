#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bv/scalar.hpp"
#include "helpers.hpp"

using namespace bv;
using namespace bv::testing;

TEST_CASE("gaussian rational arithmetic") {
  GaussianRational a(Rational(1, 2), Rational(-1, 3));
  GaussianRational b(Rational(2), Rational(5));
  CHECK(a + b == GaussianRational(Rational(5, 2), Rational(14, 3)));
  CHECK(GaussianRational::i() * GaussianRational::i() == GaussianRational(-1));
  CHECK((a * b) / b == a);
  CHECK((a / b) * b == a);
}

TEST_CASE("scalar basics") {
  Scalar h = Scalar::hbar();
  Scalar x = Scalar(3) + h * Scalar(2);
  CHECK(x.coeff(0) == GaussianRational(3));
  CHECK(x.coeff(1) == GaussianRational(2));
  CHECK(x.min_order() == 0);
  CHECK(x.max_order() == 1);
  CHECK(x.is_polynomial());
  CHECK(!x.shifted(-2).is_polynomial());
  CHECK(x.shifted(-2).shifted(2) == x);
  CHECK((x - x).is_zero());
  CHECK(Scalar::i() * Scalar::i() == Scalar(-1));
  CHECK(x.truncated_above(0) == Scalar(3));
  Scalar unit = Scalar::term(GaussianRational(Rational(2)), 3);
  CHECK((x * unit).div_unit(unit) == x);
}

TEST_CASE("no stored zero coefficients") {
  Scalar a = Scalar::term(GaussianRational(1), 2);
  Scalar b = Scalar::term(GaussianRational(-1), 2);
  CHECK((a + b).terms().empty());
  CHECK(a + b == Scalar());
}

TEST_CASE("ring axioms on 1000 random triples") {
  for (int t = 0; t < 1000; ++t) {
    Scalar a = rand_scalar(), b = rand_scalar(), c = rand_scalar();
    CHECK((a * b) * c == a * (b * c));
    CHECK(a * (b + c) == a * b + a * c);
    CHECK((a + b) + c == a + (b + c));
    CHECK(a * b == b * a);
    CHECK(a + b == b + a);
    CHECK((a - a).is_zero());
    CHECK(a * Scalar(1) == a);
    CHECK((a * Scalar()).is_zero());
  }
}
