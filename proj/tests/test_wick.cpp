#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bv/wick.hpp"
#include "helpers.hpp"

using namespace bv;
using namespace bv::wick;

namespace {

ChartPtr xchart() {
  auto ch = std::make_shared<Chart>();
  ch->add("x", 0);
  ch->add("y", 0);
  ch->add("th", 1);
  ch->add("tb", 1);
  ch->add("z1", 0);  // spectator
  return ch;
}

Monomial mono(const ChartPtr& ch, std::initializer_list<const char*> names) {
  std::vector<VarIndex> f;
  for (auto* n : names) f.push_back(ch->index_of(n));
  return Monomial::from_factors(f, *ch)->first;
}

}  // namespace

TEST_CASE("even moments of a one-variable gaussian") {
  auto ch = xchart();
  auto x = GradedPolynomial::variable(ch, "x");
  // Q = (a/2) x^2 with a = 3.
  GaussianWeight w((x * x).scaled(Scalar(Rational(3, 2))), {ch->index_of("x")});

  CHECK(w.moment(Monomial::one()) == Scalar(1));
  CHECK(w.moment(mono(ch, {"x"})).is_zero());  // odd moment
  Scalar x2 = w.moment(mono(ch, {"x", "x"}));
  CHECK(x2 == Scalar::term(GaussianRational(Rational(0), Rational(1, 3)), 1));  // i hbar / a
  Scalar x4 = w.moment(mono(ch, {"x", "x", "x", "x"}));
  CHECK(x4 == x2 * x2 * Scalar(3));  // 3 perfect matchings
}

TEST_CASE("odd pair moment is the inverse block entry") {
  auto ch = xchart();
  auto th = GradedPolynomial::variable(ch, "th"), tb = GradedPolynomial::variable(ch, "tb");
  // Q = b th tb with b = 5.
  GaussianWeight w((th * tb).scaled(Scalar(5)), {ch->index_of("th"), ch->index_of("tb")});
  Scalar m = w.moment(mono(ch, {"th", "tb"}));
  // <th tb> = hbar/(i b) = -i hbar / 5.
  CHECK(m == Scalar::term(GaussianRational(Rational(0), Rational(-1, 5)), 1));
  CHECK(w.moment(mono(ch, {"th"})).is_zero());
}

TEST_CASE("mixed even-odd moments factorize") {
  auto ch = xchart();
  auto x = GradedPolynomial::variable(ch, "x");
  auto th = GradedPolynomial::variable(ch, "th"), tb = GradedPolynomial::variable(ch, "tb");
  GradedPolynomial q = (x * x).scaled(Scalar(Rational(1, 2))) + th * tb;
  GaussianWeight w(q, {ch->index_of("x"), ch->index_of("th"), ch->index_of("tb")});
  Scalar lhs = w.moment(mono(ch, {"x", "x", "th", "tb"}));
  GaussianWeight we((x * x).scaled(Scalar(Rational(1, 2))), {ch->index_of("x")});
  GaussianWeight wo(th * tb, {ch->index_of("th"), ch->index_of("tb")});
  CHECK(lhs == we.moment(mono(ch, {"x", "x"})) * wo.moment(mono(ch, {"th", "tb"})));
}

TEST_CASE("spectators ride along") {
  auto ch = xchart();
  auto x = GradedPolynomial::variable(ch, "x"), z = GradedPolynomial::variable(ch, "z1");
  GaussianWeight w((x * x).scaled(Scalar(Rational(1, 2))), {ch->index_of("x")});
  GradedPolynomial f = z * x * x + z * z;
  GradedPolynomial expect = z.scaled(Scalar::term(GaussianRational::i(), 1)) + z * z;
  CHECK(w.moment(f) == expect);
}

TEST_CASE("wick theorem on two coupled even variables") {
  auto ch = xchart();
  auto x = GradedPolynomial::variable(ch, "x"), y = GradedPolynomial::variable(ch, "y");
  // Q = (x^2 + y^2)/2 + x y; A = [[1,1],[1,1]] is singular, so shift.
  GradedPolynomial q = (x * x + y * y).scaled(Scalar(1)) + x * y;
  GaussianWeight w(q, {ch->index_of("x"), ch->index_of("y")});
  // A = [[2,1],[1,2]], A^{-1} = (1/3)[[2,-1],[-1,2]].
  Scalar xy = w.moment(mono(ch, {"x", "y"}));
  CHECK(xy == Scalar::term(GaussianRational(Rational(0), Rational(-1, 3)), 1));
  Scalar xx = w.moment(mono(ch, {"x", "x"}));
  CHECK(xx == Scalar::term(GaussianRational(Rational(0), Rational(2, 3)), 1));
  // Four-point Wick: <x x y y> = <xx><yy> + 2 <xy>^2.
  Scalar x2y2 = w.moment(mono(ch, {"x", "x", "y", "y"}));
  CHECK(x2y2 == xx * xx + xy * xy * Scalar(2));
}

TEST_CASE("singular forms are reported with kernels") {
  auto ch = xchart();
  auto x = GradedPolynomial::variable(ch, "x"), y = GradedPolynomial::variable(ch, "y");
  GradedPolynomial q = (x * x + y * y).scaled(Scalar(Rational(1, 2))) + x * y;
  CHECK_THROWS_AS(GaussianWeight(q, {ch->index_of("x"), ch->index_of("y")}), SingularQuadraticForm);
  CHECK_THROWS_AS(GaussianWeight(GradedPolynomial(ch), {ch->index_of("th"), ch->index_of("tb")}),
                  SingularQuadraticForm);
}
