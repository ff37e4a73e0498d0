#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bv/bv_ops.hpp"
#include "bv/fourier.hpp"
#include "helpers.hpp"

using namespace bv;
using namespace bv::testing;

namespace {

// Monomials f(x) psi_A with coefficient degree (x-degree) <= cap.
std::vector<GradedPolynomial> source_monomials(const OddFourier& F, std::uint32_t coeff_cap) {
  std::vector<GradedPolynomial> out;
  const Chart& ch = *F.source();
  for (auto& m : all_monomials(ch, coeff_cap + F.dim())) {
    std::uint32_t xdeg = 0;
    for (auto& [v, e] : m.factors())
      if (!ch.var(v).odd()) xdeg += e;
    if (xdeg <= coeff_cap) out.push_back(GradedPolynomial::monomial(F.source(), m, Scalar(1)));
  }
  return out;
}

}  // namespace

TEST_CASE("one dimensional transform values") {
  OddFourier F(1);
  auto one = GradedPolynomial::constant(F.source(), Scalar(1));
  auto psi = GradedPolynomial::variable(F.source(), "psi1");
  auto x = GradedPolynomial::variable(F.source(), "x1");
  auto xi = GradedPolynomial::variable(F.target(), "xi1");
  auto xt = GradedPolynomial::variable(F.target(), "x1");

  CHECK(F.transform(one) == xi);
  CHECK(F.transform(psi) == GradedPolynomial::constant(F.target(), Scalar(1)));

  // sigma(d x) = sigma(psi) = 1 = Delta(x xi) = Delta(sigma(x)).
  CHECK(F.transform(F.de_rham(x)) == GradedPolynomial::constant(F.target(), Scalar(1)));
  CHECK(F.transform(x) == xt * xi);
  CHECK(bv_laplacian(F.transform(x)) == GradedPolynomial::constant(F.target(), Scalar(1)));
}

TEST_CASE("intertwiner sigma d = Delta sigma, n <= 3, coefficient degree <= 2") {
  for (std::uint32_t n = 1; n <= 3; ++n) {
    OddFourier F(n);
    for (const auto& f : source_monomials(F, 2)) {
      CHECK(F.transform(F.de_rham(f)) == bv_laplacian(F.transform(f)));
    }
  }
}

TEST_CASE("inverse transform") {
  for (std::uint32_t n = 1; n <= 3; ++n) {
    OddFourier F(n);
    for (const auto& f : source_monomials(F, 2)) CHECK(F.inverse(F.transform(f)) == f);
    // And on a random combination.
    GradedPolynomial g = rand_polynomial(F.source(), 3);
    CHECK(F.inverse(F.transform(g)) == g);
  }
}
