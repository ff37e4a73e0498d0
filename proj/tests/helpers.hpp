#pragma once

#include <random>
#include <vector>

#include "bv/bv_ops.hpp"
#include "bv/polynomial.hpp"

namespace bv::testing {

/// Deterministic RNG for property tests.
inline std::mt19937& rng() {
  static std::mt19937 gen(0x5eed);
  return gen;
}

inline long rand_int(long lo, long hi) {
  std::uniform_int_distribution<long> d(lo, hi);
  return d(rng());
}

inline GaussianRational rand_gaussian() {
  Rational re(rand_int(-6, 6), rand_int(1, 4));
  re.canonicalize();
  Rational im(rand_int(-6, 6), rand_int(1, 4));
  im.canonicalize();
  return {re, im};
}

inline Scalar rand_scalar(int max_hbar = 2) {
  Scalar s;
  int nterms = static_cast<int>(rand_int(0, 3));
  for (int t = 0; t < nterms; ++t)
    s += Scalar::term(rand_gaussian(), static_cast<int>(rand_int(0, max_hbar)));
  return s;
}

/// All monomials over the chart with total degree <= cap.
inline std::vector<Monomial> all_monomials(const Chart& chart, std::uint32_t cap) {
  std::vector<Monomial> out;
  std::vector<VarIndex> stack;
  auto rec = [&](auto&& self, VarIndex v, std::uint32_t left) -> void {
    if (v == chart.size()) {
      out.push_back(Monomial::from_factors(stack, chart)->first);
      return;
    }
    std::uint32_t mx = chart.var(v).odd() ? std::min<std::uint32_t>(1, left) : left;
    for (std::uint32_t e = 0; e <= mx; ++e) {
      for (std::uint32_t k = 0; k < e; ++k) stack.push_back(v);
      self(self, v + 1, left - e);
      for (std::uint32_t k = 0; k < e; ++k) stack.pop_back();
    }
  };
  rec(rec, 0, cap);
  return out;
}

inline GradedPolynomial rand_polynomial(const ChartPtr& chart, std::uint32_t max_degree,
                                        int nterms = 4) {
  auto monos = all_monomials(*chart, max_degree);
  GradedPolynomial p(chart);
  for (int t = 0; t < nterms; ++t) {
    const Monomial& m = monos[static_cast<std::size_t>(rand_int(0, static_cast<long>(monos.size()) - 1))];
    p += GradedPolynomial::monomial(chart, m, rand_scalar());
  }
  return p;
}

/// Random nonzero parity-homogeneous polynomial (hbar-free coefficients).
inline GradedPolynomial rand_homogeneous_parity(const ChartPtr& chart, std::uint32_t max_degree,
                                                Parity parity, int nterms = 3) {
  auto monos = all_monomials(*chart, max_degree);
  std::vector<Monomial> pool;
  for (auto& m : monos)
    if (m.parity(*chart) == parity) pool.push_back(m);
  GradedPolynomial p(chart);
  for (int tries = 0; p.is_zero() && tries < 50; ++tries) {
    for (int t = 0; t < nterms; ++t) {
      const Monomial& m = pool[static_cast<std::size_t>(rand_int(0, static_cast<long>(pool.size()) - 1))];
      p += GradedPolynomial::monomial(chart, m, Scalar(rand_gaussian()));
    }
  }
  return p;
}

/// Three-pair mixed-parity Darboux chart used across the BV tests.
inline DarbouxChartPtr three_pair_chart() {
  auto ch = std::make_shared<DarbouxChart>();
  ch->add_pair("phi", 0, "phi+");
  ch->add_pair("c", 1, "c+");
  ch->add_pair("z", 2, "z+");
  return ch;
}

}  // namespace bv::testing
