#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bv/linfty.hpp"
#include "bv/models.hpp"
#include <array>

#include "helpers.hpp"

using namespace bv;
using namespace bv::models;
using namespace bv::testing;

namespace {

std::vector<BvModel> model_library() {
  std::vector<BvModel> lib;
  lib.push_back(build_bv_ansatz(abelian_shift_system()));
  lib.push_back(chern_simons_superpoint(QuadraticLie::so3(), CdgaBase::superpoint3()));
  lib.push_back(chern_simons_superpoint(QuadraticLie::so3(), CdgaBase::heisenberg_ce()));
  lib.push_back(pform_tower_model(ReducibleTower::circle3()));
  return lib;
}

// All ascending m-tuples over the basis.
void each_sorted_tuple(std::size_t dim, int m,
                       const std::function<void(const std::vector<std::uint32_t>&)>& fn) {
  std::vector<std::uint32_t> t(static_cast<std::size_t>(m));
  std::function<void(int, std::uint32_t)> rec = [&](int pos, std::uint32_t lo) {
    if (pos == m) {
      fn(t);
      return;
    }
    for (std::uint32_t a = lo; a < dim; ++a) {
      t[static_cast<std::size_t>(pos)] = a;
      rec(pos + 1, a);
    }
  };
  rec(0, 0);
}

bool vec_zero(const linalg::Vector& v) {
  for (auto& x : v)
    if (!x.is_zero()) return false;
  return true;
}

// Independent residual route: m-fold Taylor tensors of (1/2)(S,S), raised
// with the inverse pairing. Proportional to the shuffle-sum residual.
linalg::Vector bracket_route_residual(const GradedPolynomial& S, const CyclicLinfty& A,
                                      const std::vector<std::uint32_t>& inputs) {
  GradedPolynomial half_ss = antibracket(S, S).scaled(Scalar(Rational(1, 2)));
  GradedPolynomial part = half_ss.homogeneous_part(static_cast<std::uint32_t>(inputs.size()) + 1);
  GradedPolynomial tmp = part;
  for (std::size_t i = inputs.size(); i-- > 0;) tmp = tmp.derive(inputs[i], Side::Right);
  linalg::Vector c(A.space.dim());
  for (std::uint32_t b = 0; b < A.space.dim(); ++b) {
    Scalar coeff = tmp.derive(b, Side::Right).constant_term();
    if (!coeff.is_zero()) c[b] = coeff.coeff(0);
  }
  return linalg::mul(A.pairing.inverse(), c);
}

}  // namespace

TEST_CASE("quadratic action extracts a differential only") {
  auto ch = std::make_shared<DarbouxChart>();
  ch->add_pair("phi", 0, "phi+");
  auto phi = GradedPolynomial::variable(ch, "phi");
  GradedPolynomial S = (phi * phi).scaled(Scalar(Rational(1, 2)));
  CyclicLinfty A = extract_linfty(S, ch);
  CHECK(A.ops.size() == 1);
  CHECK(A.ops.count(1) == 1);
  CHECK(reconstruct_action(A, ch) == S);
  CHECK(check_cyclicity(A).pass);

  // l_1 maps e_phi to +- e_{phi+} and kills e_{phi+} (degree reasons).
  linalg::Vector v = A.apply(1, {0});
  CHECK(v[0].is_zero());
  CHECK(!v[1].is_zero());
  CHECK(vec_zero(A.apply(1, {1})));
}

TEST_CASE("roundtrip extract/reconstruct on the model library") {
  for (const auto& m : model_library()) {
    if (m.S.is_zero()) continue;
    CyclicLinfty A = extract_linfty(m.S, m.chart);
    CHECK(reconstruct_action(A, m.chart) == m.S);
    CHECK(check_cyclicity(A).pass);
  }
}

TEST_CASE("roundtrip on random cyclic structures") {
  // Random CME-independent cyclic data: extract from random even ghost-0
  // polynomials starting at degree 2 (cyclicity is automatic for extracted
  // tensors), then reconstruct.
  auto ch = std::make_shared<DarbouxChart>();
  ch->add_pair("phi", 0, "phi+");
  ch->add_pair("c", 1, "c+");
  auto monos = all_monomials(*ch, 4);
  for (int t = 0; t < 50; ++t) {
    GradedPolynomial S(ch);
    for (auto& m : monos) {
      if (m.degree() < 2) continue;
      if (m.ghost(*ch) != 0) continue;
      if (rand_int(0, 2) == 0) S += GradedPolynomial::monomial(ch, m, Scalar(rand_gaussian()));
    }
    if (S.is_zero()) continue;
    CyclicLinfty A = extract_linfty(S, ch);
    CHECK(reconstruct_action(A, ch) == S);
    CHECK(check_cyclicity(A).pass);
  }
}

TEST_CASE("homotopy jacobi identities vanish for cme solutions") {
  for (const auto& m : model_library()) {
    if (m.S.is_zero()) continue;
    REQUIRE(check_cme(m.S).pass);
    CyclicLinfty A = extract_linfty(m.S, m.chart);
    for (int mm = 1; mm <= 4; ++mm) {
      each_sorted_tuple(A.space.dim(), mm, [&](const std::vector<std::uint32_t>& t) {
        CHECK(vec_zero(check_homotopy_jacobi(A, mm, t)));
      });
    }
  }
}

TEST_CASE("superpoint extraction is the wedge-bracket dgla") {
  // d = 0 on the theta superpoint, so l1 vanishes; l2 is the wedge product
  // tensored with the Lie bracket. Check the extracted cyclic tensors against
  // the independently constructed trace data: <e_z, l2(e_x, e_y)> must be
  // proportional (one global constant) to tr(e_I e_J e_K) f_{ab}^c kappa.
  auto g = QuadraticLie::so3();
  auto base = CdgaBase::superpoint3();
  auto m = chern_simons_superpoint(g, base);
  CyclicLinfty A = extract_linfty(m.S, m.chart);
  CHECK(A.ops.count(1) == 0);
  REQUIRE(A.ops.count(2) == 1);

  // Locate each chart variable's (lie, base) labels by name.
  auto parse = [&](std::size_t slot) {
    const std::string& n = m.chart->var(static_cast<VarIndex>(slot)).name;
    auto us = n.find('_');
    std::size_t a = 0, i = 0;
    for (std::size_t k = 0; k < g.names.size(); ++k)
      if (g.names[k] == n.substr(0, us)) a = k;
    for (std::size_t k = 0; k < base.names.size(); ++k)
      if (base.names[k] == n.substr(us + 1)) i = k;
    return std::make_pair(a, i);
  };
  // Antifield components were rescaled by tr(e_i e_{i^c}) at construction.
  auto rescale = [&](std::size_t i) {
    if (base.degree[i] <= 1) return Rational(1);
    Rational t(0);
    for (std::size_t j = 0; j < base.dim(); ++j) {
      Rational s(0);
      for (std::size_t k = 0; k < base.dim(); ++k)
        if (base.mult[j][i][k] != 0 && base.trace[k] != 0) s += base.mult[j][i][k] * base.trace[k];
      if (s != 0) t = s;
    }
    return t;
  };
  auto expected = [&](std::size_t x, std::size_t y, std::size_t z) -> Rational {
    auto [a, i] = parse(x);
    auto [b, j] = parse(y);
    auto [c, k] = parse(z);
    // tr(e_k e_i e_j) f_{ab}^m kappa_{mc}, with the component rescales.
    Rational val(0);
    for (std::size_t ij = 0; ij < base.dim(); ++ij) {
      if (base.mult[i][j][ij] == 0) continue;
      Rational t(0);
      for (std::size_t top = 0; top < base.dim(); ++top)
        if (base.mult[k][ij][top] != 0 && base.trace[top] != 0)
          t += base.mult[k][ij][top] * base.trace[top];
      if (t == 0) continue;
      for (std::size_t mm = 0; mm < g.dim(); ++mm)
        if (g.f[a][b][mm] != 0 && !g.pairing[mm][c].is_zero())
          val += base.mult[i][j][ij] * t * g.f[a][b][mm] * g.pairing[mm][c].re();
    }
    return val * rescale(i) * rescale(j) * rescale(k);
  };

  // The stored tensors live in the suspended symmetric normal form, so they
  // differ from the naive algebra data by degree-local suspension signs: the
  // ratio must be one constant per degree triple.
  std::map<std::array<int, 3>, GaussianRational> lambda;
  int nonzero = 0;
  std::size_t dim = A.space.dim();
  for (std::size_t z = 0; z < dim; ++z)
    for (std::size_t x = 0; x < dim; ++x)
      for (std::size_t y = x; y < dim; ++y) {
        GaussianRational got = A.cyclic_tensor({static_cast<std::uint32_t>(z),
                                                static_cast<std::uint32_t>(x),
                                                static_cast<std::uint32_t>(y)});
        Rational want = expected(x, y, z);
        if (want == 0) {
          CHECK(got.is_zero());
          continue;
        }
        ++nonzero;
        REQUIRE(!got.is_zero());
        GaussianRational ratio = got / GaussianRational(want);
        std::array<int, 3> key = {A.space.degree(z), A.space.degree(x), A.space.degree(y)};
        auto [it, fresh] = lambda.try_emplace(key, ratio);
        if (!fresh) CHECK(it->second == ratio);
      }
  CHECK(nonzero > 0);
}

TEST_CASE("dgla relations on the heisenberg model") {
  auto m = chern_simons_superpoint(QuadraticLie::so3(), CdgaBase::heisenberg_ce());
  CyclicLinfty A = extract_linfty(m.S, m.chart);
  CHECK(A.ops.count(1) == 1);  // l1 = d
  CHECK(A.ops.count(2) == 1);  // l2 = bracket
  CHECK(A.ops.count(3) == 0);  // strict dgLa

  // m=1: l1 l1 = 0; m=2: Leibniz; m=3: Jacobi. Checked above exhaustively;
  // here also check the degree bookkeeping of the stored tensors.
  for (const auto& [n, op] : A.ops)
    for (const auto& [key, vec] : op.components()) {
      int din = 0;
      for (auto a : key) din += A.space.degree(a);
      for (std::size_t b = 0; b < vec.size(); ++b)
        if (!vec[b].is_zero())
          CHECK(A.space.degree(b) == din + 2 - n);
    }
}

TEST_CASE("jacobi residuals vanish on a genuine l3-bearing structure") {
  // The CS models are strict dgLas, which cannot discriminate the relative
  // signs between different (r,s) shuffle blocks. A canonical coordinate
  // shift Phi+ -> Phi+ + dPsi/dPhi is an exact symplectomorphism, so the
  // shifted so(3) action still solves the CME but carries operations of
  // arity >= 3 whose Jacobi identities mix the blocks.
  auto m0 = build_bv_ansatz(so3_linear_gauge_system());
  auto m = nonminimal_extend(m0, 1);
  auto p1 = GradedPolynomial::variable(m.chart, "p1"), p2 = GradedPolynomial::variable(m.chart, "p2");
  GradedPolynomial F = p1 * p2 + p1 * p1 * p1;
  GradedPolynomial psi = GradedPolynomial::variable(m.chart, "b1") * F;
  std::map<VarIndex, GradedPolynomial> shift;
  for (const auto& pr : m.chart->pairs()) {
    int sgn = m.chart->var(pr.field).odd() ? -1 : 1;
    shift.emplace(pr.antifield, GradedPolynomial::variable(m.chart, pr.antifield) +
                                    psi.derive(pr.field, Side::Left).scaled(Scalar(sgn)));
  }
  GradedPolynomial S = m.S.substitute(shift);
  REQUIRE(check_cme(S).pass);
  REQUIRE(S.min_degree() >= 2);

  CyclicLinfty A = extract_linfty(S, m.chart);
  bool has_higher = false;
  for (auto& [n, op] : A.ops) has_higher = has_higher || n >= 3;
  CHECK(has_higher);
  CHECK(reconstruct_action(A, m.chart) == S);
  CHECK(check_cyclicity(A).pass);
  for (int mm = 1; mm <= 4; ++mm) {
    each_sorted_tuple(A.space.dim(), mm, [&](const std::vector<std::uint32_t>& t) {
      CHECK(vec_zero(check_homotopy_jacobi(A, mm, t)));
    });
  }
}

TEST_CASE("homotopy jacobi detects a broken structure") {
  auto m = chern_simons_superpoint(QuadraticLie::so3(), CdgaBase::heisenberg_ce());
  GradedPolynomial cubic = m.S.homogeneous_part(3);
  auto first = cubic.terms().begin();
  GradedPolynomial S_bad =
      m.S + GradedPolynomial::monomial(m.chart, first->first, first->second);
  REQUIRE(!check_cme(S_bad).pass);
  CyclicLinfty A = extract_linfty(S_bad, m.chart);

  bool shuffle_nonzero = false, oracle_nonzero = false;
  for (int mm = 1; mm <= 3; ++mm) {
    each_sorted_tuple(A.space.dim(), mm, [&](const std::vector<std::uint32_t>& t) {
      if (!shuffle_nonzero && !vec_zero(check_homotopy_jacobi(A, mm, t))) shuffle_nonzero = true;
      if (!oracle_nonzero && !vec_zero(bracket_route_residual(S_bad, A, t))) oracle_nonzero = true;
    });
  }
  CHECK(shuffle_nonzero);
  CHECK(oracle_nonzero);
}

TEST_CASE("cyclicity violation is detected") {
  auto m = chern_simons_superpoint(QuadraticLie::so3(), CdgaBase::superpoint3());
  CyclicLinfty A = extract_linfty(m.S, m.chart);
  REQUIRE(check_cyclicity(A).pass);

  // Perturb one l2 component.
  auto& op = A.ops.at(2);
  auto comp = op.components().begin()->first;
  linalg::Vector v = op.components().begin()->second;
  v[0] += GaussianRational(1);
  auto mutated = A;
  mutated.ops.at(2).set(comp, v);
  auto rep = check_cyclicity(mutated);
  CHECK(!rep.pass);
  CHECK(rep.arity == 2);
  CHECK(rep.witness.size() == 3);
}

TEST_CASE("quantum family") {
  auto ch = std::make_shared<DarbouxChart>();
  ch->add_pair("phi", 0, "phi+");
  ch->add_pair("c", 1, "c+");
  auto phi = GradedPolynomial::variable(ch, "phi"), phip = GradedPolynomial::variable(ch, "phi+"),
       c = GradedPolynomial::variable(ch, "c");

  // Classical action only: the c^{(0)} family matches the pairing-contracted
  // classical tensors.
  GradedPolynomial S = phip * phi * c + (phi * phi).scaled(Scalar(Rational(1, 2)));
  QuantumLinfty Q = extract_quantum_linfty(S, ch);
  CyclicLinfty A = extract_linfty(S, ch);
  for (const auto& [nl, tensor] : Q.c) {
    auto [n, l] = nl;
    CHECK(l == 0);
    if (n < 2) continue;
    for (const auto& [key, val] : tensor) {
      std::vector<std::uint32_t> rest(key.begin() + 1, key.end());
      GaussianRational expect = A.cyclic_tensor(key);
      CHECK(val == expect);
    }
  }
  CHECK(reassemble_quantum_action(Q, ch) == S);

  // One hbar correction: exactly one c_2^{(1)} entry.
  GradedPolynomial S_h = S + (phi * phi).scaled(Scalar::hbar());
  QuantumLinfty Qh = extract_quantum_linfty(S_h, ch);
  CHECK(Qh.c.count({2, 1}) == 1);
  CHECK(Qh.c.at({2, 1}).size() == 1);
  CHECK(reassemble_quantum_action(Qh, ch) == S_h);
}
