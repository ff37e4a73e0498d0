#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bv/perturbation.hpp"
#include "helpers.hpp"

using namespace bv;
using namespace bv::models;
using namespace bv::pert;

namespace {

Caps small_caps() { return Caps{2, 3, 6}; }

DarbouxChartPtr one_pair() {
  auto ch = std::make_shared<DarbouxChart>();
  ch->add_pair("phi", 0, "phi+");
  return ch;
}

}  // namespace

TEST_CASE("free theory expands to zero") {
  auto ch = one_pair();
  auto phi = GradedPolynomial::variable(ch, "phi");
  BvModel m{ch, (phi * phi).scaled(Scalar(Rational(1, 2)))};
  EffectiveSeries w = bv_integral_expansion(m, GradedPolynomial::zero(ch), small_caps());
  CHECK(w.action.is_zero());
}

TEST_CASE("one even variable, cubic interaction, two loops") {
  auto ch = one_pair();
  auto phi = GradedPolynomial::variable(ch, "phi");
  GradedPolynomial S = (phi * phi).scaled(Scalar(Rational(1, 2))) + phi * phi * phi;
  BvModel m{ch, S};
  EffectiveSeries w = bv_integral_expansion(m, GradedPolynomial::zero(ch), small_caps());

  // Hand value: log Z = (15/2) i g^2 hbar at one loop order of log Z
  // (theta graph 3i + dumbbell 9i/2, equal to the Wick count 15/2 from
  // <x^6> = 15 (i hbar)^3), so W = (15/2) g^2 hbar^2 with g = 1.
  CHECK(w.action.constant_term() == Scalar::term(GaussianRational(Rational(15, 2)), 2));

  // Exact agreement with the Wick oracle.
  std::vector<VarIndex> fields = {ch->index_of("phi")};
  GradedPolynomial oracle = connected_expansion_oracle(S, fields, small_caps());
  GradedPolynomial graph = connected_expansion(S, fields, small_caps());
  // The oracle carries loop orders beyond loop_cap at hbar^{>loop_cap};
  // below that order both routes must agree exactly.
  CHECK(graph.hbar_truncated(2) == oracle.hbar_truncated(2));
}

TEST_CASE("ghost loop has the opposite sign of a boson loop") {
  auto chb = std::make_shared<Chart>();
  chb->add("z", 0);
  chb->add("x", 0);
  auto z = GradedPolynomial::variable(chb, "z"), x = GradedPolynomial::variable(chb, "x");
  GradedPolynomial Sb = (x * x).scaled(Scalar(Rational(1, 2))) + z * x * x;
  GradedPolynomial wb = connected_expansion(Sb, {chb->index_of("x")}, small_caps());

  auto chf = std::make_shared<Chart>();
  chf->add("z", 0);
  chf->add("th", 1);
  chf->add("tb", 1);
  auto zf = GradedPolynomial::variable(chf, "z");
  auto th = GradedPolynomial::variable(chf, "th"), tb = GradedPolynomial::variable(chf, "tb");
  GradedPolynomial Sf = th * tb + zf * th * tb;
  GradedPolynomial wf = connected_expansion(Sf, {chf->index_of("th"), chf->index_of("tb")},
                                            small_caps());

  Scalar cb = wb.coeff(Monomial::variable(chb->index_of("z")));
  Scalar cf = wf.coeff(Monomial::variable(chf->index_of("z")));
  CHECK(cb == Scalar::term(GaussianRational(Rational(0), Rational(1)), 1));  // i hbar z
  CHECK(cf == -cb);

  // And both routes agree on each.
  CHECK(connected_expansion_oracle(Sb, {chb->index_of("x")}, small_caps()) == wb);
  CHECK(connected_expansion_oracle(Sf, {chf->index_of("th"), chf->index_of("tb")}, small_caps()) ==
        wf);
}

TEST_CASE("graph sum equals the wick oracle on randomized configurations") {
  // <= 4 integration variables (2 even + odd pair), spectators, <= 2 loops.
  for (int trial = 0; trial < 6; ++trial) {
    auto ch = std::make_shared<Chart>();
    ch->add("u", 0);
    ch->add("v", 0);
    ch->add("th", 1);
    ch->add("tb", 1);
    ch->add("s", 0);  // spectator
    std::vector<VarIndex> ivars = {0, 1, 2, 3};
    auto u = GradedPolynomial::variable(ch, "u"), v = GradedPolynomial::variable(ch, "v");
    auto th = GradedPolynomial::variable(ch, "th"), tb = GradedPolynomial::variable(ch, "tb");
    auto s = GradedPolynomial::variable(ch, "s");
    GradedPolynomial S = (u * u + v * v).scaled(Scalar(Rational(1, 2))) + th * tb;
    // Random interaction out of a fixed menu, with random small coefficients.
    std::vector<GradedPolynomial> menu = {u * u * u,  u * v * v,       th * tb * u,
                                          s * u * u,  s * th * tb,    u * u * u * u,
                                          s * s * u,  v * v * th * tb};
    for (auto& term : menu)
      if (bv::testing::rand_int(0, 1))
        S += term.scaled(Scalar(GaussianRational(Rational(bv::testing::rand_int(-2, 2), 3))));
    Caps caps{2, 3, 4};
    GradedPolynomial graph = connected_expansion(S, ivars, caps);
    GradedPolynomial oracle = connected_expansion_oracle(S, ivars, caps);
    CHECK(graph.hbar_truncated(caps.loop_cap) == oracle.hbar_truncated(caps.loop_cap));
  }
}

namespace {

// Parabolic gauge orbit: fields (u, q), one generator v = d/dq + q d/du,
// invariant classical action S_cl = (1/2)(u - q^2/2)^2. The gauge-fixed
// weight mixes (u, q, lambda) with genuinely t-dependent propagators, so
// gauge independence of the expansion is a real cancellation here.
BvModel parabolic_gauge_model() {
  GaugeSystem G;
  auto fields = std::make_shared<Chart>();
  fields->add("u", 0);
  fields->add("q", 0);
  G.fields = fields;
  auto u = GradedPolynomial::variable(G.fields, "u");
  auto q = GradedPolynomial::variable(G.fields, "q");
  GradedPolynomial orbit = u - (q * q).scaled(Scalar(Rational(1, 2)));
  G.S_cl = (orbit * orbit).scaled(Scalar(Rational(1, 2)));
  G.v = {{q, GradedPolynomial::constant(G.fields, Scalar(1))}};  // v^u = q, v^q = 1
  return nonminimal_extend(build_bv_ansatz(G), 1);
}

}  // namespace

TEST_CASE("gauge independence on the parabolic model") {
  auto m = parabolic_gauge_model();
  REQUIRE(check_qme(m.S).pass);
  auto u = GradedPolynomial::variable(m.chart, "u");
  auto q = GradedPolynomial::variable(m.chart, "q");
  auto b = GradedPolynomial::variable(m.chart, "b1");
  Caps caps{2, 2, 4};

  std::vector<GradedPolynomial> family = {b * q, b * u};
  auto rep = gauge_independence_derivative(m, family, caps);
  CHECK(rep.pass);
  CHECK(rep.samples.size() >= 2);

  std::vector<GradedPolynomial> family2 = {b * q, b * (u + u * u)};
  CHECK(gauge_independence_derivative(m, family2, caps).pass);

  // A constant family is trivially independent.
  CHECK(gauge_independence_derivative(m, {b * q}, caps).pass);

  // Negative control: break the invariance of the classical action.
  BvModel bad{m.chart, m.S + GradedPolynomial::variable(m.chart, "u+") *
                                 GradedPolynomial::variable(m.chart, "q") *
                                 GradedPolynomial::variable(m.chart, "c1")};
  CHECK(!check_cme(bad.S).pass);
  auto rep_bad = gauge_independence_derivative(bad, family, caps);
  CHECK(!rep_bad.pass);
  CHECK(!rep_bad.witness.is_zero());
}

TEST_CASE("delta-exact insertions integrate to zero") {
  auto ch = one_pair();
  auto phi = GradedPolynomial::variable(ch, "phi"), phip = GradedPolynomial::variable(ch, "phi+");
  BvModel m{ch, (phi * phi).scaled(Scalar(Rational(1, 2)))};

  CHECK(delta_exact_vanishing(m, GradedPolynomial::zero(ch), GradedPolynomial::zero(ch), small_caps())
            .is_zero());
  CHECK(delta_exact_vanishing(m, phi * phip, GradedPolynomial::zero(ch), small_caps()).is_zero());

  // Random odd g on a two-pair interacting model, one loop.
  auto ch2 = std::make_shared<DarbouxChart>();
  ch2->add_pair("u", 0, "u+");
  ch2->add_pair("v", 0, "v+");
  auto u = GradedPolynomial::variable(ch2, "u"), v = GradedPolynomial::variable(ch2, "v");
  BvModel m2{ch2, (u * u + v * v).scaled(Scalar(Rational(1, 2))) + u * u * v};
  REQUIRE(check_qme(m2.S).pass);
  Caps caps{1, 2, 4};
  for (int t = 0; t < 10; ++t) {
    GradedPolynomial g = bv::testing::rand_homogeneous_parity(ch2, 3, Parity::Odd);
    CHECK(delta_exact_vanishing(m2, g, GradedPolynomial::zero(ch2), caps).is_zero());
  }
}

TEST_CASE("fiber integral with empty fiber is the identity") {
  auto m0 = build_bv_ansatz(abelian_shift_system());
  FiberSplit split;  // nothing in X2
  Propagator K{linalg::Matrix(m0.chart->size(), linalg::Vector(m0.chart->size()))};
  EffectiveSeries s1 = fiber_bv_effective_action(m0, split, K, small_caps());
  CHECK(s1.action == m0.S.substitute({}, s1.chart));
}

TEST_CASE("contractible pair integrates away") {
  // X1 = one even pair with interactions; X2 = an acyclic complex
  // (f, e) with S2 = e+ f; no mixed terms, so S1 is the plain restriction.
  auto ch = std::make_shared<DarbouxChart>();
  ch->add_pair("u", 0, "u+");
  ch->add_pair("e", 0, "e+");
  ch->add_pair("f", 1, "f+");
  auto u = GradedPolynomial::variable(ch, "u");
  auto e = GradedPolynomial::variable(ch, "e"), ep = GradedPolynomial::variable(ch, "e+");
  auto f = GradedPolynomial::variable(ch, "f");
  GradedPolynomial S = (u * u).scaled(Scalar(Rational(1, 2))) + u * u * u + ep * f;
  BvModel m{ch, S};
  REQUIRE(check_cme(m.S).pass);

  FiberSplit split{{1, 2}};
  std::size_t n = ch->size();
  bool built = false;
  for (int s1 : {1, -1})
    for (int s2 : {1, -1}) {
      Propagator K{linalg::Matrix(n, linalg::Vector(n))};
      // V-degrees: e 1, e+ 2, f 0, f+ 3; K has degree -1: e -> f, f+ -> e+.
      K.K[ch->index_of("f")][ch->index_of("e")] = GaussianRational(s1);
      K.K[ch->index_of("e+")][ch->index_of("f+")] = GaussianRational(s2);
      try {
        validate_propagator(m, split, K);
        EffectiveSeries eff = fiber_bv_effective_action(m, split, K, small_caps());
        GradedPolynomial expect =
            ((u * u).scaled(Scalar(Rational(1, 2))) + u * u * u).substitute({}, eff.chart);
        CHECK(eff.action == expect);
        built = true;
      } catch (const std::invalid_argument&) {
        continue;
      }
    }
  CHECK(built);
}

TEST_CASE("transfer with empty fiber is the identity") {
  auto m = chern_simons_superpoint(QuadraticLie::so3(), CdgaBase::heisenberg_ce());
  FiberSplit empty;
  Propagator K{linalg::Matrix(m.chart->size(), linalg::Vector(m.chart->size()))};
  Caps caps{2, 2, 6};
  CyclicLinfty A1 = homotopy_transfer(m, empty, K, caps);
  CyclicLinfty A = extract_linfty(m.S.degree_truncated(caps.degree_cap), m.chart);
  REQUIRE(A1.ops.size() == A.ops.size());
  for (auto& [n, op] : A.ops) CHECK(A1.ops.at(n).components() == op.components());
}

TEST_CASE("delta-exact observables push forward to zero") {
  // Fiberwise BV Stokes: for g supported on the fiber of a product model,
  // the induced observable Delta(g e^{iS/h}) e^{-iS/h} integrates to zero.
  auto ch = std::make_shared<DarbouxChart>();
  ch->add_pair("u", 0, "u+");
  ch->add_pair("e", 0, "e+");
  ch->add_pair("f", 1, "f+");
  auto u = GradedPolynomial::variable(ch, "u");
  auto e = GradedPolynomial::variable(ch, "e"), ep = GradedPolynomial::variable(ch, "e+");
  auto f = GradedPolynomial::variable(ch, "f"), fp = GradedPolynomial::variable(ch, "f+");
  GradedPolynomial S = (u * u).scaled(Scalar(Rational(1, 2))) + u * u * u + ep * f;
  BvModel m{ch, S};
  REQUIRE(check_qme(m.S).pass);
  FiberSplit split{{1, 2}};
  std::size_t n = ch->size();
  Propagator K{linalg::Matrix(n, linalg::Vector(n))};
  bool found = false;
  for (int s1 : {1, -1})
    for (int s2 : {1, -1}) {
      if (found) continue;
      K.K.assign(n, linalg::Vector(n));
      K.K[ch->index_of("f")][ch->index_of("e")] = GaussianRational(s1);
      K.K[ch->index_of("e+")][ch->index_of("f+")] = GaussianRational(s2);
      try {
        validate_propagator(m, split, K);
        found = true;
      } catch (const std::invalid_argument&) {
      }
    }
  REQUIRE(found);
  Caps caps{2, 2, 4};
  for (const GradedPolynomial& g : {e * fp, ep * fp * f, e * ep * fp}) {
    auto par = g.parity();
    REQUIRE(par.has_value());
    GradedPolynomial O = bv_laplacian(g);
    O += antibracket(g, m.S)
             .hbar_shifted(-1)
             .scaled(Scalar::i() * Scalar(*par == Parity::Odd ? -1 : 1));
    REQUIRE(check_observable(m.S, O).pass);
    GradedPolynomial via_frame = observable_pushforward(m, O, split, K, caps);
    CHECK(via_frame.is_zero());
  }
}

TEST_CASE("heisenberg transfer: massey bracket by two independent routes") {
  auto m = chern_simons_superpoint(QuadraticLie::so3(), CdgaBase::heisenberg_ce());
  auto data = cs_heisenberg_transfer_data(m);
  REQUIRE(data.has_value());
  Caps caps{2, 2, 4};

  CyclicLinfty A1 = homotopy_transfer(m, data->first, data->second, caps);
  CHECK(check_cyclicity(A1).pass);
  auto l3 = A1.ops.find(3);
  REQUIRE(l3 != A1.ops.end());
  CHECK(!l3->second.is_zero());  // nontrivial Massey bracket

  EffectiveSeries eff = fiber_bv_effective_action(m, data->first, data->second, caps);
  // QME descent within the caps.
  auto qme = check_qme(eff.action);
  CHECK(qme.residual.hbar_truncated(caps.loop_cap).is_zero());
  // Tree part equals the transfer, tensor-exactly.
  CyclicLinfty A0 = extract_linfty(eff.action.hbar_slice(0).degree_truncated(caps.degree_cap),
                                   eff.chart);
  REQUIRE(A0.ops.count(3));
  CHECK(A0.ops.at(3).components() == l3->second.components());
  for (auto& [nn, op] : A1.ops) {
    REQUIRE(A0.ops.count(nn));
    CHECK(A0.ops.at(nn).components() == op.components());
  }
  // Homotopy Jacobi holds on the transferred structure (m <= 3 spot check).
  for (int mm = 1; mm <= 3; ++mm) {
    std::vector<std::uint32_t> t(static_cast<std::size_t>(mm), 0);
    bool ok = true;
    std::function<void(int, std::uint32_t)> rec = [&](int pos, std::uint32_t lo) {
      if (!ok) return;
      if (pos == mm) {
        for (auto& x : check_homotopy_jacobi(A1, mm, t))
          if (!x.is_zero()) ok = false;
        return;
      }
      for (std::uint32_t a = lo; a < A1.space.dim(); ++a) {
        t[static_cast<std::size_t>(pos)] = a;
        rec(pos + 1, a);
      }
    };
    rec(0, 0);
    CHECK(ok);
  }
}

TEST_CASE("observable pushforward") {
  auto ch = std::make_shared<DarbouxChart>();
  ch->add_pair("u", 0, "u+");
  ch->add_pair("e", 0, "e+");
  ch->add_pair("f", 1, "f+");
  auto u = GradedPolynomial::variable(ch, "u");
  auto ep = GradedPolynomial::variable(ch, "e+");
  auto f = GradedPolynomial::variable(ch, "f");
  GradedPolynomial S = (u * u).scaled(Scalar(Rational(1, 2))) + ep * f;
  BvModel m{ch, S};
  FiberSplit split{{1, 2}};
  std::size_t n = ch->size();
  Propagator K{linalg::Matrix(n, linalg::Vector(n))};
  bool found = false;
  for (int s1 : {1, -1})
    for (int s2 : {1, -1}) {
      if (found) continue;
      K.K.assign(n, linalg::Vector(n));
      K.K[ch->index_of("f")][ch->index_of("e")] = GaussianRational(s1);
      K.K[ch->index_of("e+")][ch->index_of("f+")] = GaussianRational(s2);
      try {
        validate_propagator(m, split, K);
        found = true;
      } catch (const std::invalid_argument&) {
      }
    }
  REQUIRE(found);

  auto one = GradedPolynomial::constant(ch, Scalar(1));
  CHECK(observable_pushforward(m, one, split, K, small_caps()) ==
        GradedPolynomial::constant(fiber_bv_effective_action(m, split, K, small_caps()).chart,
                                   Scalar(1)));
  // O linear on X1 passes through at tree level here (no mixed terms).
  GradedPolynomial pushed = observable_pushforward(m, u, split, K, small_caps());
  CHECK(pushed == u.substitute({}, pushed.chart()));
}

TEST_CASE("zinn-justin on a gauge model: gamma satisfies the cme in the sources") {
  // The parabolic model has nondegenerate (b c), (lambda q) and u blocks
  // after fixing with Psi = b q, so the full Zinn-Justin statement is
  // nontrivial: Gamma(K, K+) satisfies the CME with respect to the source
  // chart, order by order to the loop cap.
  auto m = parabolic_gauge_model();
  REQUIRE(check_qme(m.S).pass);
  GradedPolynomial psi = GradedPolynomial::variable(m.chart, "b1") *
                         GradedPolynomial::variable(m.chart, "q");
  Caps caps{1, 1, 4};
  auto zj = zinn_justin_effective_action(m, psi, caps);
  CHECK(!zj.gamma.is_zero());
  // Antifield sources appear through the shifted fermion.
  bool has_kplus = false;
  for (auto& [mono, c] : zj.gamma.terms())
    for (auto& [v, e] : mono.factors())
      has_kplus = has_kplus || zj.source_chart->var(v).name.rfind("K+_", 0) == 0;
  CHECK(has_kplus);
  GradedPolynomial residual = antibracket(zj.gamma, zj.gamma).hbar_truncated(caps.loop_cap);
  CHECK(residual.is_zero());
}

TEST_CASE("zinn-justin on the cubic toy") {
  auto ch = one_pair();
  auto phi = GradedPolynomial::variable(ch, "phi");
  GradedPolynomial S = (phi * phi).scaled(Scalar(Rational(1, 2))) + phi * phi * phi;
  BvModel m{ch, S};
  Caps caps{1, 1, 6};

  auto zj = zinn_justin_effective_action(m, GradedPolynomial::zero(ch), caps);
  // Tree level: Gamma = S relabeled to the source chart.
  auto K = GradedPolynomial::variable(zj.source_chart, "K_phi");
  GradedPolynomial expect_tree = (K * K).scaled(Scalar(Rational(1, 2))) + K * K * K;
  CHECK(zj.gamma.hbar_slice(0) == expect_tree);
  // Free theory: Gamma = S at all computed orders.
  BvModel free{ch, (phi * phi).scaled(Scalar(Rational(1, 2)))};
  auto zjf = zinn_justin_effective_action(free, GradedPolynomial::zero(ch), caps);
  CHECK(zjf.gamma == (K * K).scaled(Scalar(Rational(1, 2))).substitute({}, zj.source_chart));
  // CME of Gamma (trivially zero here, but exercised through the bracket).
  CHECK(antibracket(zj.gamma, zj.gamma).is_zero());

  // Legendre duality against the connected generating function through hbar^1:
  // W(J) = Gamma(K*) + J K* with dGamma/dK(K*) = -J.
  auto chj = std::make_shared<Chart>();
  chj->add("phi", 0);
  chj->add("J", 0);
  auto phj = GradedPolynomial::variable(chj, "phi");
  auto J = GradedPolynomial::variable(chj, "J");
  GradedPolynomial SJ = (phj * phj).scaled(Scalar(Rational(1, 2))) + phj * phj * phj + J * phj;
  Caps capsj{1, 1, 4};
  GradedPolynomial W = connected_expansion_oracle(SJ, {chj->index_of("phi")}, capsj,
                                                  /*allow_linear_sources=*/true);
  // One-particle-reducible trees contribute to W but not Gamma; solve the
  // stationarity K* = K*(J) iteratively on the source side.
  auto chk = std::make_shared<Chart>();
  chk->add("K_phi", 0);
  chk->add("J", 0);
  GradedPolynomial gammaJ = zj.gamma.substitute({}, chk);
  auto Kj = GradedPolynomial::variable(chk, "K_phi");
  auto Jj = GradedPolynomial::variable(chk, "J");
  GradedPolynomial kstar(chk);
  for (int it = 0; it < 8; ++it) {
    // K = -J - dGamma_int/dK with Gamma = K^2/2 + Gamma_int.
    GradedPolynomial gint = gammaJ - (Kj * Kj).scaled(Scalar(Rational(1, 2)));
    kstar = (-Jj - gint.derive("K_phi", Side::Left).substitute({{chk->index_of("K_phi"), kstar}}))
                .degree_truncated(5)
                .hbar_truncated(1);
  }
  GradedPolynomial lhs = W.substitute({}, chk);
  GradedPolynomial rhs = gammaJ.substitute({{chk->index_of("K_phi"), kstar}}) + Jj * kstar;
  CHECK((lhs - rhs).hbar_truncated(1).degree_truncated(3).is_zero());
}
