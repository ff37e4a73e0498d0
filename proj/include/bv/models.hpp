#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bv/bv_ops.hpp"
#include "bv/linalg.hpp"
#include "bv/polynomial.hpp"

namespace bv::models {

/// A chart together with a (candidate) master action.
struct BvModel {
  DarbouxChartPtr chart;
  GradedPolynomial S;
};

/// Classical input data: fields phi^i, action S_cl(phi), gauge generators
/// v_a = v_a^i(phi) d/dphi^i and structure functions f^c_{ab}(phi).
/// All polynomials live over the field-only chart `fields`.
struct GaugeSystem {
  ChartPtr fields;                                     // phi^i, even, ghost 0
  GradedPolynomial S_cl;
  std::vector<std::vector<GradedPolynomial>> v;        // v[a][i]
  std::vector<std::vector<std::vector<GradedPolynomial>>> f;  // f[a][b][c], may be empty

  std::size_t n_fields() const { return fields->size(); }
  std::size_t n_generators() const { return v.size(); }

  /// Checks v_a(S_cl) = 0 for all generators.
  bool generators_preserve_action() const;
};

/// S = S_cl + phi+_i v^i_a c^a + (1/2) f^c_{ab} c+_c c^a c^b over the chart
/// (phi, phi+) + (c, c+). Optional caller-supplied higher-antifield terms are
/// added after grading validation.
BvModel build_bv_ansatz(const GaugeSystem& G,
                        const std::vector<GradedPolynomial>& higher_terms = {});

/// Adjoins n_pairs trivial pairs (b gh -1, b+) and (lambda gh 0, lambda+) and
/// adds lambda_k b+^k to the action.
BvModel nonminimal_extend(const BvModel& m, std::size_t n_pairs);

/// Restriction to the Lagrangian graph(dPsi): substitutes
/// Phi+_I -> (-1)^{eps_I} dL Psi/dPhi^I (the parity sign makes the graph an
/// honest Lagrangian in this library's conventions). Psi must be odd of
/// ghost -1 and antifield-free.
GradedPolynomial gauge_fix(const BvModel& m, const GradedPolynomial& psi);
std::map<VarIndex, GradedPolynomial> gauge_fix_assignment(const DarbouxChartPtr& chart,
                                                          const GradedPolynomial& psi);

/// Closedness residuals R_{JK} = dA_K/dPhi^J - (-1)^{eps_J eps_K} dA_J/dPhi^K
/// of a covector assignment Phi+_I = A_I(Phi); identically zero exactly when
/// the assignment is a gradient, i.e. when its graph is Lagrangian.
std::vector<GradedPolynomial> lagrangian_graph_residuals(
    const DarbouxChartPtr& chart, const std::vector<GradedPolynomial>& assignment);

/// Quadratic Lie algebra data: structure constants and an invariant pairing.
struct QuadraticLie {
  std::vector<std::string> names;
  std::vector<std::vector<std::vector<Rational>>> f;  // [T_a,T_b] = f[a][b][c] T_c
  linalg::Matrix pairing;                             // <T_a, T_b>

  std::size_t dim() const { return names.size(); }
  static QuadraticLie so3();
  static QuadraticLie abelian(std::size_t n);
};

/// Finite-dimensional graded-commutative dg algebra with a degree-3 trace.
/// Products, differential and trace are given on a basis.
struct CdgaBase {
  std::vector<std::string> names;
  std::vector<int> degree;
  // e_i e_j = sum_k mult[i][j][k] e_k (Koszul signs already folded in).
  std::vector<std::vector<std::vector<Rational>>> mult;
  std::vector<std::vector<Rational>> diff;  // d e_i = sum_j diff[i][j] e_j
  std::vector<Rational> trace;              // degree-3 integration functional

  std::size_t dim() const { return names.size(); }
  /// Exterior algebra on three odd generators, zero differential, top trace.
  static CdgaBase superpoint3();
  /// Chevalley-Eilenberg complex of the 3-dim Heisenberg algebra:
  /// d e3 = e1 e2, Poincare trace.
  static CdgaBase heisenberg_ce();
};

/// Chern-Simons action S = (1/2)<A, dA> + (1/6)<A, [A,A]> for the superfield
/// A over base x g, on the Darboux chart of component variables.
/// Errors: degenerate trace, non-invariant Lie pairing.
BvModel chern_simons_superpoint(const QuadraticLie& g, const CdgaBase& base);

/// Reducibility tower W_0 -> W_1 -> ... -> W_p with inner products; the top
/// space carries the gh-0 field, lower levels carry ghosts of increasing
/// ghost number. Consecutive maps must compose to zero.
struct ReducibleTower {
  std::vector<std::size_t> dims;          // dim W_0 .. dim W_p
  std::vector<linalg::Matrix> maps;       // D_k : W_k -> W_{k+1}
  // Optional S_cl = (1/2) <D_top A, D_top A> data.
  std::optional<linalg::Matrix> top_map;  // W_p -> R^m
  // When false, a non-exact tower is not rejected at construction; the broken
  // master action is built anyway so the CME check can exhibit the violation.
  bool validate_exactness = true;

  /// [constants -> C^0 -> C^1] of the triangulated circle on three vertices.
  static ReducibleTower circle3();
};

/// Master action S = S_cl + sum_k <x+_{k+1}, D_k x_k> down the tower, ghosts
/// p-k at level k. Errors: tower with nonzero consecutive composition.
BvModel pform_tower_model(const ReducibleTower& tower);

/// so(3) acting linearly on R^3 with the invariant quartic S_cl = (phi.phi)^2.
GaugeSystem so3_linear_gauge_system();

/// One abelian shift generator on one field, S_cl = 0.
GaugeSystem abelian_shift_system();

}  // namespace bv::models
