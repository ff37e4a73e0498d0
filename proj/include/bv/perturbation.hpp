#pragma once

#include <optional>
#include <vector>

#include "bv/graphs.hpp"
#include "bv/linfty.hpp"
#include "bv/models.hpp"
#include "bv/wick.hpp"

namespace bv::pert {

/// Truncation caps of every expansion. All claims are exact within the caps:
/// loop_cap bounds graph loop numbers, hbar_cap the hbar order of effective
/// actions, degree_cap the polynomial degree in residual (spectator) fields.
struct Caps {
  int loop_cap = 2;
  int hbar_cap = 3;
  std::uint32_t degree_cap = 6;
};

/// Effective action over a residual chart, polynomial in hbar;
/// log Z = (i/hbar) action.
struct EffectiveSeries {
  DarbouxChartPtr chart;
  GradedPolynomial action;
};

/// Eliminates the integration variables from S by formal stationary phase
/// around zero: returns (spectator part of S) - i hbar log Z with log Z the
/// sum over connected graphs built from the interaction terms, propagator
/// from the hbar^0 quadratic part, weighted by 1/|Aut|. Errors: degenerate
/// quadratic part; hbar^0 linear terms in the integration variables
/// (displaced saddle) unless allow_linear_sources (they are then dropped by
/// the one-particle-irreducible filter, which only_1pi enables).
GradedPolynomial connected_expansion(const GradedPolynomial& S_full,
                                     const std::vector<VarIndex>& int_vars, const Caps& caps,
                                     bool only_1pi = false, bool allow_linear_sources = false);

/// Independent oracle for the same quantity: moments of exp((i/hbar) S_int)
/// against the Gaussian weight, with a formal series logarithm. No graphs,
/// no symmetry factors, no connectivity bookkeeping.
GradedPolynomial connected_expansion_oracle(const GradedPolynomial& S_full,
                                            const std::vector<VarIndex>& int_vars, const Caps& caps,
                                            bool allow_linear_sources = false);

/// Normalized expectation <O exp((i/hbar) S_int)> / <exp((i/hbar) S_int)>,
/// exact within the caps (oracle route).
GradedPolynomial insertion_expectation(const GradedPolynomial& S_full, const GradedPolynomial& O,
                                       const std::vector<VarIndex>& int_vars, const Caps& caps);

/// BV integral over the Lagrangian graph(dPsi): gauge-fixes S and expands
/// log Z over connected vacuum graphs. The returned series has a trivial
/// residual chart; its action is -i hbar log Z.
EffectiveSeries bv_integral_expansion(const models::BvModel& m, const GradedPolynomial& psi,
                                      const Caps& caps);

struct GaugeIndependenceReport {
  bool pass = false;
  std::vector<std::pair<Rational, Scalar>> samples;  // (t, W(t))
  std::vector<Rational> degenerate_t;                // skipped sample points
  Scalar witness;                                    // first nonzero W(t)-W(t0)
};

/// Certifies d/dt of the expansion along the fermion family
/// Psi_t = sum_j t^j family[j] by exact polynomial identity testing: W(t) is
/// evaluated at more rational sample points than a computed degree bound, so
/// all-equal samples prove the derivative vanishes identically.
GaugeIndependenceReport gauge_independence_derivative(const models::BvModel& m,
                                                      const std::vector<GradedPolynomial>& family,
                                                      const Caps& caps);

/// Expectation of the Delta-exact insertion Delta(g e^{iS/h}) e^{-iS/h} =
/// Delta g + (-1)^{eps g} (i/hbar)(g, S) on the Lagrangian graph(dPsi).
/// Vanishes order by order when S solves the QME (BV Stokes (b)).
GradedPolynomial delta_exact_vanishing(const models::BvModel& m, const GradedPolynomial& g,
                                       const GradedPolynomial& psi, const Caps& caps);

/// Symplectically orthogonal split of the Darboux pairs: indices of the
/// pairs spanning X_2 (the fiber to integrate out).
struct FiberSplit {
  std::vector<std::size_t> x2_pairs;
};

/// Chain homotopy data: matrix on the chart variables (V-basis), mapping
/// e_a to sum_b K[b][a] e_b. Must have V-degree -1, square to zero, be
/// supported on V_2, kill V_1, satisfy l1 K + K l1 = id - proj_{V1}, and have
/// omega-isotropic image.
struct Propagator {
  linalg::Matrix K;
};

/// Throws when the propagator data violates any required identity.
void validate_propagator(const models::BvModel& m, const FiberSplit& split, const Propagator& K);

/// Fiber BV integral over the Lagrangian im(K) in X_2: returns the effective
/// action on X_1 as a connected-graph expansion with propagator edges from
/// the quadratic form on im(K). The output satisfies the QME to the caps
/// whenever the input does.
EffectiveSeries fiber_bv_effective_action(const models::BvModel& m, const FiberSplit& split,
                                          const Propagator& K, const Caps& caps);

/// Homotopy transfer of the cyclic structure onto V_1, computed by the
/// independent tree route: iterative elimination of the fiber fields through
/// their stationarity equations on im(K) (the unrolling of the rooted-tree
/// sum), then extraction over the residual chart. Agrees tensor-exactly with
/// the hbar^0 part of fiber_bv_effective_action.
CyclicLinfty homotopy_transfer(const models::BvModel& m, const FiberSplit& split,
                               const Propagator& K, const Caps& caps);

/// The averaging map O -> <O>_fiber: pushforward of an observable along the
/// fiber integral, normalized by the effective partition function.
GradedPolynomial observable_pushforward(const models::BvModel& m, const GradedPolynomial& O,
                                        const FiberSplit& split, const Propagator& K,
                                        const Caps& caps);

/// Zinn-Justin effective action: sources K (classical fields) and K+
/// (antifield sources realized through the shifted fermion
/// Psi~ = Psi + K+_I Phi^I), computed with the background-field split
/// Phi = K + y as the one-particle-irreducible part of the y-expansion.
/// Gamma = S(K, dPsi/dK + K+) at tree level and satisfies the CME in
/// (K, K+) order by order when S solves the QME.
struct ZinnJustinResult {
  DarbouxChartPtr source_chart;  // pairs (K_I, K+_I)
  GradedPolynomial gamma;
};
ZinnJustinResult zinn_justin_effective_action(const models::BvModel& m, const GradedPolynomial& psi,
                                              const Caps& caps);

/// Canonical transfer data for Chern-Simons models over the Heisenberg
/// Chevalley-Eilenberg base: X_2 = the (e3, e12) component pairs (the acyclic
/// piece d e3 = e12), K the contraction e12 -> e3 with the sign fixed by the
/// homotopy identity. Returns nullopt when the chart does not look like such
/// a model.
std::optional<std::pair<FiberSplit, Propagator>> cs_heisenberg_transfer_data(
    const models::BvModel& m);

/// Exposed for tests: the window truncation used by all series arithmetic
/// here. Keeps hbar order <= hbar_cap + (degree_cap - degree)/2 and degree
/// <= degree_cap, which no later multiplication can re-enter once dropped.
GradedPolynomial window_truncate(const GradedPolynomial& f, int hbar_cap,
                                 std::uint32_t degree_cap,
                                 const std::vector<VarIndex>& spectator_degree_vars);

}  // namespace bv::pert
