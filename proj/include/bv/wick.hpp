#pragma once

#include <vector>

#include "bv/linalg.hpp"
#include "bv/polynomial.hpp"

namespace bv::wick {

struct SingularQuadraticForm : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Formal Gaussian weight exp((i/hbar) Q) on a chosen set of integration
/// variables inside a chart. Q must be the hbar-free quadratic form in those
/// variables (parity-blocked by evenness) and invertible on them.
///
/// Moments are normalized: moment(1) = 1. Even variables integrate through
/// the second-order contraction operator exp((i hbar/2) (A^{-1})^{ab} d_b d_a);
/// odd variables through the exact Berezin ratio against the nilpotent
/// exponential of the odd block. Variables of the chart outside the
/// integration set spectate and stay in the result, so the same machinery
/// evaluates fiber integrals with residual fields.
class GaussianWeight {
 public:
  GaussianWeight(GradedPolynomial quadratic, std::vector<VarIndex> integration_vars);

  const GradedPolynomial& quadratic() const { return quad_; }
  const std::vector<VarIndex>& vars() const { return vars_; }
  const ChartPtr& chart() const { return quad_.chart(); }

  /// Normalized Gaussian moment of f (which may contain spectators).
  GradedPolynomial moment(const GradedPolynomial& f) const;
  Scalar moment(const Monomial& m) const;

  /// Two-point function P^{ab} = <y^a y^b>, indexed like integration_vars.
  const std::vector<std::vector<Scalar>>& propagator() const { return prop_; }

 private:
  GradedPolynomial drop_even_vars(const GradedPolynomial& f) const;
  GradedPolynomial quad_;
  std::vector<VarIndex> vars_;
  std::vector<VarIndex> even_vars_, odd_vars_;
  linalg::Matrix even_inverse_;                 // A^{-1} on the even block
  GradedPolynomial odd_exp_;                    // exp((i/h) Q_odd), nilpotent
  Scalar odd_norm_;                             // top coefficient of odd_exp_
  std::vector<std::vector<Scalar>> prop_;
};

/// Normalized formal Gaussian moment of a monomial; the brute-force oracle
/// that every graph expansion is checked against.
Scalar wick_moments(const GaussianWeight& weight, const Monomial& m);

}  // namespace bv::wick
