#pragma once

#include <optional>
#include <vector>

#include "bv/polynomial.hpp"

namespace bv {

struct ExpansionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sign conventions, frozen once for the whole library.
///
/// Antibracket, summed over Darboux pairs (x, xi) = (Phi^I, Phi+_I):
///
///   (f,g) = sum_I (-1)^{gh(x_I)} [ dR f/dx_I * dL g/dxi_I
///                                 - dR f/dxi_I * dL g/dx_I ]
///
/// with dR/dL the graded right/left derivatives. The per-pair prefactor
/// (-1)^{gh(x)} equals (-1)^{parity(x)}.
///
/// BV Laplacian:
///
///   Delta f = sum_I dL/dx_I ( dL/dxi_I f )
///
/// with no additional per-pair sign. The two derivatives commute (one
/// variable of each pair is even). Under these two definitions Delta^2 = 0
/// and the second-order-derivation identity
///
///   Delta(fg) = Delta(f) g + (-1)^{parity f} f Delta(g) + (-1)^{parity f} (f,g)
///
/// hold identically; both are enforced by the test suite, which pins the
/// convention up to the stated overall choices.
GradedPolynomial antibracket(const GradedPolynomial& f, const GradedPolynomial& g);

GradedPolynomial bv_laplacian(const GradedPolynomial& f);

/// Log-density g of a volume twist mu = e^g mu_0; g must be even of ghost 0.
struct VolumeTwist {
  GradedPolynomial g;
  explicit VolumeTwist(GradedPolynomial log_density);
};

/// Delta_mu(f) = Delta(f) + (1/2)(g, f); reduces to bv_laplacian at g = 0.
GradedPolynomial bv_laplacian_mu(const GradedPolynomial& f, const VolumeTwist& twist);

/// Residual of Delta_mu-compatibility, Delta(g)/2 + (g,g)/8, truncated to the
/// degree cap. Zero means the twisted Laplacian squares to zero there.
GradedPolynomial twist_compatibility_residual(const VolumeTwist& twist, std::uint32_t degree_cap);

/// Delta(fg) - Delta(f)g - (-1)^{eps f} f Delta(g) - (-1)^{eps f} (f,g).
/// Throws GradingError when f is parity-inhomogeneous.
GradedPolynomial bv_algebra_residual(const GradedPolynomial& f, const GradedPolynomial& g);

/// BRST operator Q = (S, -). S must be even of ghost 0.
GradedPolynomial brst(const GradedPolynomial& S, const GradedPolynomial& f);

struct CmeReport {
  bool pass = false;
  GradedPolynomial witness;  // (S,S) when nonzero
};
CmeReport check_cme(const GradedPolynomial& S);

struct QmeReport {
  bool pass = false;
  std::optional<int> violation_order;       // lowest failing hbar order
  GradedPolynomial witness;                  // slice at that order
  GradedPolynomial residual;                 // (1/2)(S,S) - i hbar Delta S
  std::vector<GradedPolynomial> chain;       // residual slices, order 0..max
};
QmeReport check_qme(const GradedPolynomial& S_hbar);

struct ObservableReport {
  bool pass = false;
  bool classical = false;  // (S_0, O) = 0
  GradedPolynomial witness;
};
ObservableReport check_observable(const GradedPolynomial& S_hbar, const GradedPolynomial& O);

/// Order-by-order solution of the QME chain: given an hbar-free CME solution S
/// and corrections S^(1..k-1), solves (S, S^(k)) = i Delta S^(k-1)
///   - (1/2) sum_{a+b=k, a,b>=1} (S^(a), S^(b))
/// for S^(k) in the space of even ghost-0 polynomials of degree <= degree_cap.
struct QmeOrderResult {
  enum class Status { Solved, Obstruction, CapTooSmall };
  Status status;
  GradedPolynomial value;    // S^(k) when solved
  GradedPolynomial witness;  // the Q-closed, non-exact right-hand side otherwise
  std::uint32_t working_cap = 0;  // for CapTooSmall: a cap that admits a solution
};
QmeOrderResult qme_order_solve(const GradedPolynomial& S,
                               const std::vector<GradedPolynomial>& priors, int k,
                               std::uint32_t degree_cap);

/// Finite quantum canonical transformation
///   e^{iS'/h} = e^{iS/h} + Delta(e^{iS/h} R),
/// expanded as S' = S - i hbar log(1 + u) with
///   u = e^{-iS/h} Delta(e^{iS/h} R)
///     = -(qme residual of S) h^{-2} R + Delta R + i h^{-1} (S, R).
/// The log series must terminate: either u is nilpotent (exact result) or u
/// has strictly positive minimal hbar order (exact modulo hbar^{hbar_cap+1}).
/// Otherwise, or when the exact result leaves the polynomial ring, throws
/// ExpansionError. R must be odd of ghost -1.
GradedPolynomial canonical_transform(const GradedPolynomial& S_hbar, const GradedPolynomial& R,
                                     int hbar_cap, std::uint32_t power_cap = 64);

/// Monomial basis of the subspace with the given ghost number, parity implied
/// by the ghost, and total degree <= cap.
std::vector<Monomial> monomial_basis(const Chart& chart, int ghost, std::uint32_t degree_cap);

}  // namespace bv
