#pragma once

#include "bv/polynomial.hpp"

namespace bv {

/// Fiberwise odd Fourier transform between functions on Pi T N (coordinates
/// x^1..x^n even of ghost 0, psi^1..psi^n odd of ghost 1) and multivectors on
/// Pi T* N (coordinates x^i with conjugates xi_i of ghost -1), for flat volume
/// on N = R^n.
///
///   sigma(f)(x, xi) = int Dpsi e^{<psi,xi>} f(x, psi),
///
/// with the Berezin convention int Dpsi psi^1...psi^n = 1. sigma intertwines
/// d = psi^i d/dx^i with the BV Laplacian d^2/dx^i dxi_i on the target.
class OddFourier {
 public:
  explicit OddFourier(std::uint32_t n);

  std::uint32_t dim() const { return n_; }
  const ChartPtr& source() const { return src_; }
  /// Target is a Darboux chart with pairs (x^i, xi_i).
  const DarbouxChartPtr& target() const { return dst_; }

  GradedPolynomial transform(const GradedPolynomial& f) const;
  GradedPolynomial inverse(const GradedPolynomial& F) const;

  /// De Rham operator psi^i d/dx^i on the source chart.
  GradedPolynomial de_rham(const GradedPolynomial& f) const;

 private:
  GradedPolynomial to_joint(const GradedPolynomial& f) const;
  GradedPolynomial berezin(const GradedPolynomial& f, bool over_psi) const;
  std::uint32_t n_;
  ChartPtr src_;
  DarbouxChartPtr dst_;
  ChartPtr joint_;
  GradedPolynomial kernel_;  // prod_i (1 + psi^i xi_i) over the joint chart
};

}  // namespace bv
