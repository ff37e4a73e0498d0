#include "bv/fourier.hpp"

#include <stdexcept>

namespace bv {

namespace {
std::string xname(std::uint32_t i) { return "x" + std::to_string(i + 1); }
std::string pname(std::uint32_t i) { return "psi" + std::to_string(i + 1); }
std::string qname(std::uint32_t i) { return "xi" + std::to_string(i + 1); }
}  // namespace

OddFourier::OddFourier(std::uint32_t n) : n_(n) {
  auto src = std::make_shared<Chart>();
  for (std::uint32_t i = 0; i < n; ++i) src->add(xname(i), 0);
  for (std::uint32_t i = 0; i < n; ++i) src->add(pname(i), 1);
  src_ = src;

  auto dst = std::make_shared<DarbouxChart>();
  for (std::uint32_t i = 0; i < n; ++i) dst->add_pair(xname(i), 0, qname(i));
  dst_ = dst;
}

// The transform acts monomial-wise: psi_A maps to s(A) xi_{A^c} with
// s(A) = (-1)^{sum_{j in A} (j-1)}, the unique sign rule (up to overall
// normalization, fixed by sigma(1) = xi_1...xi_n) for which sigma intertwines
// d = psi^i d/dx^i with the divergence d^2/dx^i dxi_i. The x-dependence
// spectates.
GradedPolynomial OddFourier::transform(const GradedPolynomial& f) const {
  if (*f.chart() != *src_) throw ChartError("OddFourier::transform: expected source-chart input");
  GradedPolynomial out(dst_);
  for (auto& [m, c] : f.terms()) {
    std::vector<bool> in_a(n_, false);
    int sign_exp = 0;
    std::vector<VarIndex> out_factors;
    for (auto& [v, e] : m.factors()) {
      if (src_->var(v).odd()) {
        std::uint32_t j = v - n_;
        in_a[j] = true;
        sign_exp += static_cast<int>(j);  // (j-1) in 1-based labels
      } else {
        VarIndex xv = dst_->index_of(src_->var(v).name);
        for (std::uint32_t k = 0; k < e; ++k) out_factors.push_back(xv);
      }
    }
    for (std::uint32_t i = 0; i < n_; ++i)
      if (!in_a[i]) out_factors.push_back(dst_->index_of(qname(i)));
    auto mono = Monomial::from_factors(out_factors, *dst_);
    if (!mono) continue;
    Scalar coeff = c;
    if ((sign_exp % 2 != 0) != (mono->second < 0)) coeff = -coeff;
    out += GradedPolynomial::monomial(dst_, mono->first, coeff);
  }
  return out;
}

GradedPolynomial OddFourier::inverse(const GradedPolynomial& F) const {
  if (*F.chart() != *dst_) throw ChartError("OddFourier::inverse: expected target-chart input");
  GradedPolynomial out(src_);
  for (auto& [m, c] : F.terms()) {
    std::vector<bool> in_b(n_, false);
    std::vector<VarIndex> out_factors;
    for (auto& [v, e] : m.factors()) {
      const std::string& name = F.chart()->var(v).name;
      if (name.rfind("xi", 0) == 0) {
        in_b[static_cast<std::uint32_t>(std::stoul(name.substr(2))) - 1] = true;
      } else {
        VarIndex xv = src_->index_of(name);
        for (std::uint32_t k = 0; k < e; ++k) out_factors.push_back(xv);
      }
    }
    // xi_B came from psi_A with A = B^c; undo sigma's sign.
    int sign_exp = 0;
    std::vector<VarIndex> psi_factors;
    for (std::uint32_t i = 0; i < n_; ++i)
      if (!in_b[i]) {
        psi_factors.push_back(src_->index_of(pname(i)));
        sign_exp += static_cast<int>(i);
      }
    // sigma(psi_A) = s(A) xi_B with the xi factors emitted ascending; the
    // resort sign of that emission is what `mono->second` carried in
    // transform. Recompute it to divide it out exactly.
    std::vector<VarIndex> probe_factors;
    for (auto v : out_factors) probe_factors.push_back(dst_->index_of(src_->var(v).name));
    for (std::uint32_t i = 0; i < n_; ++i)
      if (in_b[i]) probe_factors.push_back(dst_->index_of(qname(i)));
    auto probe = Monomial::from_factors(probe_factors, *dst_);
    int emit_sign = probe ? probe->second : 1;

    for (auto v : psi_factors) out_factors.push_back(v);
    auto mono = Monomial::from_factors(out_factors, *src_);
    if (!mono) continue;
    Scalar coeff = c;
    if ((sign_exp % 2 != 0) != ((mono->second * emit_sign) < 0)) coeff = -coeff;
    out += GradedPolynomial::monomial(src_, mono->first, coeff);
  }
  return out;
}

GradedPolynomial OddFourier::de_rham(const GradedPolynomial& f) const {
  if (*f.chart() != *src_) throw ChartError("OddFourier::de_rham: expected source-chart input");
  GradedPolynomial r(src_);
  for (std::uint32_t i = 0; i < n_; ++i)
    r += GradedPolynomial::variable(src_, pname(i)) * f.derive(src_->index_of(xname(i)), Side::Left);
  return r;
}

}  // namespace bv
