#include "bv/wick.hpp"

#include <algorithm>
#include <sstream>

namespace bv::wick {

namespace {

GaussianRational scalar_gq(const Scalar& s, const char* who) {
  if (s.is_zero()) return {};
  if (s.min_order() != 0 || s.max_order() != 0)
    throw GradingError(std::string(who) + ": quadratic form must be hbar-free");
  return s.coeff(0);
}

std::string kernel_report(const linalg::Matrix& m, const Chart& chart,
                          const std::vector<VarIndex>& vars) {
  std::ostringstream os;
  os << "kernel:";
  for (const auto& v : linalg::nullspace(m)) {
    os << " [";
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!v[i].is_zero()) os << " " << v[i].str() << "*" << chart.var(vars[i]).name;
    os << " ]";
  }
  return os.str();
}

}  // namespace

GaussianWeight::GaussianWeight(GradedPolynomial quadratic, std::vector<VarIndex> integration_vars)
    : quad_(std::move(quadratic)), vars_(std::move(integration_vars)) {
  const Chart& chart = *quad_.chart();
  if (!quad_.parity_is(Parity::Even))
    throw GradingError("GaussianWeight: quadratic form must be even");
  for (auto& [m, c] : quad_.terms()) {
    if (m.degree() != 2)
      throw GradingError("GaussianWeight: weight exponent must be homogeneous quadratic");
    for (auto& [v, e] : m.factors())
      if (std::find(vars_.begin(), vars_.end(), v) == vars_.end())
        throw GradingError("GaussianWeight: quadratic form touches a spectator variable");
    (void)scalar_gq(c, "GaussianWeight");
  }
  for (VarIndex v : vars_)
    (chart.var(v).odd() ? odd_vars_ : even_vars_).push_back(v);
  std::sort(odd_vars_.begin(), odd_vars_.end());

  // Even block A_ab = d_b d_a Q, inverted exactly.
  std::size_t ne = even_vars_.size();
  if (ne > 0) {
    linalg::Matrix A(ne, linalg::Vector(ne));
    for (std::size_t a = 0; a < ne; ++a)
      for (std::size_t b = 0; b < ne; ++b)
        A[a][b] = scalar_gq(
            quad_.derive(even_vars_[a], Side::Left).derive(even_vars_[b], Side::Left).constant_term(),
            "GaussianWeight");
    auto inv = linalg::inverse(A);
    if (!inv)
      throw SingularQuadraticForm("GaussianWeight: even block singular; " +
                                  kernel_report(A, chart, even_vars_));
    even_inverse_ = std::move(*inv);
  }

  // Odd block: nilpotent exponential of (i/hbar) Q_odd and its Berezin top.
  GradedPolynomial q_odd(quad_.chart());
  for (auto& [m, c] : quad_.terms()) {
    bool odd_term = false;
    for (auto& [v, e] : m.factors()) odd_term = odd_term || chart.var(v).odd();
    if (odd_term) q_odd += GradedPolynomial::monomial(quad_.chart(), m, c);
  }
  odd_exp_ = GradedPolynomial::constant(quad_.chart(), Scalar(1));
  {
    GradedPolynomial x = q_odd.scaled(Scalar::term(GaussianRational::i(), -1));
    GradedPolynomial power = x;
    Rational fact(1);
    for (int k = 1; !power.is_zero(); ++k) {
      fact *= k;
      odd_exp_ += power.scaled(Scalar(Rational(1) / fact));
      power = power * x;
    }
  }
  {
    GradedPolynomial top = odd_exp_;
    for (VarIndex v : odd_vars_) top = top.derive(v, Side::Left);
    odd_norm_ = top.constant_term();
    if (!odd_vars_.empty() && odd_norm_.is_zero()) {
      std::size_t no = odd_vars_.size();
      linalg::Matrix B(no, linalg::Vector(no));
      for (std::size_t a = 0; a < no; ++a)
        for (std::size_t b = 0; b < no; ++b)
          B[a][b] = scalar_gq(
              quad_.derive(odd_vars_[a], Side::Left).derive(odd_vars_[b], Side::Left).constant_term(),
              "GaussianWeight");
      throw SingularQuadraticForm("GaussianWeight: odd block singular; " +
                                  kernel_report(B, chart, odd_vars_));
    }
    if (odd_vars_.empty()) odd_norm_ = Scalar(1);
  }

  prop_.assign(vars_.size(), std::vector<Scalar>(vars_.size()));
  for (std::size_t a = 0; a < vars_.size(); ++a)
    for (std::size_t b = 0; b < vars_.size(); ++b) {
      auto m = Monomial::mul(Monomial::variable(vars_[a]), Monomial::variable(vars_[b]), chart);
      if (!m) continue;
      Scalar v = moment(m->first);
      prop_[a][b] = m->second < 0 ? -v : v;
    }
}

GradedPolynomial GaussianWeight::drop_even_vars(const GradedPolynomial& f) const {
  std::map<VarIndex, GradedPolynomial> zeros;
  for (VarIndex v : even_vars_) zeros.emplace(v, GradedPolynomial::zero(f.chart()));
  return even_vars_.empty() ? f : f.substitute(zeros);
}

GradedPolynomial GaussianWeight::moment(const GradedPolynomial& f) const {
  // exp(C) with C = (i hbar / 2) (A^{-1})_{ab} dL_b dL_a, then evaluate the
  // even variables at zero.
  GradedPolynomial acc = f;
  if (!even_vars_.empty()) {
    GradedPolynomial power = f;
    Rational fact(1);
    for (int k = 1; !power.is_zero(); ++k) {
      GradedPolynomial next(f.chart());
      for (std::size_t a = 0; a < even_vars_.size(); ++a) {
        GradedPolynomial da = power.derive(even_vars_[a], Side::Left);
        if (da.is_zero()) continue;
        for (std::size_t b = 0; b < even_vars_.size(); ++b) {
          if (even_inverse_[a][b].is_zero()) continue;
          GradedPolynomial dba = da.derive(even_vars_[b], Side::Left);
          if (dba.is_zero()) continue;
          next += dba.scaled(Scalar::term(even_inverse_[a][b] * GaussianRational(Rational(1, 2)), 0));
        }
      }
      power = next.scaled(Scalar::term(GaussianRational::i(), 1));
      fact *= k;
      if (!power.is_zero()) acc += power.scaled(Scalar(Rational(1) / fact));
    }
    acc = drop_even_vars(acc);
  } else {
    acc = f;
  }
  // Berezin ratio over the odd block.
  if (!odd_vars_.empty()) {
    GradedPolynomial num = acc * odd_exp_;
    for (VarIndex v : odd_vars_) num = num.derive(v, Side::Left);
    Scalar inv_norm = Scalar(1).div_unit(odd_norm_);
    acc = num.scaled(inv_norm);
  }
  return acc;
}

Scalar GaussianWeight::moment(const Monomial& m) const {
  GradedPolynomial r = moment(GradedPolynomial::monomial(quad_.chart(), m, Scalar(1)));
  for (auto& [mono, c] : r.terms())
    if (!mono.is_one())
      throw GradingError("GaussianWeight::moment: monomial touches spectator variables");
  return r.constant_term();
}

Scalar wick_moments(const GaussianWeight& weight, const Monomial& m) { return weight.moment(m); }

}  // namespace bv::wick
