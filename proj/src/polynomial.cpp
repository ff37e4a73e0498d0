#include "bv/polynomial.hpp"

#include <algorithm>
#include <sstream>

namespace bv {

std::uint32_t Monomial::degree() const {
  std::uint32_t d = 0;
  for (auto& [v, e] : f_) d += e;
  return d;
}

std::uint32_t Monomial::exponent(VarIndex v) const {
  for (auto& [w, e] : f_)
    if (w == v) return e;
  return 0;
}

int Monomial::ghost(const Chart& chart) const {
  int g = 0;
  for (auto& [v, e] : f_) g += chart.var(v).ghost * static_cast<int>(e);
  return g;
}

Parity Monomial::parity(const Chart& chart) const { return parity_of_ghost(ghost(chart)); }

std::optional<std::pair<Monomial, int>> Monomial::mul(const Monomial& a, const Monomial& b,
                                                      const Chart& chart) {
  Monomial out;
  out.f_.reserve(a.f_.size() + b.f_.size());
  // Merge the two sorted factor lists. Each odd factor of b crosses every odd
  // factor of a with a larger variable index; each crossing contributes -1.
  std::size_t ia = 0, ib = 0;
  int odd_tail = 0;  // odd factors of a at position >= ia
  for (auto& [v, e] : a.f_)
    if (chart.var(v).odd()) ++odd_tail;
  int sign = 1;
  while (ia < a.f_.size() || ib < b.f_.size()) {
    if (ib == b.f_.size() || (ia < a.f_.size() && a.f_[ia].first < b.f_[ib].first)) {
      if (chart.var(a.f_[ia].first).odd()) --odd_tail;
      out.f_.push_back(a.f_[ia++]);
    } else if (ia == a.f_.size() || b.f_[ib].first < a.f_[ia].first) {
      if (chart.var(b.f_[ib].first).odd() && (odd_tail & 1)) sign = -sign;
      out.f_.push_back(b.f_[ib++]);
    } else {  // same variable
      if (chart.var(a.f_[ia].first).odd()) return std::nullopt;  // nilpotence
      out.f_.push_back({a.f_[ia].first, a.f_[ia].second + b.f_[ib].second});
      ++ia;
      ++ib;
    }
  }
  return std::make_pair(std::move(out), sign);
}

std::optional<std::pair<Monomial, int>> Monomial::from_factors(std::span<const VarIndex> factors,
                                                               const Chart& chart) {
  Monomial acc;
  int sign = 1;
  for (VarIndex v : factors) {
    auto r = mul(acc, variable(v), chart);
    if (!r) return std::nullopt;
    acc = std::move(r->first);
    sign *= r->second;
  }
  return std::make_pair(std::move(acc), sign);
}

std::optional<MonomialDerivative> derive_monomial(const Monomial& m, VarIndex v, Side side,
                                                  const Chart& chart) {
  const auto& factors = m.factors();
  std::size_t j = factors.size();
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (factors[i].first == v) {
      j = i;
      break;
    }
  if (j == factors.size()) return std::nullopt;

  // The derivative operator has the parity of v; it picks up a Koszul sign for
  // every odd factor it passes: those before v for a left derivative, those
  // after v for a right derivative.
  int sign = 1;
  if (chart.var(v).odd()) {
    std::uint32_t crossed = 0;
    if (side == Side::Left) {
      for (std::size_t i = 0; i < j; ++i)
        if (chart.var(factors[i].first).odd()) crossed += factors[i].second;
    } else {
      for (std::size_t i = j + 1; i < factors.size(); ++i)
        if (chart.var(factors[i].first).odd()) crossed += factors[i].second;
    }
    if (crossed & 1) sign = -1;
  }
  MonomialDerivative d;
  d.sign = sign;
  d.multiplicity = factors[j].second;
  std::vector<VarIndex> rest;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    std::uint32_t e = factors[i].second - (i == j ? 1 : 0);
    for (std::uint32_t k = 0; k < e; ++k) rest.push_back(factors[i].first);
  }
  d.reduced = Monomial::from_factors(rest, chart)->first;
  return d;
}

std::string Monomial::str(const Chart& chart) const {
  if (f_.empty()) return "1";
  std::ostringstream os;
  bool first = true;
  for (auto& [v, e] : f_) {
    if (!first) os << "*";
    first = false;
    os << chart.var(v).name;
    if (e > 1) os << "^" << e;
  }
  return os.str();
}

// ---------------------------------------------------------------------------

void GradedPolynomial::add_term(Monomial m, Scalar c) {
  if (c.is_zero()) return;
  auto it = t_.find(m);
  if (it == t_.end()) {
    t_.emplace(std::move(m), std::move(c));
  } else {
    it->second += c;
    if (it->second.is_zero()) t_.erase(it);
  }
}

GradedPolynomial GradedPolynomial::constant(ChartPtr chart, Scalar c) {
  GradedPolynomial p(std::move(chart));
  p.add_term(Monomial::one(), std::move(c));
  return p;
}

GradedPolynomial GradedPolynomial::variable(ChartPtr chart, VarIndex v) {
  GradedPolynomial p(chart);
  p.add_term(Monomial::variable(v), Scalar(1));
  return p;
}

GradedPolynomial GradedPolynomial::variable(ChartPtr chart, const std::string& name) {
  VarIndex v = chart->index_of(name);
  return variable(std::move(chart), v);
}

GradedPolynomial GradedPolynomial::monomial(ChartPtr chart, Monomial m, Scalar c) {
  GradedPolynomial p(std::move(chart));
  p.add_term(std::move(m), std::move(c));
  return p;
}

GradedPolynomial GradedPolynomial::operator-() const {
  GradedPolynomial r(chart_);
  for (auto& [m, c] : t_) r.t_.emplace(m, -c);
  return r;
}

GradedPolynomial& GradedPolynomial::operator+=(const GradedPolynomial& o) {
  if (!chart_) chart_ = o.chart_;
  if (*chart_ != *o.chart_) throw ChartError("polynomial addition across charts");
  for (auto& [m, c] : o.t_) add_term(m, c);
  return *this;
}

GradedPolynomial& GradedPolynomial::operator-=(const GradedPolynomial& o) {
  if (!chart_) chart_ = o.chart_;
  if (*chart_ != *o.chart_) throw ChartError("polynomial subtraction across charts");
  for (auto& [m, c] : o.t_) add_term(m, -c);
  return *this;
}

GradedPolynomial operator*(const GradedPolynomial& a, const GradedPolynomial& b) {
  if (*a.chart_ != *b.chart_) throw ChartError("polynomial product across charts");
  GradedPolynomial r(a.chart_);
  for (auto& [ma, ca] : a.t_)
    for (auto& [mb, cb] : b.t_) {
      auto prod = Monomial::mul(ma, mb, *a.chart_);
      if (!prod) continue;
      Scalar c = ca * cb;
      if (prod->second < 0) c = -c;
      r.add_term(std::move(prod->first), std::move(c));
    }
  return r;
}

GradedPolynomial GradedPolynomial::scaled(const Scalar& s) const {
  GradedPolynomial r(chart_);
  if (s.is_zero()) return r;
  for (auto& [m, c] : t_) r.add_term(m, c * s);
  return r;
}

GradedPolynomial GradedPolynomial::pow(std::uint32_t n) const {
  GradedPolynomial r = constant(chart_, Scalar(1));
  for (std::uint32_t k = 0; k < n; ++k) r = r * *this;
  return r;
}

GradedPolynomial GradedPolynomial::derive(VarIndex v, Side side) const {
  GradedPolynomial r(chart_);
  for (auto& [m, c] : t_) {
    auto d = derive_monomial(m, v, side, *chart_);
    if (!d) continue;
    Scalar coeff = c * Scalar(static_cast<long>(d->multiplicity) * d->sign);
    r.add_term(std::move(d->reduced), std::move(coeff));
  }
  return r;
}

GradedPolynomial GradedPolynomial::derive(const std::string& name, Side side) const {
  return derive(chart_->index_of(name), side);
}

GradedPolynomial GradedPolynomial::substitute(
    const std::map<VarIndex, GradedPolynomial>& assignment, ChartPtr target) const {
  // Validate gradings up front.
  for (auto& [v, img] : assignment) {
    const GradedVariable& gv = chart_->var(v);
    if (!img.is_zero()) {
      auto g = img.ghost();
      if (!g || *g != gv.ghost)
        throw GradingError("substitute: image of " + gv.name +
                           " is not homogeneous of ghost " + std::to_string(gv.ghost));
    }
  }
  GradedPolynomial result(target);
  for (auto& [m, c] : t_) {
    GradedPolynomial acc = GradedPolynomial::constant(target, c);
    for (auto& [v, e] : m.factors()) {
      GradedPolynomial img;
      auto it = assignment.find(v);
      if (it != assignment.end()) {
        img = it->second;
        if (!img.is_zero() && *img.chart() != *target)
          throw ChartError("substitute: image chart mismatch");
        if (img.is_zero()) img = GradedPolynomial::zero(target);
      } else {
        img = GradedPolynomial::variable(target, chart_->var(v).name);
      }
      acc = acc * img.pow(e);
      if (acc.is_zero()) break;
    }
    result += acc;
  }
  return result;
}

std::optional<int> GradedPolynomial::ghost() const {
  if (t_.empty()) return 0;
  std::optional<int> g;
  for (auto& [m, c] : t_) {
    int mg = m.ghost(*chart_);
    if (!g)
      g = mg;
    else if (*g != mg)
      return std::nullopt;
  }
  return g;
}

std::optional<Parity> GradedPolynomial::parity() const {
  if (t_.empty()) return Parity::Even;
  std::optional<Parity> p;
  for (auto& [m, c] : t_) {
    Parity mp = m.parity(*chart_);
    if (!p)
      p = mp;
    else if (*p != mp)
      return std::nullopt;
  }
  return p;
}

std::uint32_t GradedPolynomial::degree() const {
  std::uint32_t d = 0;
  for (auto& [m, c] : t_) d = std::max(d, m.degree());
  return d;
}

std::uint32_t GradedPolynomial::min_degree() const {
  std::uint32_t d = ~0u;
  for (auto& [m, c] : t_) d = std::min(d, m.degree());
  return t_.empty() ? 0 : d;
}

GradedPolynomial GradedPolynomial::homogeneous_part(std::uint32_t n) const {
  GradedPolynomial r(chart_);
  for (auto& [m, c] : t_)
    if (m.degree() == n) r.t_.emplace(m, c);
  return r;
}

GradedPolynomial GradedPolynomial::degree_truncated(std::uint32_t cap) const {
  GradedPolynomial r(chart_);
  for (auto& [m, c] : t_)
    if (m.degree() <= cap) r.t_.emplace(m, c);
  return r;
}

GradedPolynomial GradedPolynomial::hbar_slice(int k) const {
  GradedPolynomial r(chart_);
  for (auto& [m, c] : t_) {
    GaussianRational g = c.coeff(k);
    if (!g.is_zero()) r.t_.emplace(m, Scalar(g));
  }
  return r;
}

GradedPolynomial GradedPolynomial::hbar_truncated(int cap) const {
  GradedPolynomial r(chart_);
  for (auto& [m, c] : t_) {
    Scalar s = c.truncated_above(cap);
    if (!s.is_zero()) r.t_.emplace(m, std::move(s));
  }
  return r;
}

GradedPolynomial GradedPolynomial::hbar_shifted(int k) const {
  GradedPolynomial r(chart_);
  for (auto& [m, c] : t_) r.t_.emplace(m, c.shifted(k));
  return r;
}

int GradedPolynomial::min_hbar_order() const {
  int mo = 0;
  bool first = true;
  for (auto& [m, c] : t_) {
    if (first || c.min_order() < mo) mo = c.min_order();
    first = false;
  }
  return mo;
}

int GradedPolynomial::max_hbar_order() const {
  int mo = 0;
  bool first = true;
  for (auto& [m, c] : t_) {
    if (first || c.max_order() > mo) mo = c.max_order();
    first = false;
  }
  return mo;
}

bool GradedPolynomial::hbar_polynomial() const {
  for (auto& [m, c] : t_)
    if (!c.is_polynomial()) return false;
  return true;
}

std::string GradedPolynomial::str() const {
  if (t_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (auto& [m, c] : t_) {
    if (!first) os << " + ";
    first = false;
    os << "[" << c.str() << "]";
    if (!m.is_one()) os << "*" << m.str(*chart_);
  }
  return os.str();
}

GradedPolynomial apply_first_order(const GradedPolynomial& f,
                                   const std::vector<std::pair<VarIndex, GradedPolynomial>>& ops) {
  GradedPolynomial r(f.chart());
  for (auto& [v, p] : ops) r += p * f.derive(v, Side::Left);
  return r;
}

}  // namespace bv
