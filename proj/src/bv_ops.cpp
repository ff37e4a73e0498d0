#include "bv/bv_ops.hpp"

#include <functional>

#include "bv/linalg.hpp"

namespace bv {

namespace {

const DarbouxChart& darboux_of(const GradedPolynomial& f) {
  auto* d = dynamic_cast<const DarbouxChart*>(f.chart().get());
  if (!d) throw ChartError("operation requires a Darboux chart");
  return *d;
}

void require_action_grading(const GradedPolynomial& S, const char* who) {
  if (!S.ghost_is(0) || !S.parity_is(Parity::Even))
    throw GradingError(std::string(who) + ": action must be even of ghost 0");
}

}  // namespace

GradedPolynomial antibracket(const GradedPolynomial& f, const GradedPolynomial& g) {
  if (*f.chart() != *g.chart()) throw ChartError("antibracket: chart mismatch");
  const DarbouxChart& ch = darboux_of(f);
  GradedPolynomial r(f.chart());
  for (const auto& p : ch.pairs()) {
    bool neg = ch.var(p.field).odd();
    GradedPolynomial term = f.derive(p.field, Side::Right) * g.derive(p.antifield, Side::Left) -
                            f.derive(p.antifield, Side::Right) * g.derive(p.field, Side::Left);
    if (neg)
      r -= term;
    else
      r += term;
  }
  return r;
}

GradedPolynomial bv_laplacian(const GradedPolynomial& f) {
  const DarbouxChart& ch = darboux_of(f);
  GradedPolynomial r(f.chart());
  for (const auto& p : ch.pairs())
    r += f.derive(p.antifield, Side::Left).derive(p.field, Side::Left);
  return r;
}

VolumeTwist::VolumeTwist(GradedPolynomial log_density) : g(std::move(log_density)) {
  if (!g.ghost_is(0) || !g.parity_is(Parity::Even))
    throw GradingError("VolumeTwist: log-density must be even of ghost 0");
}

GradedPolynomial bv_laplacian_mu(const GradedPolynomial& f, const VolumeTwist& twist) {
  GradedPolynomial r = bv_laplacian(f);
  if (!twist.g.is_zero())
    r += antibracket(twist.g, f).scaled(Scalar(Rational(1, 2)));
  return r;
}

GradedPolynomial twist_compatibility_residual(const VolumeTwist& twist, std::uint32_t degree_cap) {
  GradedPolynomial r = bv_laplacian(twist.g).scaled(Scalar(Rational(1, 2)));
  r += antibracket(twist.g, twist.g).scaled(Scalar(Rational(1, 8)));
  return r.degree_truncated(degree_cap);
}

GradedPolynomial bv_algebra_residual(const GradedPolynomial& f, const GradedPolynomial& g) {
  auto pf = f.parity();
  if (!pf) throw GradingError("bv_algebra_residual: f is parity-inhomogeneous");
  if (!g.parity()) throw GradingError("bv_algebra_residual: g is parity-inhomogeneous");
  Scalar sf(*pf == Parity::Odd ? -1 : 1);
  GradedPolynomial r = bv_laplacian(f * g);
  r -= bv_laplacian(f) * g;
  r -= (f * bv_laplacian(g)).scaled(sf);
  r -= antibracket(f, g).scaled(sf);
  return r;
}

GradedPolynomial brst(const GradedPolynomial& S, const GradedPolynomial& f) {
  require_action_grading(S, "brst");
  return antibracket(S, f);
}

CmeReport check_cme(const GradedPolynomial& S) {
  require_action_grading(S, "check_cme");
  CmeReport rep;
  rep.witness = antibracket(S, S);
  rep.pass = rep.witness.is_zero();
  return rep;
}

QmeReport check_qme(const GradedPolynomial& S_hbar) {
  require_action_grading(S_hbar, "check_qme");
  QmeReport rep;
  rep.residual = antibracket(S_hbar, S_hbar).scaled(Scalar(Rational(1, 2)));
  rep.residual -= bv_laplacian(S_hbar).scaled(Scalar::term(GaussianRational::i(), 1));
  rep.pass = rep.residual.is_zero();
  int hi = rep.residual.is_zero() ? 0 : rep.residual.max_hbar_order();
  for (int k = 0; k <= hi; ++k) {
    rep.chain.push_back(rep.residual.hbar_slice(k));
    if (!rep.pass && !rep.violation_order && !rep.chain.back().is_zero()) {
      rep.violation_order = k;
      rep.witness = rep.chain.back();
    }
  }
  return rep;
}

ObservableReport check_observable(const GradedPolynomial& S_hbar, const GradedPolynomial& O) {
  require_action_grading(S_hbar, "check_observable");
  ObservableReport rep;
  rep.witness = antibracket(S_hbar, O);
  rep.witness -= bv_laplacian(O).scaled(Scalar::term(GaussianRational::i(), 1));
  rep.pass = rep.witness.is_zero();
  rep.classical = antibracket(S_hbar.hbar_slice(0), O).is_zero();
  return rep;
}

std::vector<Monomial> monomial_basis(const Chart& chart, int ghost, std::uint32_t degree_cap) {
  std::vector<Monomial> out;
  std::vector<VarIndex> stack;
  // Depth-first over exponent vectors, one variable at a time; factors are
  // emitted in chart order, so the normalization sign is always +1.
  std::function<void(VarIndex, std::uint32_t, int)> rec = [&](VarIndex v, std::uint32_t degree_left,
                                                              int ghost_acc) {
    if (v == chart.size()) {
      if (ghost_acc == ghost) {
        auto m = Monomial::from_factors(stack, chart);
        out.push_back(m->first);
      }
      return;
    }
    std::uint32_t max_exp = chart.var(v).odd() ? std::min<std::uint32_t>(1, degree_left) : degree_left;
    int g = chart.var(v).ghost;
    for (std::uint32_t e = 0; e <= max_exp; ++e) {
      for (std::uint32_t k = 0; k < e; ++k) stack.push_back(v);
      rec(v + 1, degree_left - e, ghost_acc + static_cast<int>(e) * g);
      for (std::uint32_t k = 0; k < e; ++k) stack.pop_back();
    }
  };
  rec(0, degree_cap, 0);
  return out;
}

namespace {

struct QmeLinearSystem {
  std::vector<Monomial> domain;   // even, ghost 0, degree <= cap
  std::vector<Monomial> range;    // span of Q(domain) plus rhs support
  linalg::Matrix matrix;          // range x domain
  std::optional<linalg::Vector> rhs_vec;
};

QmeLinearSystem build_system(const GradedPolynomial& S, const GradedPolynomial& rhs,
                             std::uint32_t cap) {
  QmeLinearSystem sys;
  const Chart& chart = *S.chart();
  sys.domain = monomial_basis(chart, 0, cap);
  // Drop odd-parity monomials (ghost 0 implies even here, but a chart could
  // in principle carry odd ghost-0 variables only through pairs; ghost 0 is
  // even by parity = ghost mod 2).
  std::map<Monomial, std::size_t> range_index;
  std::vector<GradedPolynomial> images;
  images.reserve(sys.domain.size());
  for (const auto& m : sys.domain) {
    GradedPolynomial im = antibracket(S, GradedPolynomial::monomial(S.chart(), m, Scalar(1)));
    for (auto& [mm, cc] : im.terms())
      if (!range_index.count(mm)) {
        range_index.emplace(mm, sys.range.size());
        sys.range.push_back(mm);
      }
    images.push_back(std::move(im));
  }
  for (auto& [mm, cc] : rhs.terms())
    if (!range_index.count(mm)) {
      range_index.emplace(mm, sys.range.size());
      sys.range.push_back(mm);
    }
  sys.matrix.assign(sys.range.size(), linalg::Vector(sys.domain.size()));
  for (std::size_t j = 0; j < sys.domain.size(); ++j)
    for (auto& [mm, cc] : images[j].terms())
      sys.matrix[range_index[mm]][j] = cc.coeff(0);
  linalg::Vector b(sys.range.size());
  for (auto& [mm, cc] : rhs.terms()) {
    if (cc.is_zero()) continue;
    if (cc.min_order() != 0 || cc.max_order() != 0) {
      sys.rhs_vec = std::nullopt;
      return sys;
    }
    b[range_index[mm]] = cc.coeff(0);
  }
  sys.rhs_vec = std::move(b);
  return sys;
}

std::optional<GradedPolynomial> try_solve_q(const GradedPolynomial& S, const GradedPolynomial& rhs,
                                            std::uint32_t cap) {
  QmeLinearSystem sys = build_system(S, rhs, cap);
  if (!sys.rhs_vec) throw GradingError("qme_order_solve: hbar-dependent right-hand side");
  auto x = linalg::solve(sys.matrix, *sys.rhs_vec);
  if (!x) return std::nullopt;
  GradedPolynomial sol(S.chart());
  for (std::size_t j = 0; j < sys.domain.size(); ++j)
    if (!(*x)[j].is_zero())
      sol += GradedPolynomial::monomial(S.chart(), sys.domain[j], Scalar((*x)[j]));
  return sol;
}

}  // namespace

QmeOrderResult qme_order_solve(const GradedPolynomial& S,
                               const std::vector<GradedPolynomial>& priors, int k,
                               std::uint32_t degree_cap) {
  require_action_grading(S, "qme_order_solve");
  if (k < 1 || static_cast<std::size_t>(k - 1) != priors.size())
    throw std::invalid_argument("qme_order_solve: need exactly S^(1..k-1)");
  auto level = [&](int a) -> const GradedPolynomial& {
    return a == 0 ? S : priors[static_cast<std::size_t>(a - 1)];
  };
  GradedPolynomial rhs = bv_laplacian(level(k - 1)).scaled(Scalar::i());
  for (int a = 1; a <= k - 1; ++a) {
    int b = k - a;
    rhs -= antibracket(level(a), level(b)).scaled(Scalar(Rational(1, 2)));
  }
  QmeOrderResult res{QmeOrderResult::Status::Solved, GradedPolynomial(S.chart()),
                     GradedPolynomial(S.chart()), degree_cap};
  if (auto sol = try_solve_q(S, rhs, degree_cap)) {
    res.value = *sol;
    return res;
  }
  // Distinguish a cap artifact from a genuine cocycle: retry once, wider.
  if (auto sol = try_solve_q(S, rhs, degree_cap + 2)) {
    res.status = QmeOrderResult::Status::CapTooSmall;
    res.value = *sol;
    res.working_cap = degree_cap + 2;
    return res;
  }
  if (!antibracket(S, rhs).is_zero())
    throw std::logic_error("qme_order_solve: right-hand side is not Q-closed; inconsistent input");
  res.status = QmeOrderResult::Status::Obstruction;
  res.witness = rhs;
  return res;
}

GradedPolynomial canonical_transform(const GradedPolynomial& S_hbar, const GradedPolynomial& R,
                                     int hbar_cap, std::uint32_t power_cap) {
  require_action_grading(S_hbar, "canonical_transform");
  if (!R.ghost_is(-1) || !R.parity_is(Parity::Odd))
    throw GradingError("canonical_transform: generator must be odd of ghost -1");
  if (R.is_zero()) return S_hbar;

  GradedPolynomial qres = antibracket(S_hbar, S_hbar).scaled(Scalar(Rational(1, 2)));
  qres -= bv_laplacian(S_hbar).scaled(Scalar::term(GaussianRational::i(), 1));

  GradedPolynomial u = (qres * R).hbar_shifted(-2).scaled(Scalar(-1));
  u += bv_laplacian(R);
  u += antibracket(S_hbar, R).hbar_shifted(-1).scaled(Scalar::i());

  if (u.is_zero()) return S_hbar;

  GradedPolynomial log_sum(u.chart());
  if (u.min_hbar_order() >= 1) {
    // Terminates modulo hbar^{hbar_cap+1}.
    GradedPolynomial power = u.hbar_truncated(hbar_cap);
    for (int m = 1; m <= hbar_cap && !power.is_zero(); ++m) {
      Rational c(m % 2 == 1 ? 1 : -1, m);
      log_sum += power.scaled(Scalar(c));
      power = (power * u).hbar_truncated(hbar_cap);
    }
    GradedPolynomial out = S_hbar - log_sum.hbar_shifted(1).scaled(Scalar::i());
    return out.hbar_truncated(hbar_cap);
  }

  // Exact branch: requires genuine nilpotence of u.
  GradedPolynomial power = u;
  for (std::uint32_t m = 1; !power.is_zero(); ++m) {
    if (m > power_cap)
      throw ExpansionError("canonical_transform: expansion does not terminate under the configured truncation");
    Rational c(m % 2 == 1 ? 1 : -1, static_cast<long>(m));
    log_sum += power.scaled(Scalar(c));
    power = power * u;
  }
  GradedPolynomial out = S_hbar - log_sum.hbar_shifted(1).scaled(Scalar::i());
  if (!out.hbar_polynomial())
    throw ExpansionError("canonical_transform: result leaves the hbar-polynomial ring");
  return out;
}

}  // namespace bv
