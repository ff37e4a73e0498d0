#include "bv/linfty.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace bv {

GradedBasisSpace GradedBasisSpace::from_chart(const Chart& chart) {
  std::vector<Element> basis;
  basis.reserve(chart.size());
  for (const auto& v : chart.vars()) basis.push_back({v.name, 1 - v.ghost});
  return GradedBasisSpace(std::move(basis));
}

ChartPtr GradedBasisSpace::make_chart() const {
  auto ch = std::make_shared<Chart>();
  for (const auto& e : basis_) ch->add(e.symbol, 1 - e.degree);
  return ch;
}

CyclicPairing::CyclicPairing(const GradedBasisSpace& space, linalg::Matrix m) : m_(std::move(m)) {
  std::size_t n = space.dim();
  if (m_.size() != n) throw std::invalid_argument("CyclicPairing: dimension mismatch");
  for (std::size_t a = 0; a < n; ++a) {
    if (m_[a].size() != n) throw std::invalid_argument("CyclicPairing: dimension mismatch");
    for (std::size_t b = 0; b < n; ++b) {
      if (!m_[a][b].is_zero() && space.degree(a) + space.degree(b) != 3)
        throw GradingError("CyclicPairing: nonzero entry off the degree-3 blocks");
      if (m_[a][b] != m_[b][a])
        throw GradingError("CyclicPairing: pairing must be symmetric on complementary blocks");
    }
  }
  auto inv = linalg::inverse(m_);
  if (!inv) throw std::invalid_argument("CyclicPairing: degenerate pairing");
  inv_ = std::move(*inv);
}

int suspended_sort_sign(const GradedBasisSpace& space, std::vector<std::uint32_t>& tuple) {
  int sign = 1;
  for (std::size_t i = 1; i < tuple.size(); ++i)
    for (std::size_t j = i; j > 0 && tuple[j] < tuple[j - 1]; --j) {
      if (space.suspended_parity(tuple[j]) == Parity::Odd &&
          space.suspended_parity(tuple[j - 1]) == Parity::Odd)
        sign = -sign;
      std::swap(tuple[j], tuple[j - 1]);
    }
  for (std::size_t i = 1; i < tuple.size(); ++i)
    if (tuple[i] == tuple[i - 1] && space.suspended_parity(tuple[i]) == Parity::Odd) return 0;
  return sign;
}

void OperationTensor::set(std::vector<std::uint32_t> key, linalg::Vector value) {
  if (static_cast<int>(key.size()) != arity_)
    throw std::invalid_argument("OperationTensor::set: arity mismatch");
  if (!std::is_sorted(key.begin(), key.end()))
    throw std::invalid_argument("OperationTensor::set: key must be ascending");
  bool zero = true;
  for (auto& v : value)
    if (!v.is_zero()) zero = false;
  if (zero)
    comp_.erase(key);
  else
    comp_[std::move(key)] = std::move(value);
}

linalg::Vector OperationTensor::eval(const GradedBasisSpace& space,
                                     std::vector<std::uint32_t> tuple) const {
  if (static_cast<int>(tuple.size()) != arity_)
    throw std::invalid_argument("OperationTensor::eval: arity mismatch");
  linalg::Vector out(space.dim());
  int sign = suspended_sort_sign(space, tuple);
  if (sign == 0) return out;
  auto it = comp_.find(tuple);
  if (it == comp_.end()) return out;
  for (std::size_t b = 0; b < out.size(); ++b)
    out[b] = sign < 0 ? -it->second[b] : it->second[b];
  return out;
}

GaussianRational CyclicLinfty::cyclic_tensor(const std::vector<std::uint32_t>& tuple) const {
  if (tuple.size() < 2) throw std::invalid_argument("cyclic_tensor: need n+1 >= 2 slots");
  int n = static_cast<int>(tuple.size()) - 1;
  std::vector<std::uint32_t> rest(tuple.begin() + 1, tuple.end());
  linalg::Vector v = apply(n, rest);
  GaussianRational out;
  for (std::size_t b = 0; b < v.size(); ++b)
    if (!v[b].is_zero()) out += pairing.at(tuple[0], b) * v[b];
  return out;
}

Scalar taylor_tensor(const GradedPolynomial& f, const std::vector<VarIndex>& indices) {
  GradedPolynomial tmp = f;
  for (std::size_t i = indices.size(); i-- > 0;) {
    tmp = tmp.derive(indices[i], Side::Right);
    if (tmp.is_zero()) return Scalar();
  }
  return tmp.constant_term();
}

namespace {

void for_each_ascending_tuple(std::size_t dim, int n,
                              const std::function<void(const std::vector<std::uint32_t>&)>& fn) {
  std::vector<std::uint32_t> tuple(static_cast<std::size_t>(n));
  std::function<void(int, std::uint32_t)> rec = [&](int pos, std::uint32_t lo) {
    if (pos == n) {
      fn(tuple);
      return;
    }
    for (std::uint32_t a = lo; a < dim; ++a) {
      tuple[static_cast<std::size_t>(pos)] = a;
      rec(pos + 1, a);
    }
  };
  rec(0, 0);
}

void for_each_tuple(std::size_t dim, std::size_t n,
                    const std::function<void(const std::vector<std::uint32_t>&)>& fn) {
  std::vector<std::uint32_t> tuple(n);
  std::function<void(std::size_t)> rec = [&](std::size_t pos) {
    if (pos == n) {
      fn(tuple);
      return;
    }
    for (std::uint32_t a = 0; a < dim; ++a) {
      tuple[pos] = a;
      rec(pos + 1);
    }
  };
  rec(0);
}

GaussianRational scalar_to_gq(const Scalar& s, const char* who) {
  if (s.is_zero()) return {};
  if (s.min_order() != 0 || s.max_order() != 0)
    throw GradingError(std::string(who) + ": hbar-dependent coefficient where none allowed");
  return s.coeff(0);
}

CyclicPairing pairing_from_chart(const GradedBasisSpace& space, const DarbouxChart& chart) {
  linalg::Matrix m(space.dim(), linalg::Vector(space.dim()));
  for (const auto& p : chart.pairs()) {
    m[p.field][p.antifield] = GaussianRational(1);
    m[p.antifield][p.field] = GaussianRational(1);
  }
  return CyclicPairing(space, std::move(m));
}

}  // namespace

CyclicLinfty extract_linfty(const GradedPolynomial& S, const DarbouxChartPtr& chart) {
  if (*S.chart() != *chart) throw ChartError("extract_linfty: chart mismatch");
  if (!S.ghost_is(0) || !S.parity_is(Parity::Even))
    throw GradingError("extract_linfty: S must be even of ghost 0");
  if (!S.is_zero() && (S.min_hbar_order() != 0 || S.max_hbar_order() != 0))
    throw GradingError("extract_linfty: S must be hbar-free (use extract_quantum_linfty)");
  if (!S.is_zero() && S.min_degree() < 2)
    throw GradingError("extract_linfty: S must start at quadratic order");

  CyclicLinfty A;
  A.space = GradedBasisSpace::from_chart(*chart);
  A.pairing = pairing_from_chart(A.space, *chart);
  std::size_t dim = A.space.dim();

  std::uint32_t top = S.degree();
  for (std::uint32_t deg = 2; deg <= top; ++deg) {
    GradedPolynomial part = S.homogeneous_part(deg);
    if (part.is_zero()) continue;
    int n = static_cast<int>(deg) - 1;
    OperationTensor op(n);
    for_each_ascending_tuple(dim, n, [&](const std::vector<std::uint32_t>& key) {
      linalg::Vector c(dim);
      bool any = false;
      std::vector<VarIndex> idx(key.size() + 1);
      for (std::size_t i = 0; i < key.size(); ++i) idx[i + 1] = key[i];
      for (std::uint32_t a0 = 0; a0 < dim; ++a0) {
        idx[0] = a0;
        c[a0] = scalar_to_gq(taylor_tensor(part, idx), "extract_linfty");
        if (!c[a0].is_zero()) any = true;
      }
      if (!any) return;
      op.set(key, linalg::mul(A.pairing.inverse(), c));
    });
    if (!op.is_zero()) A.ops.emplace(n, std::move(op));
  }
  return A;
}

GradedPolynomial reconstruct_action(const CyclicLinfty& A, ChartPtr chart) {
  if (chart->size() != A.space.dim())
    throw ChartError("reconstruct_action: chart does not match the basis space");
  for (std::size_t a = 0; a < A.space.dim(); ++a)
    if (chart->var(static_cast<VarIndex>(a)).ghost != 1 - A.space.degree(a))
      throw GradingError("reconstruct_action: chart ghosts disagree with basis degrees");

  GradedPolynomial S(chart);
  for (const auto& [n, op] : A.ops) {
    (void)op;  // only the arity matters here
    Rational fact(1);
    for (int k = 2; k <= n + 1; ++k) fact *= k;
    Scalar norm(Rational(1) / fact);
    for_each_tuple(A.space.dim(), static_cast<std::size_t>(n) + 1,
                   [&](const std::vector<std::uint32_t>& tuple) {
                     GaussianRational c = A.cyclic_tensor(tuple);
                     if (c.is_zero()) return;
                     std::vector<VarIndex> factors(tuple.begin(), tuple.end());
                     auto m = Monomial::from_factors(factors, *chart);
                     if (!m) return;
                     Scalar coeff = Scalar(c) * norm;
                     if (m->second < 0) coeff = -coeff;
                     S += GradedPolynomial::monomial(chart, m->first, coeff);
                   });
  }
  return S;
}

GradedPolynomial reconstruct_action(const CyclicLinfty& A) {
  return reconstruct_action(A, A.space.make_chart());
}

linalg::Vector check_homotopy_jacobi(const CyclicLinfty& A, int m,
                                     const std::vector<std::uint32_t>& inputs) {
  if (m < 1 || static_cast<std::size_t>(m) != inputs.size())
    throw std::invalid_argument("check_homotopy_jacobi: need m inputs");
  std::size_t dim = A.space.dim();
  linalg::Vector residual(dim);

  for (int r = 1; r <= m; ++r) {
    int s = m - r;
    std::vector<std::size_t> comb;
    std::function<void(std::size_t)> rec = [&](std::size_t lo) {
      if (static_cast<int>(comb.size()) == r) {
        std::vector<std::uint32_t> first, rest;
        std::vector<bool> used(inputs.size(), false);
        for (auto p : comb) {
          first.push_back(inputs[p]);
          used[p] = true;
        }
        for (std::size_t p = 0; p < inputs.size(); ++p)
          if (!used[p]) rest.push_back(inputs[p]);
        // Koszul sign of the unshuffle, by explicit inversion counting in
        // suspended parities of the inputs being moved.
        int sign = 1;
        std::vector<std::size_t> order(comb);
        for (std::size_t p = 0; p < inputs.size(); ++p)
          if (!used[p]) order.push_back(p);
        for (std::size_t i = 0; i < order.size(); ++i)
          for (std::size_t j = i + 1; j < order.size(); ++j)
            if (order[i] > order[j] &&
                A.space.suspended_parity(inputs[order[i]]) == Parity::Odd &&
                A.space.suspended_parity(inputs[order[j]]) == Parity::Odd)
              sign = -sign;
        linalg::Vector inner = A.apply(r, first);
        for (std::uint32_t b = 0; b < static_cast<std::uint32_t>(dim); ++b) {
          if (inner[b].is_zero()) continue;
          std::vector<std::uint32_t> args;
          args.push_back(b);
          for (auto x : rest) args.push_back(x);
          linalg::Vector outer = A.apply(s + 1, args);
          for (std::size_t k = 0; k < dim; ++k) {
            GaussianRational add = inner[b] * outer[k];
            if (sign < 0) add = -add;
            residual[k] += add;
          }
        }
        return;
      }
      for (std::size_t p = lo; p < inputs.size(); ++p) {
        comb.push_back(p);
        rec(p + 1);
        comb.pop_back();
      }
    };
    rec(0);
  }
  return residual;
}

CyclicityReport check_cyclicity(const CyclicLinfty& A) {
  CyclicityReport rep;
  std::size_t dim = A.space.dim();
  for (const auto& [n, op] : A.ops) {
    for (const auto& [key, vec] : op.components()) {
      (void)vec;
      for (std::uint32_t a0 = 0; a0 < dim; ++a0) {
        std::vector<std::uint32_t> t;
        t.push_back(a0);
        for (auto k : key) t.push_back(k);
        std::vector<std::uint32_t> tswap = t;
        std::swap(tswap[0], tswap[1]);
        int sgn = (A.space.suspended_parity(t[0]) == Parity::Odd &&
                   A.space.suspended_parity(t[1]) == Parity::Odd)
                      ? -1
                      : 1;
        GaussianRational lhs = A.cyclic_tensor(t);
        GaussianRational rhs = A.cyclic_tensor(tswap);
        if (sgn < 0) rhs = -rhs;
        if (lhs != rhs) {
          rep.pass = false;
          rep.arity = n;
          rep.witness = t;
          return rep;
        }
      }
    }
  }
  return rep;
}

QuantumLinfty extract_quantum_linfty(const GradedPolynomial& S_hbar, const DarbouxChartPtr& chart) {
  if (*S_hbar.chart() != *chart) throw ChartError("extract_quantum_linfty: chart mismatch");
  if (!S_hbar.ghost_is(0) || !S_hbar.parity_is(Parity::Even))
    throw GradingError("extract_quantum_linfty: S must be even of ghost 0");
  if (!S_hbar.hbar_polynomial())
    throw GradingError("extract_quantum_linfty: S must be polynomial in hbar");

  QuantumLinfty Q;
  Q.space = GradedBasisSpace::from_chart(*chart);
  Q.pairing = pairing_from_chart(Q.space, *chart);
  std::size_t dim = Q.space.dim();

  int lmax = S_hbar.is_zero() ? 0 : S_hbar.max_hbar_order();
  for (int l = 0; l <= lmax; ++l) {
    GradedPolynomial slice = S_hbar.hbar_slice(l);
    if (slice.is_zero()) continue;
    std::uint32_t top = slice.degree();
    for (std::uint32_t n = 1; n <= top; ++n) {
      GradedPolynomial part = slice.homogeneous_part(n);
      if (part.is_zero()) continue;
      std::map<std::vector<std::uint32_t>, GaussianRational> tensor;
      for_each_ascending_tuple(dim, static_cast<int>(n), [&](const std::vector<std::uint32_t>& key) {
        std::vector<VarIndex> idx(key.begin(), key.end());
        GaussianRational c = scalar_to_gq(taylor_tensor(part, idx), "extract_quantum_linfty");
        if (!c.is_zero()) tensor.emplace(key, c);
      });
      if (!tensor.empty()) Q.c.emplace(std::make_pair(static_cast<int>(n), l), std::move(tensor));
    }
  }
  return Q;
}

GaussianRational QuantumLinfty::tensor(int n, int l,
                                       const std::vector<std::uint32_t>& tuple_sorted) const {
  auto it = c.find({n, l});
  if (it == c.end()) return {};
  auto jt = it->second.find(tuple_sorted);
  return jt == it->second.end() ? GaussianRational() : jt->second;
}

GradedPolynomial reassemble_quantum_action(const QuantumLinfty& Q, const DarbouxChartPtr& chart) {
  GradedPolynomial S(chart);
  for (const auto& [nl, tensor] : Q.c) {
    auto [n, l] = nl;
    Rational fact(1);
    for (int k = 2; k <= n; ++k) fact *= k;
    Scalar norm(Rational(1) / fact);
    for (const auto& [key, value] : tensor) {
      // The tensor is supersymmetric; sum over all distinct permutations with
      // resort signs (Taylor inverse on the hbar^l slice).
      std::vector<std::uint32_t> perm(key);
      do {
        std::vector<std::uint32_t> t(perm);
        int sign = suspended_sort_sign(Q.space, t);
        if (sign == 0) continue;
        std::vector<VarIndex> factors(perm.begin(), perm.end());
        auto mono = Monomial::from_factors(factors, *chart);
        if (!mono) continue;
        Scalar coeff = Scalar(sign < 0 ? -value : value) * norm;
        if (mono->second < 0) coeff = -coeff;
        S += GradedPolynomial::monomial(chart, mono->first, coeff.shifted(l));
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
  return S;
}

}  // namespace bv
