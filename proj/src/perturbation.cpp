#include "bv/perturbation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "bv/bv_ops.hpp"

namespace bv::pert {

namespace {

/// Worker count from BV_THREADS (default 1). Results are bit-identical for
/// any value: graph values are evaluated independently and reduced in a
/// fixed order.
unsigned worker_threads() {
  const char* env = std::getenv("BV_THREADS");
  if (!env) return 1;
  long n = std::strtol(env, nullptr, 10);
  if (n < 1) return 1;
  return static_cast<unsigned>(std::min<long>(n, 64));
}

using graphs::FeynmanGraph;
using graphs::VertexKind;
using models::BvModel;
using wick::GaussianWeight;

GradedPolynomial to_chart(const GradedPolynomial& p, const ChartPtr& chart) {
  return p.substitute({}, chart);
}

std::uint32_t degree_in(const Monomial& m, const std::vector<bool>& mask) {
  std::uint32_t d = 0;
  for (auto& [v, e] : m.factors())
    if (mask[v]) d += e;
  return d;
}

struct TermData {
  Monomial mono;
  Scalar coeff;
  int int_degree = 0;
  std::uint32_t spec_degree = 0;
  int min_hbar = 0;
};

struct Interaction {
  GradedPolynomial quad;         // hbar^0 pure-int quadratic (the weight)
  GradedPolynomial passthrough;  // no integration variables
  std::vector<TermData> terms;   // everything else
};

Interaction split_action(const GradedPolynomial& S, const std::vector<VarIndex>& int_vars,
                         bool allow_linear_sources) {
  std::vector<bool> is_int(S.chart()->size(), false);
  for (VarIndex v : int_vars) is_int[v] = true;
  Interaction out;
  out.quad = GradedPolynomial(S.chart());
  out.passthrough = GradedPolynomial(S.chart());
  for (auto& [m, c] : S.terms()) {
    std::uint32_t di = degree_in(m, is_int);
    std::uint32_t total = m.degree();
    std::uint32_t ds = total - di;
    if (di == 0) {
      out.passthrough += GradedPolynomial::monomial(S.chart(), m, c);
      continue;
    }
    Scalar rest = c;
    if (di == 2 && ds == 0) {
      GaussianRational c0 = c.coeff(0);
      if (!c0.is_zero()) {
        out.quad += GradedPolynomial::monomial(S.chart(), m, Scalar(c0));
        rest = c - Scalar(c0);
      }
    }
    if (rest.is_zero()) continue;
    if (di == 1 && ds == 0 && !rest.truncated_above(0).is_zero() && !allow_linear_sources)
      throw wick::SingularQuadraticForm(
          "connected_expansion: hbar^0 term linear in the integration variables (displaced saddle)");
    TermData t;
    t.mono = m;
    t.coeff = rest;
    t.int_degree = static_cast<int>(di);
    t.spec_degree = ds;
    t.min_hbar = rest.min_order();
    out.terms.push_back(std::move(t));
  }
  return out;
}

}  // namespace

GradedPolynomial window_truncate(const GradedPolynomial& f, int hbar_cap,
                                 std::uint32_t degree_cap,
                                 const std::vector<VarIndex>& spectator_degree_vars) {
  std::vector<bool> mask(f.chart()->size(), false);
  for (VarIndex v : spectator_degree_vars) mask[v] = true;
  GradedPolynomial out(f.chart());
  for (auto& [m, c] : f.terms()) {
    std::uint32_t d = degree_in(m, mask);
    if (d > degree_cap) continue;
    int limit = hbar_cap + static_cast<int>((degree_cap - d) / 2);
    Scalar kept = c.truncated_above(limit);
    if (!kept.is_zero()) out += GradedPolynomial::monomial(f.chart(), m, kept);
  }
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// Graph route.

struct ArityBucket {
  std::vector<const TermData*> terms;
  int min_hbar = 0;
  std::uint32_t min_spec = 0;
};

/// Replica chart for one graph: the original chart plus a full copy of the
/// integration variables per (vertex, slot).
struct ReplicaSpace {
  ChartPtr chart;
  // replica_var[v][i][k] = copy of int_vars[k] in slot i of vertex v.
  std::vector<std::vector<std::vector<VarIndex>>> replica_var;
};

ReplicaSpace make_replicas(const ChartPtr& base, const std::vector<VarIndex>& int_vars,
                           const std::vector<VertexKind>& vertices) {
  auto ch = std::make_shared<Chart>();
  for (const auto& v : base->vars()) ch->add(v.name, v.ghost);
  ReplicaSpace rs;
  rs.replica_var.resize(vertices.size());
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    rs.replica_var[v].resize(static_cast<std::size_t>(vertices[v].arity));
    for (int i = 0; i < vertices[v].arity; ++i)
      for (std::size_t k = 0; k < int_vars.size(); ++k) {
        const GradedVariable& gv = base->var(int_vars[k]);
        rs.replica_var[v][static_cast<std::size_t>(i)].push_back(
            ch->add(gv.name + "@" + std::to_string(v) + "." + std::to_string(i), gv.ghost));
      }
  }
  rs.chart = ch;
  return rs;
}

/// Polarized vertex factor: substitute y -> sum of slot copies, keep the part
/// of degree exactly one in every slot, include the (i/hbar) coupling.
GradedPolynomial vertex_factor(const ReplicaSpace& rs, const ChartPtr& base,
                               const std::vector<VarIndex>& int_vars, const ArityBucket& bucket,
                               std::size_t v, int arity) {
  std::map<VarIndex, GradedPolynomial> sub;
  for (std::size_t k = 0; k < int_vars.size(); ++k) {
    GradedPolynomial img(rs.chart);
    for (int i = 0; i < arity; ++i)
      img += GradedPolynomial::variable(rs.chart, rs.replica_var[v][static_cast<std::size_t>(i)][k]);
    sub.emplace(int_vars[k], std::move(img));
  }
  GradedPolynomial raw(base);
  for (const TermData* t : bucket.terms)
    raw += GradedPolynomial::monomial(base, t->mono, t->coeff);
  GradedPolynomial expanded = raw.substitute(sub, rs.chart);
  // Multilinear filter: degree one in each slot group.
  std::vector<int> slot_of(rs.chart->size(), -1);
  for (int i = 0; i < arity; ++i)
    for (std::size_t k = 0; k < int_vars.size(); ++k)
      slot_of[rs.replica_var[v][static_cast<std::size_t>(i)][k]] = i;
  GradedPolynomial out(rs.chart);
  for (auto& [m, c] : expanded.terms()) {
    std::vector<std::uint32_t> deg(static_cast<std::size_t>(arity), 0);
    bool other_replica = false;
    for (auto& [var, e] : m.factors())
      if (slot_of[var] >= 0) deg[static_cast<std::size_t>(slot_of[var])] += e;
    bool ok = !other_replica;
    for (auto d : deg) ok = ok && d == 1;
    if (ok) out += GradedPolynomial::monomial(rs.chart, m, c);
  }
  return out.scaled(Scalar::term(GaussianRational::i(), -1));
}

GradedPolynomial eval_graph(const FeynmanGraph& g, const ChartPtr& base,
                            const std::vector<VarIndex>& int_vars,
                            const std::map<int, ArityBucket>& buckets,
                            const GaussianWeight& weight, std::uint32_t degree_cap,
                            const std::vector<bool>& spec_mask) {
  ReplicaSpace rs = make_replicas(base, int_vars, g.vertices);
  const auto& P = weight.propagator();

  auto contract = [&](GradedPolynomial value, const graphs::HalfEdge& a,
                      const graphs::HalfEdge& b) {
    GradedPolynomial next(rs.chart);
    const auto& va =
        rs.replica_var[static_cast<std::size_t>(a.vertex)][static_cast<std::size_t>(a.slot)];
    const auto& vb =
        rs.replica_var[static_cast<std::size_t>(b.vertex)][static_cast<std::size_t>(b.slot)];
    for (std::size_t alpha = 0; alpha < int_vars.size(); ++alpha) {
      GradedPolynomial da = value.derive(va[alpha], Side::Left);
      if (da.is_zero()) continue;
      for (std::size_t beta = 0; beta < int_vars.size(); ++beta) {
        if (P[alpha][beta].is_zero()) continue;
        GradedPolynomial dba = da.derive(vb[beta], Side::Left);
        if (dba.is_zero()) continue;
        next += dba.scaled(P[alpha][beta]);
      }
    }
    return next;
  };
  auto spec_window = [&](const GradedPolynomial& p) {
    GradedPolynomial out(rs.chart);
    for (auto& [m, c] : p.terms()) {
      std::uint32_t d = 0;
      for (auto& [v, e] : m.factors())
        if (v < spec_mask.size() && spec_mask[v]) d += e;
      if (d <= degree_cap) out += GradedPolynomial::monomial(rs.chart, m, c);
    }
    return out;
  };

  // Multiply vertex factors in one at a time and contract every edge whose
  // endpoints are both present; keeps intermediate polynomials small.
  GradedPolynomial value = GradedPolynomial::constant(rs.chart, Scalar(1));
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    value = value * vertex_factor(rs, base, int_vars, buckets.at(g.vertices[v].arity), v,
                                  g.vertices[v].arity);
    if (value.is_zero()) return GradedPolynomial(base);
    for (auto& [a, b] : g.matching) {
      std::size_t hi = static_cast<std::size_t>(std::max(a.vertex, b.vertex));
      if (hi == v) {
        value = contract(std::move(value), a, b);
        if (value.is_zero()) return GradedPolynomial(base);
      }
    }
    value = spec_window(value);
    if (value.is_zero()) return GradedPolynomial(base);
  }
  for (auto& [m, c] : value.terms())
    for (auto& [var, e] : m.factors())
      if (var >= base->size())
        throw std::logic_error("eval_graph: replica variable survived contraction");
  return to_chart(value, base);
}

bool one_particle_irreducible(const FeynmanGraph& g) {
  auto adj = g.adjacency();
  std::size_t n = g.vertices.size();
  if (n <= 1) return true;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) {
      if (adj[u][v] != 1) continue;  // multi-edges are never bridges
      // Remove the edge and test connectivity.
      auto cut = adj;
      cut[u][v] = cut[v][u] = 0;
      std::vector<bool> seen(n, false);
      std::vector<std::size_t> stack = {0};
      seen[0] = true;
      while (!stack.empty()) {
        std::size_t x = stack.back();
        stack.pop_back();
        for (std::size_t y = 0; y < n; ++y)
          if (cut[x][y] > 0 && !seen[y]) {
            seen[y] = true;
            stack.push_back(y);
          }
      }
      for (std::size_t x = 0; x < n; ++x)
        if (!seen[x]) return false;
    }
  return true;
}

}  // namespace

GradedPolynomial connected_expansion(const GradedPolynomial& S_full,
                                     const std::vector<VarIndex>& int_vars, const Caps& caps,
                                     bool only_1pi, bool allow_linear_sources) {
  Interaction in = split_action(S_full, int_vars, allow_linear_sources);
  GaussianWeight weight(in.quad, int_vars);

  std::vector<VarIndex> spectators;
  {
    std::vector<bool> is_int(S_full.chart()->size(), false);
    for (VarIndex v : int_vars) is_int[v] = true;
    for (VarIndex v = 0; v < S_full.chart()->size(); ++v)
      if (!is_int[v]) spectators.push_back(v);
  }

  std::map<int, ArityBucket> buckets;
  for (const auto& t : in.terms) {
    ArityBucket& b = buckets[t.int_degree];
    if (b.terms.empty()) {
      b.min_hbar = t.min_hbar;
      b.min_spec = t.spec_degree;
    } else {
      b.min_hbar = std::min(b.min_hbar, t.min_hbar);
      b.min_spec = std::min(b.min_spec, t.spec_degree);
    }
    b.terms.push_back(&t);
  }

  int k_hard = 2 * caps.loop_cap + 2 * caps.hbar_cap + static_cast<int>(caps.degree_cap) + 4;
  std::vector<bool> spec_mask(S_full.chart()->size(), false);
  for (VarIndex v : spectators) spec_mask[v] = true;

  // Enumerate arity multisets (ascending); the loop number of a connected
  // vacuum graph is fixed by the multiset: L = sum(n)/2 - k + 1. Collect the
  // surviving isomorphism classes as independent jobs.
  std::vector<FeynmanGraph> jobs;
  std::vector<int> arities;
  for (auto& [n, b] : buckets) arities.push_back(n);
  std::vector<int> multiset;
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    if (!multiset.empty()) {
      int sum_n = 0, min_p = 0;
      std::uint32_t min_d = 0;
      for (int n : multiset) {
        sum_n += n;
        min_p += buckets[n].min_hbar;
        min_d += buckets[n].min_spec;
      }
      if (min_d > caps.degree_cap) return;  // additive; no extension recovers
      if (sum_n % 2 == 0) {
        int loops = sum_n / 2 - static_cast<int>(multiset.size()) + 1;
        // With several vertices, a one-valent vertex or a tree always has a
        // bridge, so such multisets cannot produce 1PI graphs.
        bool pi_possible = true;
        if (only_1pi && multiset.size() >= 2) {
          pi_possible = loops >= 1;
          for (int n : multiset) pi_possible = pi_possible && n >= 2;
        }
        if (pi_possible && loops >= 0 && loops <= caps.loop_cap &&
            loops + min_p <= caps.hbar_cap + static_cast<int>(caps.degree_cap) / 2) {
          std::vector<VertexKind> kinds;
          for (int n : multiset) kinds.push_back({n, 0, n});
          for (auto& g : graphs::enumerate_graphs(kinds, 0, caps.loop_cap)) {
            if (only_1pi && !one_particle_irreducible(g)) continue;
            jobs.push_back(std::move(g));
          }
        }
      }
    }
    if (static_cast<int>(multiset.size()) >= k_hard) return;
    for (std::size_t i = from; i < arities.size(); ++i) {
      multiset.push_back(arities[i]);
      rec(i);
      multiset.pop_back();
    }
  };
  rec(0);

  // Evaluate classes (in parallel when BV_THREADS asks for it) and reduce in
  // job order so the result is schedule-independent.
  std::vector<GradedPolynomial> values(jobs.size());
  auto eval_one = [&](std::size_t j) {
    GradedPolynomial val =
        eval_graph(jobs[j], S_full.chart(), int_vars, buckets, weight, caps.degree_cap, spec_mask);
    if (val.is_zero()) {
      values[j] = std::move(val);
      return;
    }
    GaussianRational aut(static_cast<long>(jobs[j].automorphisms()));
    values[j] = window_truncate(val.scaled(Scalar(GaussianRational(1) / aut)), caps.hbar_cap - 1,
                                caps.degree_cap, spectators);
  };
  unsigned workers = std::min<unsigned>(worker_threads(), std::max<std::size_t>(jobs.size(), 1));
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) eval_one(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) eval_one(j);
      });
    for (auto& t : pool) t.join();
  }
  GradedPolynomial log_z(S_full.chart());
  for (auto& v : values) log_z += v;

  GradedPolynomial action = in.passthrough -
                            log_z.hbar_shifted(1).scaled(Scalar::i());
  action = window_truncate(action, caps.hbar_cap, caps.degree_cap, spectators);
  if (!action.hbar_polynomial())
    throw std::logic_error("connected_expansion: effective action left the hbar-polynomial ring");
  return action;
}

namespace {

GradedPolynomial series_log1p(const GradedPolynomial& X, const Caps& caps,
                              const std::vector<VarIndex>& spectators, int m_hard) {
  GradedPolynomial acc(X.chart());
  GradedPolynomial power = X;
  for (int m = 1; !power.is_zero(); ++m) {
    if (m > m_hard) throw std::logic_error("series_log1p: did not terminate within the caps");
    acc += power.scaled(Scalar(Rational(m % 2 ? 1 : -1, m)));
    power = window_truncate(power * X, caps.hbar_cap - 1, caps.degree_cap, spectators);
  }
  return acc;
}

GradedPolynomial series_geom_inverse(const GradedPolynomial& X, const Caps& caps,
                                     const std::vector<VarIndex>& spectators, int m_hard) {
  // (1 + X)^{-1} = sum (-X)^m.
  GradedPolynomial acc = GradedPolynomial::constant(X.chart(), Scalar(1));
  GradedPolynomial power = -X;
  for (int m = 1; !power.is_zero(); ++m) {
    if (m > m_hard) throw std::logic_error("series_geom_inverse: did not terminate within the caps");
    acc += power;
    power = window_truncate(power * (-X), caps.hbar_cap - 1, caps.degree_cap, spectators);
  }
  return acc;
}

struct OracleParts {
  GradedPolynomial passthrough;
  GradedPolynomial X;  // <exp((i/h) S_int)> - 1, windowed
  std::vector<VarIndex> spectators;
  GaussianWeight weight;
};

// Drops power-series terms that can no longer contribute within the caps.
// The windowed quantity p + di/2 - k - (D - ds)/2 never decreases along
// further multiplications by interaction terms, so the cut is exact.
GradedPolynomial prune_power(const GradedPolynomial& p, const std::vector<bool>& is_int,
                             int k_next, const Caps& caps, long margin) {
  GradedPolynomial out(p.chart());
  for (auto& [m, c] : p.terms()) {
    std::uint32_t di = degree_in(m, is_int);
    std::uint32_t ds = m.degree() - di;
    if (ds > caps.degree_cap) continue;
    long lhs = 2L * c.min_order() + di - 2L * k_next -
               static_cast<long>(caps.degree_cap - ds);
    if (lhs > 2L * (caps.hbar_cap - 1 + margin)) continue;
    out += GradedPolynomial::monomial(p.chart(), m, c);
  }
  return out;
}

OracleParts oracle_parts(const GradedPolynomial& S_full, const std::vector<VarIndex>& int_vars,
                         const Caps& caps, bool allow_linear_sources = false) {
  Interaction in = split_action(S_full, int_vars, allow_linear_sources);
  OracleParts parts{GradedPolynomial(S_full.chart()), GradedPolynomial(S_full.chart()), {},
                    GaussianWeight(in.quad, int_vars)};
  parts.passthrough = in.passthrough;
  std::vector<bool> is_int(S_full.chart()->size(), false);
  for (VarIndex v : int_vars) is_int[v] = true;
  for (VarIndex v = 0; v < S_full.chart()->size(); ++v)
    if (!is_int[v]) parts.spectators.push_back(v);

  GradedPolynomial s_int(S_full.chart());
  for (const auto& t : in.terms) s_int += GradedPolynomial::monomial(S_full.chart(), t.mono, t.coeff);

  int k_hard = 2 * caps.hbar_cap + 2 * static_cast<int>(caps.degree_cap) + 4;
  GradedPolynomial power = s_int;
  Rational fact(1);
  for (int k = 1; !power.is_zero(); ++k) {
    if (k > k_hard) throw std::logic_error("oracle: exponential series did not terminate");
    fact *= k;
    GradedPolynomial contrib =
        parts.weight.moment(power).hbar_shifted(-k).scaled(Scalar(Rational(1) / fact));
    // i^k
    GaussianRational ik(1);
    for (int j = 0; j < k % 4; ++j) ik *= GaussianRational::i();
    contrib = contrib.scaled(Scalar(ik));
    parts.X += window_truncate(contrib, caps.hbar_cap - 1, caps.degree_cap, parts.spectators);
    GradedPolynomial product = power * s_int;
    power = prune_power(product, is_int, k + 1, caps, 0);
  }
  return parts;
}

}  // namespace

GradedPolynomial connected_expansion_oracle(const GradedPolynomial& S_full,
                                            const std::vector<VarIndex>& int_vars, const Caps& caps,
                                            bool allow_linear_sources) {
  OracleParts parts = oracle_parts(S_full, int_vars, caps, allow_linear_sources);
  int m_hard = 2 * caps.hbar_cap + 2 * static_cast<int>(caps.degree_cap) + 4;
  GradedPolynomial log_z = series_log1p(parts.X, caps, parts.spectators, m_hard);
  GradedPolynomial action = parts.passthrough - log_z.hbar_shifted(1).scaled(Scalar::i());
  return window_truncate(action, caps.hbar_cap, caps.degree_cap, parts.spectators);
}

GradedPolynomial insertion_expectation(const GradedPolynomial& S_full, const GradedPolynomial& O,
                                       const std::vector<VarIndex>& int_vars, const Caps& caps) {
  OracleParts parts = oracle_parts(S_full, int_vars, caps);
  Interaction in = split_action(S_full, int_vars, false);
  GradedPolynomial s_int(S_full.chart());
  for (const auto& t : in.terms) s_int += GradedPolynomial::monomial(S_full.chart(), t.mono, t.coeff);

  std::vector<bool> is_int(S_full.chart()->size(), false);
  for (VarIndex v : int_vars) is_int[v] = true;
  long o_margin = 1;
  if (!O.is_zero()) {
    o_margin += std::max(0, -O.min_hbar_order()) + static_cast<long>(O.degree()) / 2 + 1;
  }

  // Numerator: <O exp((i/h) S_int)>.
  GradedPolynomial num = parts.weight.moment(O);
  {
    int k_hard = 2 * caps.hbar_cap + 2 * static_cast<int>(caps.degree_cap) + 4;
    GradedPolynomial power = s_int;
    Rational fact(1);
    for (int k = 1; !power.is_zero(); ++k) {
      if (k > k_hard) throw std::logic_error("insertion_expectation: series did not terminate");
      fact *= k;
      GaussianRational ik(1);
      for (int j = 0; j < k % 4; ++j) ik *= GaussianRational::i();
      GradedPolynomial contrib =
          parts.weight.moment(O * power).hbar_shifted(-k).scaled(Scalar(Rational(1) / fact) *
                                                                 Scalar(ik));
      num += window_truncate(contrib, caps.hbar_cap, caps.degree_cap, parts.spectators);
      GradedPolynomial product = power * s_int;
      power = prune_power(product, is_int, k + 1, caps, o_margin);
    }
  }
  int m_hard = 2 * caps.hbar_cap + 2 * static_cast<int>(caps.degree_cap) + 4;
  GradedPolynomial inv_z = series_geom_inverse(parts.X, caps, parts.spectators, m_hard);
  return window_truncate(num * inv_z, caps.hbar_cap, caps.degree_cap, parts.spectators);
}

EffectiveSeries bv_integral_expansion(const BvModel& m, const GradedPolynomial& psi,
                                      const Caps& caps) {
  GradedPolynomial s_gf = models::gauge_fix(m, psi);
  std::vector<VarIndex> fields;
  for (const auto& p : m.chart->pairs()) fields.push_back(p.field);
  GradedPolynomial action = connected_expansion(s_gf, fields, caps);
  for (auto& [mono, c] : action.terms())
    if (!mono.is_one())
      throw std::logic_error("bv_integral_expansion: vacuum expansion left residual fields");
  auto trivial = std::make_shared<DarbouxChart>();
  EffectiveSeries out{trivial, GradedPolynomial::constant(trivial, action.constant_term())};
  return out;
}

GaugeIndependenceReport gauge_independence_derivative(const BvModel& m,
                                                      const std::vector<GradedPolynomial>& family,
                                                      const Caps& caps) {
  if (family.empty()) throw std::invalid_argument("gauge_independence_derivative: empty family");
  GaugeIndependenceReport rep;
  int dt = static_cast<int>(family.size()) - 1;
  int n_int = static_cast<int>(m.chart->pairs().size());
  int k_bound = 2 * caps.loop_cap + 2 * caps.hbar_cap + static_cast<int>(caps.degree_cap) + 4;
  int e_max = caps.loop_cap + k_bound;
  // W(t) is a rational function whose numerator degree is bounded by the
  // t-degrees of propagator entries (cofactor over determinant) and vertex
  // couplings along any contributing graph.
  long bound = static_cast<long>(std::max(1, dt)) * (static_cast<long>(e_max) * n_int + k_bound + 2);
  long samples_needed = bound + 1;

  std::optional<Scalar> w0;
  for (long t = 0; static_cast<long>(rep.samples.size()) < samples_needed; ++t) {
    if (t > 4 * samples_needed + 16)
      throw std::logic_error("gauge_independence_derivative: too many degenerate sample points");
    Rational tr(t);
    GradedPolynomial psi_t(m.chart);
    Scalar tpow(1);
    for (const auto& f : family) {
      psi_t += f.scaled(tpow);
      tpow *= Scalar(tr);
    }
    try {
      EffectiveSeries w = bv_integral_expansion(m, psi_t, caps);
      Scalar val = w.action.constant_term();
      rep.samples.push_back({tr, val});
      if (!w0) {
        w0 = val;
      } else if (val != *w0 && rep.witness.is_zero()) {
        rep.witness = val - *w0;
      }
    } catch (const wick::SingularQuadraticForm&) {
      rep.degenerate_t.push_back(tr);
    }
  }
  rep.pass = rep.witness.is_zero();
  return rep;
}

GradedPolynomial delta_exact_vanishing(const BvModel& m, const GradedPolynomial& g,
                                       const GradedPolynomial& psi, const Caps& caps) {
  auto qme = check_qme(m.S);
  if (!qme.pass)
    throw GradingError("delta_exact_vanishing: the action must solve the QME");
  auto par = g.parity();
  if (!par) throw GradingError("delta_exact_vanishing: g must be parity-homogeneous");
  GradedPolynomial insertion = bv_laplacian(g);
  Scalar sign((*par == Parity::Odd) ? -1 : 1);
  insertion += antibracket(g, m.S).hbar_shifted(-1).scaled(Scalar::i() * sign);

  auto assignment = models::gauge_fix_assignment(m.chart, psi);
  GradedPolynomial s_gf = m.S.substitute(assignment);
  GradedPolynomial o_gf = insertion.substitute(assignment);
  std::vector<VarIndex> fields;
  for (const auto& p : m.chart->pairs()) fields.push_back(p.field);
  return insertion_expectation(s_gf, o_gf, fields, caps);
}

// ---------------------------------------------------------------------------
// Fiber frames.

namespace {

struct FiberFrame {
  DarbouxChartPtr big;                          // X1 pairs + (w, w+) pairs
  std::map<VarIndex, GradedPolynomial> subst;   // old X2 vars -> linear in new
  std::vector<VarIndex> int_vars;               // w fields in big
  std::vector<VarIndex> lagrangian_zero;        // w+ vars in big
  DarbouxChartPtr residual;                     // X1 pairs only
};

int v_degree(const Chart& chart, VarIndex v) { return 1 - chart.var(v).ghost; }

linalg::Matrix l1_matrix(const BvModel& m) {
  std::size_t n = m.chart->size();
  linalg::Matrix L(n, linalg::Vector(n));
  GradedPolynomial s2 = m.S.hbar_slice(0).homogeneous_part(2);
  if (s2.is_zero()) return L;
  CyclicLinfty A = extract_linfty(s2, m.chart);
  auto it = A.ops.find(1);
  if (it == A.ops.end()) return L;
  for (std::uint32_t a = 0; a < n; ++a) {
    linalg::Vector col = it->second.eval(A.space, {a});
    for (std::size_t b = 0; b < n; ++b) L[b][a] = col[b];
  }
  return L;
}

GaussianRational bracket_value(const GradedPolynomial& f, const GradedPolynomial& g) {
  GradedPolynomial b = antibracket(f, g);
  if (b.is_zero()) return {};
  Scalar c = b.constant_term();
  return c.is_zero() ? GaussianRational() : c.coeff(0);
}

}  // namespace

void validate_propagator(const BvModel& m, const FiberSplit& split, const Propagator& prop) {
  const auto& chart = *m.chart;
  std::size_t n = chart.size();
  if (prop.K.size() != n) throw std::invalid_argument("Propagator: matrix size mismatch");
  std::vector<bool> in_x2(n, false);
  for (std::size_t pi : split.x2_pairs) {
    in_x2[chart.pairs().at(pi).field] = true;
    in_x2[chart.pairs().at(pi).antifield] = true;
  }
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t a = 0; a < n; ++a) {
      if (prop.K[b][a].is_zero()) continue;
      if (!in_x2[a] || !in_x2[b])
        throw std::invalid_argument("Propagator: K must be supported on X2 and kill X1");
      if (v_degree(chart, static_cast<VarIndex>(b)) !=
          v_degree(chart, static_cast<VarIndex>(a)) - 1)
        throw std::invalid_argument("Propagator: K must have V-degree -1");
    }
  linalg::Matrix K2 = linalg::mul(prop.K, prop.K);
  for (auto& row : K2)
    for (auto& x : row)
      if (!x.is_zero()) throw std::invalid_argument("Propagator: K^2 != 0");
  linalg::Matrix L = l1_matrix(m);
  // l1 must preserve the split.
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t a = 0; a < n; ++a)
      if (!L[b][a].is_zero() && in_x2[a] != in_x2[b])
        throw std::invalid_argument("fiber split: l1 does not preserve the splitting");
  linalg::Matrix H = linalg::mul(L, prop.K);
  linalg::Matrix H2 = linalg::mul(prop.K, L);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t a = 0; a < n; ++a) {
      GaussianRational want = (a == b && in_x2[a]) ? GaussianRational(1) : GaussianRational();
      if (H[b][a] + H2[b][a] != want)
        throw std::invalid_argument(
            "Propagator: K fails the homotopy identity l1 K + K l1 = id - proj (V2 possibly not acyclic)");
    }
}

namespace {

FiberFrame build_fiber_frame(const BvModel& m, const FiberSplit& split, const Propagator& prop) {
  validate_propagator(m, split, prop);
  const auto& chart = *m.chart;
  std::size_t n = chart.size();
  std::vector<bool> in_x2(n, false);
  std::vector<VarIndex> x2_vars;
  for (std::size_t pi : split.x2_pairs) {
    in_x2[chart.pairs().at(pi).field] = true;
    in_x2[chart.pairs().at(pi).antifield] = true;
  }
  for (VarIndex v = 0; v < n; ++v)
    if (in_x2[v]) x2_vars.push_back(v);

  // Basis of im(K), ghost block by ghost block.
  std::map<int, std::vector<linalg::Vector>> im_blocks;  // by V-degree of the image
  {
    std::map<int, std::vector<linalg::Vector>> cols;
    for (VarIndex a : x2_vars) {
      linalg::Vector col(n);
      bool nz = false;
      for (std::size_t b = 0; b < n; ++b) {
        col[b] = prop.K[b][a];
        nz = nz || !col[b].is_zero();
      }
      if (nz) cols[v_degree(chart, a) - 1].push_back(std::move(col));
    }
    for (auto& [deg, vs] : cols) {
      linalg::Matrix mat;
      for (auto& v : vs) mat.push_back(v);
      linalg::Matrix red = mat;
      auto pivots = linalg::rref(red);
      for (std::size_t r = 0; r < pivots.size(); ++r) im_blocks[deg].push_back(red[r]);
    }
  }

  // Annihilator functionals of im(K), per variable-ghost block; these are the
  // w+ coordinates of the Lagrangian.
  std::vector<GradedPolynomial> wplus;
  for (int deg_v :
       [&] {
         std::set<int> degs;
         for (VarIndex v : x2_vars) degs.insert(v_degree(chart, v));
         return std::vector<int>(degs.begin(), degs.end());
       }()) {
    std::vector<VarIndex> block_vars;
    for (VarIndex v : x2_vars)
      if (v_degree(chart, v) == deg_v) block_vars.push_back(v);
    auto it = im_blocks.find(deg_v);
    linalg::Matrix rows;
    if (it != im_blocks.end())
      for (auto& vec : it->second) {
        linalg::Vector row;
        for (VarIndex v : block_vars) row.push_back(vec[v]);
        rows.push_back(std::move(row));
      }
    std::vector<linalg::Vector> ann;
    if (rows.empty()) {
      for (std::size_t i = 0; i < block_vars.size(); ++i) {
        linalg::Vector e(block_vars.size());
        e[i] = GaussianRational(1);
        ann.push_back(std::move(e));
      }
    } else {
      ann = linalg::nullspace(rows);
    }
    for (auto& f : ann) {
      GradedPolynomial p(m.chart);
      for (std::size_t i = 0; i < block_vars.size(); ++i)
        if (!f[i].is_zero())
          p += GradedPolynomial::variable(m.chart, block_vars[i]).scaled(Scalar(f[i]));
      wplus.push_back(std::move(p));
    }
  }
  std::size_t d = split.x2_pairs.size();
  if (wplus.size() != d)
    throw std::invalid_argument("fiber frame: im(K) does not have Lagrangian dimension");
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t s = r; s < d; ++s)
      if (!bracket_value(wplus[r], wplus[s]).is_zero())
        throw std::invalid_argument("fiber frame: im(K) is not isotropic");

  // Complementary coordinates: pick pivot coordinate functions and normalize
  // (w+_r, w_s) = delta_{rs}.
  std::vector<GradedPolynomial> w(d, GradedPolynomial(m.chart));
  {
    linalg::Matrix G(d, linalg::Vector(x2_vars.size()));
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < x2_vars.size(); ++c)
        G[r][c] = bracket_value(wplus[r], GradedPolynomial::variable(m.chart, x2_vars[c]));
    linalg::Matrix red = G;
    auto pivots = linalg::rref(red);
    if (pivots.size() != d)
      throw std::invalid_argument("fiber frame: could not complete Lagrangian coordinates");
    linalg::Matrix M(d, linalg::Vector(d));
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t s = 0; s < d; ++s) M[r][s] = G[r][pivots[s]];
    auto Minv = linalg::inverse(M);
    if (!Minv) throw std::invalid_argument("fiber frame: degenerate pairing with candidates");
    for (std::size_t s = 0; s < d; ++s)
      for (std::size_t c = 0; c < d; ++c)
        if (!(*Minv)[c][s].is_zero())
          w[s] += GradedPolynomial::variable(m.chart, x2_vars[pivots[c]]).scaled(Scalar((*Minv)[c][s]));
  }

  // Kill the residual (w_r, w_s) brackets by shifting with w+, solving the
  // small linear system exactly.
  {
    linalg::Matrix B(d, linalg::Vector(d)), WW(d, linalg::Vector(d)), WP(d, linalg::Vector(d));
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t s = 0; s < d; ++s) {
        B[r][s] = bracket_value(w[r], w[s]);
        WW[r][s] = bracket_value(wplus[r], w[s]);  // should be delta up to graded flip
        WP[r][s] = bracket_value(w[r], wplus[s]);
      }
    // unknowns alpha_{rs}: w'_r = w_r - sum_s alpha_{rs} w+_s
    // 0 = B_rt - sum_s alpha_{ts} WP'... assemble numerically.
    std::size_t unknowns = d * d;
    linalg::Matrix A(d * d, linalg::Vector(unknowns));
    linalg::Vector rhs(d * d);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t t = 0; t < d; ++t) {
        std::size_t eq = r * d + t;
        rhs[eq] = B[r][t];
        // (alpha_{rs} w+_s, w_t) term
        for (std::size_t s = 0; s < d; ++s) A[eq][r * d + s] += WW[s][t];
        // (w_r, alpha_{ts} w+_s) term
        for (std::size_t s = 0; s < d; ++s) A[eq][t * d + s] += WP[r][s];
      }
    auto alpha = linalg::solve(A, rhs);
    if (!alpha) throw std::invalid_argument("fiber frame: Darboux completion failed");
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t s = 0; s < d; ++s)
        if (!(*alpha)[r * d + s].is_zero())
          w[r] -= wplus[s].scaled(Scalar((*alpha)[r * d + s]));
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t s = 0; s < d; ++s)
        if (!bracket_value(w[r], w[s]).is_zero())
          throw std::logic_error("fiber frame: Darboux completion residual nonzero");
  }

  // Normalize the pair brackets to the chart convention (x, xi) = (-1)^{gh x}.
  for (std::size_t r = 0; r < d; ++r) {
    GaussianRational cur = bracket_value(w[r], wplus[r]);
    if (cur.is_zero()) throw std::logic_error("fiber frame: degenerate pair bracket");
    int gh = *w[r].ghost();
    GaussianRational want((gh % 2 == 0) ? 1 : -1);
    wplus[r] = wplus[r].scaled(Scalar(want / cur));
  }

  // Assemble the big chart and the substitution.
  FiberFrame frame;
  auto big = std::make_shared<DarbouxChart>();
  auto residual = std::make_shared<DarbouxChart>();
  std::vector<bool> pair_in_x2(chart.pairs().size(), false);
  for (std::size_t pi : split.x2_pairs) pair_in_x2[pi] = true;
  for (std::size_t pi = 0; pi < chart.pairs().size(); ++pi) {
    if (pair_in_x2[pi]) continue;
    const auto& p = chart.pairs()[pi];
    big->add_pair(chart.var(p.field).name, chart.var(p.field).ghost, chart.var(p.antifield).name);
    residual->add_pair(chart.var(p.field).name, chart.var(p.field).ghost,
                       chart.var(p.antifield).name);
  }
  std::vector<VarIndex> w_vars, wp_vars;
  for (std::size_t r = 0; r < d; ++r) {
    std::string nm = "w" + std::to_string(r + 1);
    big->add_pair(nm, *w[r].ghost(), nm + "+");
  }
  frame.big = big;
  frame.residual = residual;
  for (std::size_t r = 0; r < d; ++r) {
    frame.int_vars.push_back(big->index_of("w" + std::to_string(r + 1)));
    frame.lagrangian_zero.push_back(big->index_of("w" + std::to_string(r + 1) + "+"));
  }

  // Express old X2 coordinates in the new ones: invert the linear map
  // (w, w+) = N z.
  {
    std::size_t nn = x2_vars.size();
    linalg::Matrix N(nn, linalg::Vector(nn));
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < nn; ++c) {
        Scalar co = w[r].coeff(Monomial::variable(x2_vars[c]));
        N[r][c] = co.is_zero() ? GaussianRational() : co.coeff(0);
        Scalar cp = wplus[r].coeff(Monomial::variable(x2_vars[c]));
        N[d + r][c] = cp.is_zero() ? GaussianRational() : cp.coeff(0);
      }
    auto Ninv = linalg::inverse(N);
    if (!Ninv) throw std::logic_error("fiber frame: coordinate change is singular");
    for (std::size_t c = 0; c < nn; ++c) {
      GradedPolynomial img(frame.big);
      for (std::size_t r = 0; r < d; ++r) {
        if (!(*Ninv)[c][r].is_zero())
          img += GradedPolynomial::variable(frame.big, frame.int_vars[r]).scaled(Scalar((*Ninv)[c][r]));
        if (!(*Ninv)[c][d + r].is_zero())
          img += GradedPolynomial::variable(frame.big, frame.lagrangian_zero[r])
                     .scaled(Scalar((*Ninv)[c][d + r]));
      }
      frame.subst.emplace(x2_vars[c], std::move(img));
    }
  }
  return frame;
}

GradedPolynomial restrict_to_frame(const BvModel& m, const FiberFrame& frame) {
  GradedPolynomial s_big = m.S.substitute(frame.subst, frame.big);
  std::map<VarIndex, GradedPolynomial> zeros;
  for (VarIndex v : frame.lagrangian_zero) zeros.emplace(v, GradedPolynomial::zero(frame.big));
  return s_big.substitute(zeros);
}

}  // namespace

EffectiveSeries fiber_bv_effective_action(const BvModel& m, const FiberSplit& split,
                                          const Propagator& K, const Caps& caps) {
  FiberFrame frame = build_fiber_frame(m, split, K);
  GradedPolynomial s_lag = restrict_to_frame(m, frame);
  GradedPolynomial eff = connected_expansion(s_lag, frame.int_vars, caps);
  return {frame.residual, to_chart(eff, frame.residual)};
}

CyclicLinfty homotopy_transfer(const BvModel& m, const FiberSplit& split, const Propagator& K,
                               const Caps& caps) {
  FiberFrame frame = build_fiber_frame(m, split, K);
  BvModel classical{m.chart, m.S.hbar_slice(0)};
  GradedPolynomial s_lag = restrict_to_frame(classical, frame);

  std::size_t d = frame.int_vars.size();
  // Quadratic pure-w block and its gradient matrix.
  std::vector<bool> is_w(frame.big->size(), false);
  for (VarIndex v : frame.int_vars) is_w[v] = true;
  GradedPolynomial quad(frame.big);
  for (auto& [mono, c] : s_lag.terms())
    if (mono.degree() == 2 && degree_in(mono, is_w) == 2)
      quad += GradedPolynomial::monomial(frame.big, mono, c);
  linalg::Matrix M(d, linalg::Vector(d));
  for (std::size_t r = 0; r < d; ++r) {
    GradedPolynomial gr = quad.derive(frame.int_vars[r], Side::Left);
    for (std::size_t s = 0; s < d; ++s) {
      Scalar c = gr.coeff(Monomial::variable(frame.int_vars[s]));
      M[r][s] = c.is_zero() ? GaussianRational() : c.coeff(0);
    }
  }
  auto Minv = linalg::inverse(M);
  if (!Minv)
    throw std::invalid_argument("homotopy_transfer: degenerate quadratic form on the Lagrangian");

  GradedPolynomial interaction = s_lag - quad;
  std::vector<GradedPolynomial> wstar(d, GradedPolynomial(frame.big));
  for (std::uint32_t iter = 0; iter <= caps.degree_cap + 1; ++iter) {
    std::map<VarIndex, GradedPolynomial> sub;
    for (std::size_t r = 0; r < d; ++r) sub.emplace(frame.int_vars[r], wstar[r]);
    std::vector<GradedPolynomial> grad(d, GradedPolynomial(frame.big));
    for (std::size_t r = 0; r < d; ++r)
      grad[r] = interaction.derive(frame.int_vars[r], Side::Left)
                    .substitute(sub)
                    .degree_truncated(caps.degree_cap);
    for (std::size_t r = 0; r < d; ++r) {
      GradedPolynomial next(frame.big);
      for (std::size_t s = 0; s < d; ++s)
        if (!(*Minv)[r][s].is_zero()) next -= grad[s].scaled(Scalar((*Minv)[r][s]));
      wstar[r] = next;
    }
  }
  // Stationarity witness (exact up to the degree cap).
  {
    std::map<VarIndex, GradedPolynomial> sub;
    for (std::size_t r = 0; r < d; ++r) sub.emplace(frame.int_vars[r], wstar[r]);
    for (std::size_t r = 0; r < d; ++r) {
      GradedPolynomial g =
          s_lag.derive(frame.int_vars[r], Side::Left).substitute(sub).degree_truncated(
              caps.degree_cap / 2 + 1);
      if (!g.is_zero())
        throw std::logic_error("homotopy_transfer: stationarity iteration did not converge");
    }
  }
  std::map<VarIndex, GradedPolynomial> sub;
  for (std::size_t r = 0; r < d; ++r) sub.emplace(frame.int_vars[r], wstar[r]);
  GradedPolynomial s_tree =
      s_lag.substitute(sub).degree_truncated(caps.degree_cap);
  auto residual = std::dynamic_pointer_cast<const DarbouxChart>(frame.residual);
  return extract_linfty(to_chart(s_tree, frame.residual), residual);
}

GradedPolynomial observable_pushforward(const BvModel& m, const GradedPolynomial& O,
                                        const FiberSplit& split, const Propagator& K,
                                        const Caps& caps) {
  if (!check_observable(m.S, O).pass)
    throw GradingError("observable_pushforward: O is not a BV observable for this action");
  FiberFrame frame = build_fiber_frame(m, split, K);
  GradedPolynomial s_lag = restrict_to_frame(m, frame);
  GradedPolynomial o_lag = restrict_to_frame(BvModel{m.chart, O}, frame);
  GradedPolynomial pushed = insertion_expectation(s_lag, o_lag, frame.int_vars, caps);
  return to_chart(pushed, frame.residual);
}

std::optional<std::pair<FiberSplit, Propagator>> cs_heisenberg_transfer_data(const BvModel& m) {
  const auto& chart = *m.chart;
  FiberSplit split;
  for (std::size_t pi = 0; pi < chart.pairs().size(); ++pi) {
    const std::string& n = chart.var(chart.pairs()[pi].field).name;
    if (n.size() >= 3 && n.substr(n.size() - 3) == "_e3") split.x2_pairs.push_back(pi);
  }
  if (split.x2_pairs.empty()) return std::nullopt;
  std::size_t n = chart.size();
  Propagator prop{linalg::Matrix(n, linalg::Vector(n))};
  for (int sign : {1, -1}) {
    for (std::size_t pi : split.x2_pairs) {
      VarIndex fe3 = chart.pairs()[pi].field;      // component on e3, V-degree 1
      VarIndex fe12 = chart.pairs()[pi].antifield;  // component on e12, V-degree 2
      prop.K[fe3][fe12] = GaussianRational(sign);
    }
    try {
      validate_propagator(m, split, prop);
      return std::make_pair(split, prop);
    } catch (const std::exception&) {
      continue;
    }
  }
  return std::nullopt;
}

ZinnJustinResult zinn_justin_effective_action(const BvModel& m, const GradedPolynomial& psi,
                                              const Caps& caps) {
  const auto& chart = *m.chart;
  auto joint = std::make_shared<DarbouxChart>();
  for (const auto& p : chart.pairs())
    joint->add_pair(chart.var(p.field).name, chart.var(p.field).ghost, chart.var(p.antifield).name);
  auto source_chart = std::make_shared<DarbouxChart>();
  for (const auto& p : chart.pairs()) {
    const std::string fn = chart.var(p.field).name;
    joint->add_pair("K_" + fn, chart.var(p.field).ghost, "K+_" + fn);
    source_chart->add_pair("K_" + fn, chart.var(p.field).ghost, "K+_" + fn);
  }
  std::vector<VarIndex> y_vars;
  for (const auto& p : chart.pairs()) {
    const GradedVariable& f = chart.var(p.field);
    y_vars.push_back(joint->add("y_" + f.name, f.ghost));
  }
  DarbouxChartPtr jointp = joint;

  // Antifields onto the source-shifted Lagrangian graph: the gauge-fixing
  // part carries the parity twist of the graph convention, while the source
  // K+_I couples with the normalization of the source-chart pairs (pinned by
  // the CME-of-Gamma theorem on gauge models).
  GradedPolynomial psi_j = to_chart(psi, jointp);
  if (!psi_j.ghost_is(-1) || !psi_j.parity_is(Parity::Odd))
    throw GradingError("zinn_justin: gauge fermion has wrong grading");
  std::map<VarIndex, GradedPolynomial> assignment;
  for (const auto& p : chart.pairs()) {
    const std::string fn = chart.var(p.field).name;
    int sgn = chart.var(p.field).odd() ? -1 : 1;
    GradedPolynomial img =
        psi_j.derive(jointp->index_of(fn), Side::Left).scaled(Scalar(sgn));
    img += GradedPolynomial::variable(jointp, "K+_" + fn);
    assignment.emplace(jointp->index_of(chart.var(p.antifield).name), std::move(img));
  }
  GradedPolynomial s = to_chart(m.S, jointp).substitute(assignment);

  // Background-field split Phi = K + y.
  std::map<VarIndex, GradedPolynomial> background;
  for (std::size_t i = 0; i < chart.pairs().size(); ++i) {
    const auto& p = chart.pairs()[i];
    const std::string fn = chart.var(p.field).name;
    background.emplace(jointp->index_of(fn),
                       GradedPolynomial::variable(jointp, "K_" + fn) +
                           GradedPolynomial::variable(jointp, y_vars[i]));
  }
  s = s.substitute(background);

  GradedPolynomial gamma = connected_expansion(s, y_vars, caps, /*only_1pi=*/true,
                                               /*allow_linear_sources=*/true);
  return {source_chart, to_chart(gamma, source_chart)};
}

}  // namespace bv::pert
