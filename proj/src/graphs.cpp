#include "bv/graphs.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace bv::graphs {

int FeynmanGraph::internal_edge_count() const {
  int e = 0;
  for (auto& [a, b] : matching)
    if (a.vertex >= 0 && b.vertex >= 0) ++e;
  return e;
}

int FeynmanGraph::loops() const {
  if (vertices.empty()) return 0;
  return internal_edge_count() - static_cast<int>(vertices.size()) + 1;
}

int FeynmanGraph::total_hbar_order() const {
  int p = 0;
  for (auto& v : vertices) p += v.hbar_order;
  return loops() - 1 + p;
}

bool FeynmanGraph::connected(int legs) const {
  (void)legs;
  std::size_t n = vertices.size();
  if (n == 0) return true;
  std::vector<int> comp(n);
  std::iota(comp.begin(), comp.end(), 0);
  std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
  for (auto& [a, b] : matching)
    if (a.vertex >= 0 && b.vertex >= 0) {
      int ra = find(a.vertex), rb = find(b.vertex);
      if (ra != rb) comp[ra] = rb;
    }
  int root = find(0);
  for (std::size_t i = 1; i < n; ++i)
    if (find(static_cast<int>(i)) != root) return false;
  return true;
}

std::vector<std::vector<int>> FeynmanGraph::adjacency() const {
  std::size_t n = vertices.size();
  std::vector<std::vector<int>> m(n, std::vector<int>(n, 0));
  for (auto& [a, b] : matching) {
    if (a.vertex < 0 || b.vertex < 0) continue;
    if (a.vertex == b.vertex)
      m[static_cast<std::size_t>(a.vertex)][static_cast<std::size_t>(a.vertex)] += 1;
    else {
      m[static_cast<std::size_t>(a.vertex)][static_cast<std::size_t>(b.vertex)] += 1;
      m[static_cast<std::size_t>(b.vertex)][static_cast<std::size_t>(a.vertex)] += 1;
    }
  }
  return m;
}

std::vector<int> FeynmanGraph::leg_attachment(int legs) const {
  std::vector<int> at(static_cast<std::size_t>(legs), -1);
  for (auto& [a, b] : matching) {
    if (a.vertex < 0 && b.vertex >= 0) at[static_cast<std::size_t>(-1 - a.vertex)] = b.vertex;
    if (b.vertex < 0 && a.vertex >= 0) at[static_cast<std::size_t>(-1 - b.vertex)] = a.vertex;
  }
  return at;
}

namespace {

void for_each_kind_permutation(const std::vector<VertexKind>& kinds,
                               const std::function<void(const std::vector<int>&)>& fn) {
  std::size_t n = kinds.size();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i)
      if (!(kinds[static_cast<std::size_t>(perm[i])] == kinds[i])) ok = false;
    if (ok) fn(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

}  // namespace

std::uint64_t FeynmanGraph::automorphisms() const {
  auto adj = adjacency();
  std::size_t n = vertices.size();
  int max_leg = -1;
  for (auto& [a, b] : matching) {
    if (a.vertex < 0) max_leg = std::max(max_leg, -1 - a.vertex);
    if (b.vertex < 0) max_leg = std::max(max_leg, -1 - b.vertex);
  }
  auto legs_at = leg_attachment(max_leg + 1);

  std::uint64_t vertex_auts = 0;
  if (n == 0) {
    vertex_auts = 1;
  } else {
    for_each_kind_permutation(vertices, [&](const std::vector<int>& p) {
      for (int l = 0; l <= max_leg; ++l) {
        int v = legs_at[static_cast<std::size_t>(l)];
        if (v >= 0 && p[static_cast<std::size_t>(v)] != v) return;
      }
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v)
          if (adj[u][v] !=
              adj[static_cast<std::size_t>(p[u])][static_cast<std::size_t>(p[v])])
            return;
      ++vertex_auts;
    });
  }

  std::uint64_t factor = 1;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v)
      for (int k = 2; k <= adj[u][v]; ++k) factor *= static_cast<std::uint64_t>(k);
    int s = adj[u][u];
    for (int k = 0; k < s; ++k) factor *= 2;
    for (int k = 2; k <= s; ++k) factor *= static_cast<std::uint64_t>(k);
  }
  return vertex_auts * factor;
}

std::string FeynmanGraph::canonical_key(int legs) const {
  std::size_t n = vertices.size();
  auto adj = adjacency();
  auto legs_at = leg_attachment(legs);
  if (n == 0) {
    std::ostringstream os;
    for (auto& [a, b] : matching) os << a.vertex << "," << b.vertex << ";";
    return os.str();
  }
  std::string best;
  for_each_kind_permutation(vertices, [&](const std::vector<int>& p) {
    std::vector<int> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[static_cast<std::size_t>(p[i])] = static_cast<int>(i);
    std::ostringstream os;
    for (std::size_t u = 0; u < n; ++u) {
      const VertexKind& k = vertices[static_cast<std::size_t>(p[u])];
      os << k.arity << ":" << k.hbar_order << ":" << k.id << "|";
      for (std::size_t v = 0; v < n; ++v)
        os << adj[static_cast<std::size_t>(p[u])][static_cast<std::size_t>(p[v])] << ",";
    }
    os << "L";
    for (int l = 0; l < legs; ++l) {
      int v = legs_at[static_cast<std::size_t>(l)];
      os << (v >= 0 ? inv[static_cast<std::size_t>(v)] : -1) << ",";
    }
    std::string key = os.str();
    if (best.empty() || key < best) best = key;
  });
  return best;
}

std::vector<FeynmanGraph> enumerate_graphs(const std::vector<VertexKind>& vertex_multiset,
                                           int external_legs, int loop_cap) {
  std::vector<HalfEdge> half;
  std::vector<VertexKind> kinds = vertex_multiset;
  std::sort(kinds.begin(), kinds.end());
  for (std::size_t v = 0; v < kinds.size(); ++v)
    for (int s = 0; s < kinds[v].arity; ++s) half.push_back({static_cast<int>(v), s});
  for (int l = 0; l < external_legs; ++l) half.push_back({-1 - l, 0});

  std::vector<FeynmanGraph> out;
  std::set<std::string> seen;
  if (half.size() % 2 != 0) return out;

  // Matching enumeration with three exactness-preserving prunings: loop
  // counting through a union-find (branches over the cap die early), slot
  // symmetry (only the first free slot of each target vertex; slots are
  // interchangeable and classes are deduplicated anyway), and orbit symmetry
  // (among so-far-untouched identical vertices only the lowest index is a
  // valid target). Every isomorphism class keeps at least one representative.
  std::vector<int> partner(half.size(), -1);
  std::vector<bool> touched(kinds.size(), false);
  std::vector<int> comp(kinds.size());
  std::iota(comp.begin(), comp.end(), 0);
  std::function<int(int)> find = [&](int x) { return comp[static_cast<std::size_t>(x)] == x
                                                         ? x
                                                         : comp[static_cast<std::size_t>(x)] =
                                                               find(comp[static_cast<std::size_t>(x)]); };

  auto first_free_slot = [&](int vertex, std::size_t from) -> std::size_t {
    for (std::size_t j = from; j < half.size(); ++j)
      if (half[j].vertex == vertex && partner[j] < 0) return j;
    return half.size();
  };

  int loops_so_far = 0;
  std::function<void()> rec = [&]() {
    std::size_t first = half.size();
    for (std::size_t i = 0; i < half.size(); ++i)
      if (partner[i] < 0) {
        first = i;
        break;
      }
    if (first == half.size()) {
      FeynmanGraph g;
      g.vertices = kinds;
      for (std::size_t i = 0; i < half.size(); ++i)
        if (partner[i] > static_cast<int>(i))
          g.matching.push_back({half[i], half[static_cast<std::size_t>(partner[i])]});
      if (!kinds.empty())
        for (auto& [a, b] : g.matching)
          if (a.vertex < 0 && b.vertex < 0) return;
      if (!g.connected(external_legs)) return;
      if (g.loops() < 0 || g.loops() > loop_cap) return;
      std::string key = g.canonical_key(external_legs);
      if (seen.insert(key).second) out.push_back(std::move(g));
      return;
    }

    // Candidate targets: first free slot per vertex (with the orbit pruning),
    // and every free leg (legs are distinguishable).
    std::vector<std::size_t> targets;
    int src_vertex = half[first].vertex;
    for (std::size_t v = 0; v < kinds.size(); ++v) {
      std::size_t j = first_free_slot(static_cast<int>(v), first + 1);
      if (j == half.size()) continue;
      // Orbit pruning: among untouched identical vertices other than the
      // source of the half-edge being matched, only the lowest index is a
      // representative target.
      if (!touched[v] && static_cast<int>(v) != src_vertex) {
        bool shadowed = false;
        for (std::size_t w = 0; w < v; ++w)
          if (static_cast<int>(w) != src_vertex && !touched[w] && kinds[w] == kinds[v] &&
              first_free_slot(static_cast<int>(w), first + 1) != half.size())
            shadowed = true;
        if (shadowed) continue;
      }
      targets.push_back(j);
    }
    for (std::size_t j = first + 1; j < half.size(); ++j)
      if (half[j].vertex < 0 && partner[j] < 0) targets.push_back(j);

    for (std::size_t j : targets) {
      if (j <= first || partner[j] >= 0) continue;
      int va = half[first].vertex, vb = half[j].vertex;
      int saved_loops = loops_so_far;
      std::vector<int> comp_saved = comp;
      std::vector<bool> touched_saved = touched;
      if (va >= 0 && vb >= 0) {
        int ra = find(va), rb = find(vb);
        if (ra == rb) {
          ++loops_so_far;
          if (loops_so_far > loop_cap) {
            loops_so_far = saved_loops;
            continue;
          }
        } else {
          comp[static_cast<std::size_t>(ra)] = rb;
        }
      }
      if (va >= 0) touched[static_cast<std::size_t>(va)] = true;
      if (vb >= 0) touched[static_cast<std::size_t>(vb)] = true;
      partner[first] = static_cast<int>(j);
      partner[j] = static_cast<int>(first);
      rec();
      partner[first] = -1;
      partner[j] = -1;
      comp = std::move(comp_saved);
      touched = std::move(touched_saved);
      loops_so_far = saved_loops;
    }
  };
  rec();
  return out;
}

}  // namespace bv::graphs
