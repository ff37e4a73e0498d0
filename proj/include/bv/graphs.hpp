#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bv::graphs {

/// Vertex species: arity (number of half-edges) and hbar order of the
/// coupling. The id tags the interaction term it came from.
struct VertexKind {
  int arity = 0;
  int hbar_order = 0;
  int id = 0;
  friend bool operator==(const VertexKind& a, const VertexKind& b) {
    return a.arity == b.arity && a.hbar_order == b.hbar_order && a.id == b.id;
  }
  friend bool operator<(const VertexKind& a, const VertexKind& b) {
    if (a.arity != b.arity) return a.arity < b.arity;
    if (a.hbar_order != b.hbar_order) return a.hbar_order < b.hbar_order;
    return a.id < b.id;
  }
};

struct HalfEdge {
  int vertex = 0;  // -1-k for external leg k
  int slot = 0;
  friend bool operator==(const HalfEdge& a, const HalfEdge& b) {
    return a.vertex == b.vertex && a.slot == b.slot;
  }
};

/// Connected multigraph built on a fixed vertex multiset plus distinguishable
/// external legs; stores one labelled half-edge matching as the evaluation
/// representative.
struct FeynmanGraph {
  std::vector<VertexKind> vertices;
  std::vector<std::pair<HalfEdge, HalfEdge>> matching;  // all pairings, legs included

  int internal_edge_count() const;
  /// Loop number E - V + 1 of the internal multigraph (legs do not count).
  int loops() const;
  int total_hbar_order() const;  // loops - 1 + sum of vertex hbar orders
  bool connected(int legs) const;

  /// Edge multiset between internal vertices: m[u][v] with self-loops on the
  /// diagonal counted once per loop.
  std::vector<std::vector<int>> adjacency() const;
  /// Leg attachment: leg k -> internal vertex (or -1 for a leg-leg edge).
  std::vector<int> leg_attachment(int legs) const;

  /// Order of the half-edge automorphism group: vertex permutations
  /// preserving kinds, adjacency and leg attachments, times prod m_uv! over
  /// parallel edges, times 2^s s! per vertex for self-loops.
  std::uint64_t automorphisms() const;

  /// Minimal adjacency encoding over kind-preserving vertex permutations.
  std::string canonical_key(int legs) const;
};

/// All isomorphism classes of connected graphs that use exactly the given
/// vertex multiset, carry the given number of distinguishable external legs,
/// and have at most loop_cap loops. With no vertices and two legs the single
/// leg-leg propagator graph is returned.
std::vector<FeynmanGraph> enumerate_graphs(const std::vector<VertexKind>& vertex_multiset,
                                           int external_legs, int loop_cap);

}  // namespace bv::graphs
