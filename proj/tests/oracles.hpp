#pragma once

// Independent reference implementations the tests check the library against.
// Everything here is deliberately written with a different algorithmic route
// than the code under test.

#include <algorithm>
#include <bit>
#include <limits>
#include <queue>
#include <vector>

#include "nst/graph.hpp"
#include "nst/types.hpp"

namespace oracles {

// Maximum antichain by explicit subset enumeration; usable up to ~20 bits.
inline int brute_force_width(const nst::graph::Poset& p) {
  const int k = p.element_count();
  int best = 0;
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    bool antichain = true;
    for (int u = 0; u < k && antichain; ++u) {
      if (!(mask >> u & 1u)) continue;
      for (int v = u + 1; v < k && antichain; ++v) {
        if (!(mask >> v & 1u)) continue;
        if (p.leq(u, v) || p.leq(v, u)) antichain = false;
      }
    }
    if (antichain) best = std::max(best, std::popcount(mask));
  }
  return best;
}

// Single-source Dijkstra on the symmetric weight matrix.
inline nst::Vec dijkstra(const nst::graph::UndirectedView& g, int source) {
  const int k = g.node_count();
  const double inf = std::numeric_limits<double>::infinity();
  nst::Vec dist = nst::Vec::Constant(k, inf);
  dist(source) = 0.0;
  std::priority_queue<std::pair<double, int>, std::vector<std::pair<double, int>>,
                      std::greater<>>
      heap;
  heap.push({0.0, source});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist(u)) continue;
    for (int v = 0; v < k; ++v) {
      if (!g.has_edge(u, v)) continue;
      double nd = d + g.weights()(u, v);
      if (nd < dist(v)) {
        dist(v) = nd;
        heap.push({nd, v});
      }
    }
  }
  return dist;
}

// Random simple undirected graph with dyadic-rational weights so that every
// path sum is exact in binary floating point (the FW/Dijkstra comparison can
// then demand bit equality).
inline nst::graph::UndirectedView random_dyadic_graph(int k, double edge_prob, nst::Rng& rng) {
  nst::Mat w = nst::Mat::Zero(k, k);
  for (int u = 0; u < k; ++u)
    for (int v = u + 1; v < k; ++v)
      if (rng.uniform() < edge_prob) {
        double weight = static_cast<double>(1 + rng.below(64)) / 4.0;
        w(u, v) = weight;
        w(v, u) = weight;
      }
  return nst::graph::UndirectedView(k, std::move(w));
}

// Random poset: closure of a random DAG on index order.
inline nst::graph::Poset random_poset(int k, double edge_prob, nst::Rng& rng) {
  std::vector<nst::graph::Edge> edges;
  for (int u = 0; u < k; ++u)
    for (int v = u + 1; v < k; ++v)
      if (rng.uniform() < edge_prob) edges.push_back({u, v, 1.0});
  auto g = nst::graph::WeightedDigraph::without_features(k, std::move(edges));
  return nst::graph::dag_to_poset(g);
}

// The running five-node example: Hasse edges (A,B),(B,C),(B,D),(D,E) with
// A=0, B=1, C=2, D=3, E=4.
inline nst::graph::WeightedDigraph five_node_dag() {
  return nst::graph::WeightedDigraph::without_features(
      5, {{0, 1, 1.0}, {1, 2, 1.0}, {1, 3, 1.0}, {3, 4, 1.0}});
}

}  // namespace oracles
