#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nst/types.hpp"

namespace nst::graph {

struct Edge {
  int u = 0;
  int v = 0;
  double w = 1.0;
};

// Simple weighted digraph: no self-loops, at most one edge per ordered pair,
// strictly positive weights. Node features live in the rows of `features`.
class WeightedDigraph {
 public:
  WeightedDigraph(int node_count, Mat features, std::vector<Edge> edges);

  static WeightedDigraph without_features(int node_count, std::vector<Edge> edges);

  int node_count() const { return node_count_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  const Mat& features() const { return features_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const IntMat& adjacency() const { return adjacency_; }
  const Mat& distance_matrix() const { return distances_; }

 private:
  int node_count_;
  Mat features_;          // node_count x N
  std::vector<Edge> edges_;
  IntMat adjacency_;      // binary, A(u,v) = 1 iff edge u->v
  Mat distances_;         // D(u,v) = w for edges, 0 elsewhere (A is the mask)
};

// Reflexive, antisymmetric, transitive relation on {0..k-1}.
class Poset {
 public:
  explicit Poset(BoolMat relation);

  int element_count() const { return static_cast<int>(relation_.rows()); }
  const BoolMat& relation() const { return relation_; }
  bool leq(int u, int v) const { return relation_(u, v); }

 private:
  BoolMat relation_;
};

// Symmetric view of a digraph: W(u,v) = max(W_D(u,v), W_D(v,u)).
class UndirectedView {
 public:
  explicit UndirectedView(const WeightedDigraph& g);
  UndirectedView(int node_count, Mat weights);  // weights must be symmetric, zero diagonal

  int node_count() const { return static_cast<int>(weights_.rows()); }
  const Mat& weights() const { return weights_; }
  bool has_edge(int u, int v) const { return u != v && weights_(u, v) > 0.0; }

 private:
  Mat weights_;
};

bool is_dag(const WeightedDigraph& g);

// Reflexive transitive closure of reachability. Throws CyclicInput.
Poset dag_to_poset(const WeightedDigraph& g);

// Cover relations (transitive reduction of the strict order).
std::vector<std::pair<int, int>> hasse_reduction(const Poset& p);

// Maximum antichain size via minimum chain cover (Dilworth duality).
// Augmenting paths are searched in lowest-index order.
int poset_width(const Poset& p);

// All-pairs geodesics (Floyd-Warshall). Unreachable pairs are reported as
// std::nullopt wrappers via the companion mask: entry is +inf in the matrix
// and `reachable` is false. Serialization is expected to write these as
// absent, never as a numeric infinity.
struct ShortestPaths {
  Mat dist;                 // +inf where unreachable
  BoolMat reachable;
  bool reachable_pair(int u, int v) const { return reachable(u, v); }
};
ShortestPaths shortest_paths(const UndirectedView& u);

// Max / min-positive pairwise distance of a finite metric given as a full
// distance matrix. A singleton has sep defined as 1.
double diameter(const Mat& dist);
double separation(const Mat& dist);

// Exact doubling constant by enumeration; throws TooLarge above 16 points.
int doubling_constant_estimate(const Mat& dist);

// Table-1 synthetic metrics, evaluated on r = |x - y|_2. Valid names are
// m1..m5.
double synthetic_metric(const std::string& name, double r);
double synthetic_metric(const std::string& name, const Eigen::Vector2d& x,
                        const Eigen::Vector2d& y);

// Random DAG on a deterministic layered planar layout in [0,1]^2; node index
// order is the topological order, edges go from lower to higher index with
// probability p, weights come from the named synthetic metric on the layout
// coordinates. Node features are the coordinates.
WeightedDigraph generate_random_dag(int k, double p, const std::string& metric,
                                    std::uint64_t seed);

// Complete binary/ternary tree with unit weights, edges parent->child.
// Coordinates come from a seeded spring relaxation (fixed 50 iterations)
// and are stored as the node features.
WeightedDigraph generate_tree(int branching, int n, std::uint64_t seed);

}  // namespace nst::graph
