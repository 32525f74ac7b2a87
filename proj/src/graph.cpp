#include "nst/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <queue>

namespace nst::graph {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Row-per-node bitsets for reachability closures.
struct BitRows {
  int n = 0;
  int words = 0;
  std::vector<std::uint64_t> bits;

  explicit BitRows(int n_) : n(n_), words((n_ + 63) / 64), bits(static_cast<size_t>(n_) * words, 0) {}
  void set(int r, int c) { bits[static_cast<size_t>(r) * words + c / 64] |= 1ull << (c % 64); }
  bool get(int r, int c) const {
    return (bits[static_cast<size_t>(r) * words + c / 64] >> (c % 64)) & 1ull;
  }
  void or_row(int dst, int src) {
    auto* d = &bits[static_cast<size_t>(dst) * words];
    const auto* s = &bits[static_cast<size_t>(src) * words];
    for (int w = 0; w < words; ++w) d[w] |= s[w];
  }
};

bool rows_intersect(const BitRows& a, int ra, const BitRows& b, int rb) {
  const auto* pa = &a.bits[static_cast<size_t>(ra) * a.words];
  const auto* pb = &b.bits[static_cast<size_t>(rb) * b.words];
  for (int w = 0; w < a.words; ++w)
    if (pa[w] & pb[w]) return true;
  return false;
}

std::vector<int> topological_order(const WeightedDigraph& g) {
  const int k = g.node_count();
  std::vector<int> indeg(k, 0);
  std::vector<std::vector<int>> out(k);
  for (const Edge& e : g.edges()) {
    out[e.u].push_back(e.v);
    ++indeg[e.v];
  }
  std::vector<int> order;
  order.reserve(k);
  // Min-index first keeps the order deterministic.
  std::priority_queue<int, std::vector<int>, std::greater<>> q;
  for (int v = 0; v < k; ++v)
    if (indeg[v] == 0) q.push(v);
  while (!q.empty()) {
    int v = q.top();
    q.pop();
    order.push_back(v);
    for (int w : out[v])
      if (--indeg[w] == 0) q.push(w);
  }
  return order;  // shorter than k iff a cycle exists
}

}  // namespace

WeightedDigraph::WeightedDigraph(int node_count, Mat features, std::vector<Edge> edges)
    : node_count_(node_count), features_(std::move(features)), edges_(std::move(edges)) {
  if (node_count_ <= 0) throw MalformedInput("node count must be positive");
  if (features_.rows() != node_count_)
    throw ShapeMismatch("feature rows must equal node count");
  adjacency_ = IntMat::Zero(node_count_, node_count_);
  distances_ = Mat::Zero(node_count_, node_count_);
  for (const Edge& e : edges_) {
    if (e.u < 0 || e.u >= node_count_ || e.v < 0 || e.v >= node_count_)
      throw MalformedInput("edge endpoint out of range");
    if (e.u == e.v) throw MalformedInput("self-loops are not allowed");
    if (!(e.w > 0.0)) throw NegativeWeight("edge weights must be positive");
    if (adjacency_(e.u, e.v)) throw MalformedInput("duplicate edge");
    adjacency_(e.u, e.v) = 1;
    distances_(e.u, e.v) = e.w;
  }
}

WeightedDigraph WeightedDigraph::without_features(int node_count, std::vector<Edge> edges) {
  return WeightedDigraph(node_count, Mat::Zero(node_count, 1), std::move(edges));
}

Poset::Poset(BoolMat relation) : relation_(std::move(relation)) {
  const int k = static_cast<int>(relation_.rows());
  if (relation_.cols() != k) throw ShapeMismatch("relation must be square");
  for (int u = 0; u < k; ++u) {
    if (!relation_(u, u)) throw MalformedInput("relation is not reflexive");
    for (int v = 0; v < k; ++v) {
      if (u != v && relation_(u, v) && relation_(v, u))
        throw MalformedInput("relation is not antisymmetric");
    }
  }
  for (int w = 0; w < k; ++w)
    for (int u = 0; u < k; ++u)
      if (relation_(u, w))
        for (int v = 0; v < k; ++v)
          if (relation_(w, v) && !relation_(u, v))
            throw MalformedInput("relation is not transitive");
}

UndirectedView::UndirectedView(const WeightedDigraph& g) {
  const int k = g.node_count();
  weights_ = Mat::Zero(k, k);
  const Mat& d = g.distance_matrix();
  for (int u = 0; u < k; ++u)
    for (int v = 0; v < k; ++v)
      if (u != v) weights_(u, v) = std::max(d(u, v), d(v, u));
}

UndirectedView::UndirectedView(int node_count, Mat weights) : weights_(std::move(weights)) {
  if (weights_.rows() != node_count || weights_.cols() != node_count)
    throw ShapeMismatch("weight matrix shape mismatch");
  for (int u = 0; u < node_count; ++u) {
    if (weights_(u, u) != 0.0) throw MalformedInput("diagonal must be zero");
    for (int v = 0; v < node_count; ++v) {
      if (weights_(u, v) != weights_(v, u)) throw MalformedInput("weights must be symmetric");
      if (weights_(u, v) < 0.0) throw NegativeWeight("negative weight");
    }
  }
}

bool is_dag(const WeightedDigraph& g) {
  return static_cast<int>(topological_order(g).size()) == g.node_count();
}

Poset dag_to_poset(const WeightedDigraph& g) {
  const int k = g.node_count();
  std::vector<int> order = topological_order(g);
  if (static_cast<int>(order.size()) != k) throw CyclicInput("input graph has a directed cycle");

  BitRows reach(k);
  std::vector<std::vector<int>> out(k);
  for (const Edge& e : g.edges()) out[e.u].push_back(e.v);
  for (int i = k - 1; i >= 0; --i) {
    int u = order[i];
    reach.set(u, u);
    for (int v : out[u]) reach.or_row(u, v);
  }
  BoolMat rel(k, k);
  for (int u = 0; u < k; ++u)
    for (int v = 0; v < k; ++v) rel(u, v) = reach.get(u, v);
  return Poset(std::move(rel));
}

std::vector<std::pair<int, int>> hasse_reduction(const Poset& p) {
  const int k = p.element_count();
  BitRows up(k), down(k);  // strict up-sets and down-sets
  for (int u = 0; u < k; ++u)
    for (int v = 0; v < k; ++v)
      if (u != v && p.leq(u, v)) {
        up.set(u, v);
        down.set(v, u);
      }
  std::vector<std::pair<int, int>> covers;
  for (int u = 0; u < k; ++u)
    for (int v = 0; v < k; ++v) {
      if (u == v || !p.leq(u, v)) continue;
      // (u,v) is a cover iff no w with u < w < v; such a w sits in the
      // strict up-set of u and the strict down-set of v.
      if (rows_intersect(up, u, down, v)) continue;
      covers.emplace_back(u, v);
    }
  return covers;
}

int poset_width(const Poset& p) {
  const int k = p.element_count();
  // Dilworth: width = k - max matching in the bipartite strict-order graph.
  std::vector<std::vector<int>> adj(k);
  for (int u = 0; u < k; ++u)
    for (int v = 0; v < k; ++v)
      if (u != v && p.leq(u, v)) adj[u].push_back(v);

  std::vector<int> match_right(k, -1);
  std::vector<char> seen(k);
  // Kuhn's algorithm, lowest-index order on both sides.
  auto try_augment = [&](auto&& self, int u) -> bool {
    for (int v : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      if (match_right[v] < 0 || self(self, match_right[v])) {
        match_right[v] = u;
        return true;
      }
    }
    return false;
  };
  int matching = 0;
  for (int u = 0; u < k; ++u) {
    std::fill(seen.begin(), seen.end(), 0);
    if (try_augment(try_augment, u)) ++matching;
  }
  return k - matching;
}

ShortestPaths shortest_paths(const UndirectedView& u) {
  const int k = u.node_count();
  Mat d = Mat::Constant(k, k, kInf);
  for (int i = 0; i < k; ++i) d(i, i) = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (u.has_edge(i, j)) d(i, j) = u.weights()(i, j);

  for (int m = 0; m < k; ++m)
    for (int i = 0; i < k; ++i) {
      if (d(i, m) == kInf) continue;
      for (int j = 0; j < k; ++j) {
        double via = d(i, m) + d(m, j);
        if (via < d(i, j)) d(i, j) = via;
      }
    }
  BoolMat reach(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) reach(i, j) = d(i, j) != kInf;
  return {std::move(d), std::move(reach)};
}

double diameter(const Mat& dist) {
  const int k = static_cast<int>(dist.rows());
  double m = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) m = std::max(m, dist(i, j));
  return m;
}

double separation(const Mat& dist) {
  const int k = static_cast<int>(dist.rows());
  if (k < 2) return 1.0;
  double m = kInf;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j) m = std::min(m, dist(i, j));
  return m;
}

namespace {

// Minimum number of the given candidate balls needed to cover `target`;
// exact search over subsets, branching on the lowest uncovered point.
int min_cover(std::uint32_t target, const std::vector<std::uint32_t>& balls, int best_so_far,
              int used) {
  if (!target) return used;
  if (used + 1 >= best_so_far) return best_so_far;  // cannot improve
  int pivot = std::countr_zero(target);
  int best = best_so_far;
  for (std::uint32_t b : balls) {
    if (!(b >> pivot & 1u)) continue;
    best = std::min(best, min_cover(target & ~b, balls, best, used + 1));
  }
  return best;
}

}  // namespace

int doubling_constant_estimate(const Mat& dist) {
  const int k = static_cast<int>(dist.rows());
  if (k > 16) throw TooLarge("doubling constant enumeration is limited to 16 points");
  if (k <= 1) return 1;

  // Candidate radii: the set system of open balls only changes when r or r/2
  // crosses a realized distance, so midpoints between consecutive critical
  // values (plus one beyond the largest) enumerate every configuration.
  std::vector<double> crit;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (dist(i, j) > 0.0) {
        crit.push_back(dist(i, j));
        crit.push_back(2.0 * dist(i, j));
      }
    }
  std::sort(crit.begin(), crit.end());
  crit.erase(std::unique(crit.begin(), crit.end()), crit.end());
  std::vector<double> radii;
  double prev = 0.0;
  for (double c : crit) {
    radii.push_back(0.5 * (prev + c));
    prev = c;
  }
  radii.push_back(prev + 1.0);

  int constant = 1;
  for (double r : radii) {
    std::vector<std::uint32_t> half_balls(k, 0);
    for (int c = 0; c < k; ++c)
      for (int x = 0; x < k; ++x)
        if (dist(c, x) < r / 2.0) half_balls[c] |= 1u << x;
    for (int c = 0; c < k; ++c) {
      std::uint32_t ball = 0;
      for (int x = 0; x < k; ++x)
        if (dist(c, x) < r) ball |= 1u << x;
      constant = std::max(constant, min_cover(ball, half_balls, k + 1, 0));
    }
  }
  return constant;
}

double synthetic_metric(const std::string& name, double r) {
  if (r < 0.0) throw NegativeInput("distance argument must be non-negative");
  if (name == "m1") return std::pow(r, 0.5) * std::pow(std::log1p(r), 0.5);
  if (name == "m2") return std::pow(r, 0.1) * std::pow(std::log1p(r), 0.9);
  if (name == "m3") return 1.0 - 1.0 / (1.0 + std::pow(r, 0.5));
  if (name == "m4") {
    if (r == 0.0) return 0.0;
    if (r == 1.0) return 1.0 - std::exp(-1.0);  // limit of (r-1)/log(r)
    return 1.0 - std::exp(-(r - 1.0) / std::log(r));
  }
  if (name == "m5") return 1.0 - 1.0 / (1.0 + std::pow(r, 0.2) + std::pow(r, 0.5));
  throw UnknownMetric("unknown synthetic metric: " + name);
}

double synthetic_metric(const std::string& name, const Eigen::Vector2d& x,
                        const Eigen::Vector2d& y) {
  return synthetic_metric(name, (x - y).norm());
}

WeightedDigraph generate_random_dag(int k, double p, const std::string& metric,
                                    std::uint64_t seed) {
  if (k <= 0) throw MalformedInput("node count must be positive");
  if (p < 0.0 || p > 1.0) throw MalformedInput("edge probability must be in [0,1]");
  synthetic_metric(metric, 1.0);  // validate the name up front

  Rng rng(seed);
  // Layered layout: index order is the topological order, rows go top to
  // bottom in [0,1]^2, with a small horizontal jitter so no two nodes share
  // coordinates.
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
  const int rows = (k + cols - 1) / cols;
  Mat coords(k, 2);
  for (int i = 0; i < k; ++i) {
    int r = i / cols;
    int c = i % cols;
    double jitter = rng.uniform(-0.2, 0.2);
    coords(i, 0) = (c + 0.5 + jitter) / cols;
    coords(i, 1) = rows > 1 ? 1.0 - static_cast<double>(r) / (rows - 1) : 0.5;
  }
  std::vector<Edge> edges;
  for (int u = 0; u < k; ++u)
    for (int v = u + 1; v < k; ++v) {
      if (rng.uniform() < p) {
        double w = synthetic_metric(metric, Eigen::Vector2d(coords.row(u)),
                                    Eigen::Vector2d(coords.row(v)));
        edges.push_back({u, v, w});
      }
    }
  return WeightedDigraph(k, std::move(coords), std::move(edges));
}

WeightedDigraph generate_tree(int branching, int n, std::uint64_t seed) {
  if (branching != 2 && branching != 3) throw MalformedInput("branching must be 2 or 3");
  if (n < 1) throw MalformedInput("tree needs at least one node");

  std::vector<Edge> edges;
  for (int v = 1; v < n; ++v) edges.push_back({(v - 1) / branching, v, 1.0});

  // Spring relaxation: unit springs on edges, 1/r^2 repulsion between all
  // pairs, 50 iterations with a decaying step.
  Rng rng(seed);
  Mat pos(n, 2);
  for (int i = 0; i < n; ++i) {
    pos(i, 0) = rng.uniform();
    pos(i, 1) = rng.uniform();
  }
  Mat force(n, 2);
  const double rest = 1.0 / std::sqrt(static_cast<double>(std::max(n, 2)));
  for (int it = 0; it < 50; ++it) {
    force.setZero();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        Eigen::Vector2d d = pos.row(i) - pos.row(j);
        double r2 = std::max(d.squaredNorm(), 1e-8);
        Eigen::Vector2d rep = d / r2 * (rest * rest);  // 1/r^2 falloff
        force.row(i) += rep.transpose();
        force.row(j) -= rep.transpose();
      }
    for (const Edge& e : edges) {
      Eigen::Vector2d d = pos.row(e.v) - pos.row(e.u);
      double r = std::max(d.norm(), 1e-8);
      Eigen::Vector2d att = d * (r - rest) / r;  // unit spring constant
      force.row(e.u) += att.transpose();
      force.row(e.v) -= att.transpose();
    }
    double step = 0.1 * (1.0 - static_cast<double>(it) / 50.0) + 0.01;
    for (int i = 0; i < n; ++i) {
      Eigen::Vector2d f = force.row(i);
      double norm = f.norm();
      if (norm > 1.0) f /= norm;  // cap displacement
      pos.row(i) += step * f.transpose();
    }
  }
  return WeightedDigraph(n, std::move(pos), std::move(edges));
}

}  // namespace nst::graph
