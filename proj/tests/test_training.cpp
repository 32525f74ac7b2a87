#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nst/training.hpp"
#include "oracles.hpp"

using namespace nst;
using namespace nst::train;
using graph::Edge;
using graph::WeightedDigraph;

namespace {

// Identity-encoder model: features pass straight through, the order head is
// the identity on the time slice. Gives full hand control over embeddings.
Model passthrough_model(baselines::GeometryKind kind, int space, int time) {
  spacetime::Dims dims;
  dims.n_features = space + time;
  dims.space = space;
  dims.time = time;
  dims.encoder_hidden_layers = 0;
  dims.metric_depth = 2;
  dims.order_depth = 1;
  Model model(kind, dims);
  model.nst.encoder[0].weight.value = Mat::Identity(space + time, space + time);
  model.nst.encoder[0].bias.value.setZero();
  for (auto& layer : model.nst.order) {
    layer.v_tilde.value.setZero();
    layer.lambda.value.setConstant(1.0);
    layer.bias.value.setZero();
    layer.s.value.setConstant(1.0);
  }
  return model;
}

// Line graph whose euclidean passthrough distances are exact.
WeightedDigraph line_graph(const std::vector<double>& coords, bool exact_weights,
                           double weight_override = 0.0) {
  Mat features(static_cast<int>(coords.size()), 1);
  for (std::size_t i = 0; i < coords.size(); ++i) features(static_cast<int>(i), 0) = coords[i];
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < coords.size(); ++i) {
    double w = exact_weights ? std::abs(coords[i + 1] - coords[i]) : weight_override;
    edges.push_back({static_cast<int>(i), static_cast<int>(i + 1), w});
  }
  return WeightedDigraph(static_cast<int>(coords.size()), std::move(features),
                         std::move(edges));
}

// The five-node example with hand-built spacetime features
// (spatial two dims, then the correct time codes).
WeightedDigraph figure_dag_with_codes() {
  Mat features(5, 4);
  features << 0.0, 0.0, 0.0, 0.0,   // A
              0.1, 0.0, 1.0, 1.0,   // B
              0.2, 0.0, 2.0, 2.0,   // C
              0.3, 0.0, 2.0, 3.0,   // D
              0.4, 0.0, 3.0, 4.0;   // E
  return WeightedDigraph(
      5, std::move(features),
      {{0, 1, 1.0}, {1, 2, 1.0}, {1, 3, 1.0}, {3, 4, 1.0}});
}

}  // namespace

TEST_CASE("steep sigmoid") {
  CHECK(steep_sigmoid(0.0) == 0.5);
  CHECK(steep_sigmoid(-1.0) == doctest::Approx(1.0 / (1.0 + std::exp(10.0))).epsilon(1e-15));
  CHECK(steep_sigmoid(-1.0) == doctest::Approx(4.54e-5).epsilon(1e-2));
  CHECK(steep_sigmoid(1e4) == 1.0);
  CHECK(steep_sigmoid(-1e4) == 0.0);
}

TEST_CASE("distance loss") {
  // Exact passthrough predictions: zero loss.
  Model model = passthrough_model(baselines::GeometryKind::kEuclidean, 1, 0);
  WeightedDigraph exact = line_graph({0.0, 1.0, 3.0}, true);
  CHECK(distance_loss(model, exact) == 0.0);

  // No edges: the mask annihilates everything.
  WeightedDigraph empty(2, Mat::Zero(2, 1), {});
  CHECK(distance_loss(model, empty) == 0.0);

  // One edge, predicted 2, true 1.
  WeightedDigraph off = line_graph({0.0, 2.0}, false, 1.0);
  CHECK(distance_loss(model, off) == 1.0);
}

TEST_CASE("total_correct") {
  Model model = passthrough_model(baselines::GeometryKind::kNst, 2, 2);
  WeightedDigraph good = figure_dag_with_codes();
  CHECK(total_correct(model, good) == 1.0);

  // Reverse every time code: nothing is correct.
  Mat features = good.features();
  features.col(2) *= -1.0;
  features.col(3) *= -1.0;
  WeightedDigraph bad(5, std::move(features),
                      {{0, 1, 1.0}, {1, 2, 1.0}, {1, 3, 1.0}, {3, 4, 1.0}});
  CHECK(total_correct(model, bad) == 0.0);

  WeightedDigraph no_edges(2, Mat::Zero(2, 4), {});
  CHECK_THROWS_AS(total_correct(model, no_edges), EmptyEdgeSet);
}

TEST_CASE("causality loss zeroes exactly when all edges are correct") {
  Model model = passthrough_model(baselines::GeometryKind::kNst, 2, 2);
  CHECK(causality_loss(model, figure_dag_with_codes()) == 0.0);

  // Ties count as correctly embedded (non-strict product order), so a single
  // edge with equal codes is also exactly zero via the masking factor.
  Mat flat(2, 4);
  flat << 0, 0, 1, 1, 0.5, 0, 1, 1;
  WeightedDigraph tie(2, std::move(flat), {{0, 1, 1.0}});
  CHECK(total_correct(model, tie) == 1.0);
  CHECK(causality_loss(model, tie) == 0.0);

  // One edge embedded backwards (差 +1 in both time coordinates):
  // loss = sum_t sigmoid(+1) times (1 - 0).
  Mat rev(2, 4);
  rev << 0, 0, 1, 1, 0.5, 0, 0, 0;
  WeightedDigraph wrong(2, std::move(rev), {{0, 1, 1.0}});
  CHECK(total_correct(model, wrong) == 0.0);
  double expected = 2.0 * steep_sigmoid(1.0);
  CHECK(causality_loss(model, wrong) == doctest::Approx(expected).epsilon(1e-15));

  // Mixed: one good edge, one bad edge, factor becomes one half.
  Mat mixed(3, 4);
  mixed << 0, 0, 0, 0, 0.5, 0, 1, 1, 1.0, 0, 0.5, 0.5;
  WeightedDigraph half(3, std::move(mixed), {{0, 1, 1.0}, {1, 2, 1.0}});
  CHECK(total_correct(model, half) == 0.5);
  double sig_sum = 2.0 * steep_sigmoid(-1.0) + 2.0 * steep_sigmoid(0.5);
  CHECK(causality_loss(model, half) == doctest::Approx(sig_sum * 0.5).epsilon(1e-12));
}

TEST_CASE("global causality loss") {
  Model model = passthrough_model(baselines::GeometryKind::kNst, 2, 2);

  // Correct chain with margins above epsilon: exactly zero.
  Mat chain(3, 4);
  chain << 0, 0, 0, 0, 0.5, 0, 1, 1, 1.0, 0, 2, 2;
  WeightedDigraph good(3, chain, {{0, 1, 1.0}, {1, 2, 1.0}});
  CHECK(global_causality_loss(model, good, 0.1) == 0.0);

  // Chain embedded in reverse: the comparable term is positive.
  Mat rev = chain;
  rev.col(2) *= -1.0;
  rev.col(3) *= -1.0;
  WeightedDigraph bad(3, rev, {{0, 1, 1.0}, {1, 2, 1.0}});
  CHECK(global_causality_loss(model, bad, 0.1) > 0.0);

  // Two-node antichain with identical time codes: the margin term pays
  // epsilon per ordered pair.
  Mat flat(2, 4);
  flat << 0, 0, 1, 1, 0.5, 0, 1, 1;
  WeightedDigraph anti(2, flat, {});
  CHECK(global_causality_loss(model, anti, 0.1) == doctest::Approx(0.2).epsilon(1e-15));

  // Antichains demand at least two time dimensions.
  Model narrow = passthrough_model(baselines::GeometryKind::kNst, 2, 1);
  Mat slim(2, 3);
  slim << 0, 0, 1, 0.5, 0, 1;
  WeightedDigraph anti1(2, slim, {});
  CHECK_THROWS_AS(global_causality_loss(narrow, anti1, 0.1), TooFewTimeDims);
}

TEST_CASE("adamw") {
  // Zero gradient: parameters only see weight decay.
  ad::Param p(Mat::Constant(2, 2, 2.0), -INFINITY, "p");
  std::vector<ad::Param*> ps = {&p};
  AdamW opt;
  double lr = 0.1;
  opt.step(ps, lr, 1.0);
  CHECK(p.value(0, 0) == doctest::Approx(2.0 * (1.0 - lr * 0.01)).epsilon(1e-15));

  // Clip: a gradient of norm 10 against clip 1 becomes norm 1.
  ad::Param q(Mat::Zero(1, 1), -INFINITY, "q");
  q.grad.setConstant(10.0);
  std::vector<ad::Param*> qs = {&q};
  ad::clip_global_norm(qs, 1.0);
  CHECK(q.grad(0, 0) == 1.0);

  // Constraint projection holds after every step.
  ad::Param expo(Mat::Constant(1, 1, 1.0), 1.0, "expo");
  std::vector<ad::Param*> es = {&expo};
  AdamW opt2;
  expo.grad.setConstant(5.0);  // pushes the exponent below 1
  for (int i = 0; i < 10; ++i) opt2.step(es, 0.5, 10.0);
  CHECK(expo.value(0, 0) >= 1.0);

  // Scalar quadratic convergence to the closed-form minimizer.
  ad::Param x(Mat::Zero(1, 1), -INFINITY, "x");
  std::vector<ad::Param*> xs = {&x};
  AdamW plain(0.9, 0.999, 1e-8, 0.0);  // no decay: minimizer is exactly 3
  for (int step = 0; step < 1000; ++step) {
    x.grad.setConstant(2.0 * (x.value(0, 0) - 3.0));
    plain.step(xs, 0.05, 1e9);
  }
  CHECK(std::abs(x.value(0, 0) - 3.0) < 1e-3);
}

TEST_CASE("train zero epochs reports the initialized model") {
  WeightedDigraph g = graph::generate_random_dag(8, 0.7, "m1", 3);
  TrainConfig cfg;
  cfg.space = 2;
  cfg.time = 2;
  cfg.encoder_hidden_layers = 2;
  cfg.encoder_width = 8;
  cfg.epochs = 0;
  cfg.seed = 5;
  TrainResult result = nst::train::train(g, cfg);
  CHECK(result.curve.empty());

  Model fresh = make_model(g, cfg);
  EmbeddingReport again = evaluate(fresh, g, cfg);
  CHECK(result.report.avg_distortion == again.avg_distortion);
  CHECK(result.report.directionality == again.directionality);
}

TEST_CASE("five-node chain trains to full directionality") {
  WeightedDigraph g = line_graph({0.0, 0.25, 0.5, 0.75, 1.0}, true);
  TrainConfig cfg;
  cfg.space = 2;
  cfg.time = 2;
  cfg.encoder_hidden_layers = 3;
  cfg.encoder_width = 16;
  cfg.epochs = 2000;
  cfg.lr = 1e-3;
  cfg.seed = 1;
  TrainResult result = nst::train::train(g, cfg);
  CHECK(result.report.directionality == 1.0);
  CHECK(result.report.closure_directionality == 1.0);
  CHECK(result.report.final_causality_loss == 0.0);
  // Optimization made clear progress on the distance term as well.
  CHECK(result.report.final_distance_loss < result.curve.front().distance_loss);
}

TEST_CASE("evaluate distortion statistics") {
  Model model = passthrough_model(baselines::GeometryKind::kEuclidean, 1, 0);
  WeightedDigraph exact = line_graph({0.0, 1.0, 2.5}, true);
  TrainConfig cfg;
  cfg.geometry = baselines::GeometryKind::kEuclidean;
  cfg.space = 1;
  cfg.time = 0;
  EmbeddingReport report = evaluate(model, exact, cfg);
  CHECK(report.avg_distortion == 1.0);
  CHECK(report.max_distortion == 1.0);
  CHECK(report.std_distortion == 0.0);

  // Double the encoder: predictions uniformly 2x the truth.
  model.nst.encoder[0].weight.value *= 2.0;
  EmbeddingReport doubled = evaluate(model, exact, cfg);
  CHECK(doubled.avg_distortion == 2.0);
  CHECK(doubled.max_distortion == 2.0);
  CHECK(doubled.std_distortion == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("distortion is invariant under node relabeling") {
  Model model = passthrough_model(baselines::GeometryKind::kEuclidean, 1, 0);
  std::vector<double> coords = {0.0, 0.7, 1.1, 2.0};
  WeightedDigraph g = line_graph(coords, true);
  TrainConfig cfg;
  cfg.geometry = baselines::GeometryKind::kEuclidean;
  cfg.space = 1;
  cfg.time = 0;
  EmbeddingReport base = evaluate(model, g, cfg);

  // Relabel nodes with the permutation (3 1 0 2).
  std::vector<int> perm = {3, 1, 0, 2};
  Mat features(4, 1);
  for (int i = 0; i < 4; ++i) features(perm[i], 0) = coords[i];
  std::vector<Edge> edges;
  for (const Edge& e : g.edges())
    edges.push_back({perm[e.u], perm[e.v], e.w});
  WeightedDigraph relabeled(4, std::move(features), std::move(edges));
  EmbeddingReport permuted = evaluate(model, relabeled, cfg);
  CHECK(permuted.avg_distortion == base.avg_distortion);
  CHECK(permuted.max_distortion == base.max_distortion);
  CHECK(permuted.std_distortion == base.std_distortion);
}

TEST_CASE("training is deterministic for a fixed seed") {
  WeightedDigraph g = graph::generate_random_dag(10, 0.6, "m2", 11);
  TrainConfig cfg;
  cfg.space = 2;
  cfg.time = 2;
  cfg.encoder_hidden_layers = 2;
  cfg.encoder_width = 8;
  cfg.epochs = 50;
  cfg.seed = 42;
  TrainResult a = nst::train::train(g, cfg);
  TrainResult b = nst::train::train(g, cfg);
  CHECK(a.report.avg_distortion == b.report.avg_distortion);
  CHECK(a.report.max_distortion == b.report.max_distortion);
  CHECK(a.report.directionality == b.report.directionality);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].distance_loss == b.curve[i].distance_loss);
    CHECK(a.curve[i].causality_loss == b.curve[i].causality_loss);
  }
}

TEST_CASE("loss trends downward on a small protocol") {
  WeightedDigraph g = graph::generate_random_dag(12, 0.8, "m1", 2);
  TrainConfig cfg;
  cfg.space = 4;
  cfg.time = 4;
  cfg.encoder_hidden_layers = 3;
  cfg.encoder_width = 24;
  cfg.epochs = 400;
  cfg.lr = 1e-3;
  cfg.seed = 3;
  TrainResult result = nst::train::train(g, cfg);
  double first = result.curve.front().distance_loss + result.curve.front().causality_loss;
  double last = result.report.final_distance_loss + result.report.final_causality_loss;
  CHECK(last < first);
}

TEST_CASE("pair batching matches full batch on tiny data in expectation") {
  // Smoke: batched training still converges and stays deterministic.
  WeightedDigraph g = graph::generate_random_dag(10, 0.9, "m1", 6);
  TrainConfig cfg;
  cfg.space = 2;
  cfg.time = 2;
  cfg.encoder_hidden_layers = 2;
  cfg.encoder_width = 8;
  cfg.epochs = 30;
  cfg.pair_batch = 7;
  cfg.seed = 9;
  TrainResult a = nst::train::train(g, cfg);
  TrainResult b = nst::train::train(g, cfg);
  CHECK(a.report.final_distance_loss == b.report.final_distance_loss);
  CHECK(a.curve.size() == 30);
}
