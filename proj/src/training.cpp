#include "nst/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace nst::train {

using ad::Param;
using ad::Tape;
using ad::Var;
using baselines::GeometryKind;
using graph::WeightedDigraph;

void TrainConfig::validate() const {
  if (space <= 0) throw ConstraintViolation("space dimension must be positive");
  if (time < 0) throw ConstraintViolation("time dimension must be non-negative");
  if (geometry == GeometryKind::kNst && time == 0 && !global_distance)
    throw ConstraintViolation("nst DAG training needs at least one time dimension");
  if (encoder_width <= 0 || encoder_hidden_layers < 0)
    throw ConstraintViolation("encoder shape invalid");
  if (metric_depth < 1 || order_depth < 1) throw ConstraintViolation("network depth invalid");
  if (!(lr > 0.0)) throw ConstraintViolation("learning rate must be positive");
  if (epochs < 0) throw ConstraintViolation("epochs must be non-negative");
  if (!(clip_norm > 0.0)) throw ConstraintViolation("clip norm must be positive");
  if (pair_batch < 0) throw ConstraintViolation("pair batch must be non-negative");
  if (!(epsilon >= 0.0)) throw ConstraintViolation("epsilon must be non-negative");
  if (!(desitter_radius > 0.0)) throw ConstraintViolation("curvature radius must be positive");
}

Model::Model(GeometryKind kind, spacetime::Dims dims, double desitter_r)
    : geometry(kind), nst(dims), desitter_radius(desitter_r) {
  if (kind == GeometryKind::kSnowflakeV1)
    snowflake.emplace(dims.metric_depth, std::max(dims.space + dims.time, 1));
}

void Model::init_weights(std::uint64_t seed_value) {
  seed = seed_value;
  nst.init_weights(seed_value);
  if (snowflake) snowflake->init_weights(seed_value + 1);
}

std::vector<Param*> Model::trainable() {
  if (geometry == GeometryKind::kNst) return nst.params();
  // Fixed geometries train the encoder only; snowflake-v1 adds its head.
  std::vector<Param*> out;
  for (spacetime::LinearLayer& layer : nst.encoder) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  if (geometry == GeometryKind::kSnowflakeV1 && snowflake) {
    auto sf = snowflake->params();
    out.insert(out.end(), sf.begin(), sf.end());
  }
  return out;
}

bool Model::has_time_codes() const {
  switch (geometry) {
    case GeometryKind::kNst: return nst.dims().time > 0;
    case GeometryKind::kMinkowski:
    case GeometryKind::kDesitter: return true;
    default: return false;
  }
}

Model make_model(const WeightedDigraph& g, const TrainConfig& cfg) {
  cfg.validate();
  spacetime::Dims dims;
  dims.n_features = g.feature_dim();
  dims.space = cfg.space;
  dims.time = cfg.time;
  dims.encoder_hidden_layers = cfg.encoder_hidden_layers;
  dims.encoder_width = cfg.encoder_width;
  dims.metric_depth = cfg.metric_depth;
  dims.order_depth = cfg.order_depth;
  Model model(cfg.geometry, dims, cfg.desitter_radius);
  model.init_weights(cfg.seed);
  return model;
}

PairSet build_pair_set(const WeightedDigraph& g, const TrainConfig& cfg) {
  PairSet pairs;
  if (cfg.global_distance) {
    graph::ShortestPaths sp = graph::shortest_paths(graph::UndirectedView(g));
    for (int u = 0; u < g.node_count(); ++u)
      for (int v = u + 1; v < g.node_count(); ++v) {
        if (!sp.reachable_pair(u, v)) continue;
        pairs.u.push_back(u);
        pairs.v.push_back(v);
        pairs.target.push_back(sp.dist(u, v));
      }
  } else {
    for (const graph::Edge& e : g.edges()) {
      pairs.u.push_back(e.u);
      pairs.v.push_back(e.v);
      pairs.target.push_back(e.w);
    }
  }
  return pairs;
}

double steep_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-10.0 * x)); }

std::optional<Var> build_time_codes(Model& model, Tape& tape, Var xhat) {
  switch (model.geometry) {
    case GeometryKind::kNst:
      if (model.nst.dims().time == 0) return std::nullopt;
      return model.nst.time_codes(tape, xhat);
    case GeometryKind::kMinkowski:
    case GeometryKind::kDesitter:
      // Coordinate 0 is the single Lorentzian time dimension.
      return tape.slice_cols(xhat, 0, 1);
    default:
      return std::nullopt;
  }
}

namespace {

Var euclidean_batch(Tape& tape, Var xhat, const PairSet& pairs) {
  Var xu = tape.gather_rows(xhat, pairs.u);
  Var xv = tape.gather_rows(xhat, pairs.v);
  Var sq = tape.row_sum(tape.square(tape.sub(xu, xv)));
  return tape.sign_pow(sq, tape.scalar(0.5));
}

Var minkowski_batch(Tape& tape, Var xhat, const PairSet& pairs) {
  int dim = static_cast<int>(tape.value(xhat).cols());
  if (dim < 2) throw ShapeMismatch("minkowski needs one time and at least one space coordinate");
  Var delta = tape.sub(tape.gather_rows(xhat, pairs.v), tape.gather_rows(xhat, pairs.u));
  Var dt2 = tape.square(tape.slice_cols(delta, 0, 1));
  Var dx2 = tape.row_sum(tape.square(tape.slice_cols(delta, 1, dim - 1)));
  Var s2 = tape.relu(tape.sub(dt2, dx2));
  return tape.sign_pow(s2, tape.scalar(0.5));
}

// R * acos(<z_u, z_v>_M / (sqrt(q_u) sqrt(q_v))); the defined mask marks
// pairs whose projections exist and whose arccos argument is inside [-1,1].
DistancePrediction desitter_batch(Tape& tape, Var xhat, const PairSet& pairs, double radius) {
  int dim = static_cast<int>(tape.value(xhat).cols());
  if (dim < 2) throw ShapeMismatch("de sitter needs one time and at least one space coordinate");
  Var xu = tape.gather_rows(xhat, pairs.u);
  Var xv = tape.gather_rows(xhat, pairs.v);
  auto inner = [&](Var a, Var b) {
    Var space = tape.row_sum(tape.mul(tape.slice_cols(a, 1, dim - 1),
                                      tape.slice_cols(b, 1, dim - 1)));
    Var time = tape.mul(tape.slice_cols(a, 0, 1), tape.slice_cols(b, 0, 1));
    return tape.sub(space, time);
  };
  Var qu = inner(xu, xu);
  Var qv = inner(xv, xv);
  Mat qu_v = tape.value(qu);
  Mat qv_v = tape.value(qv);

  // Normalizers are guarded so the graph stays finite on skipped pairs.
  Var qu_safe = tape.sign_pow(tape.relu(qu), tape.scalar(0.5));
  Var qv_safe = tape.sign_pow(tape.relu(qv), tape.scalar(0.5));
  Var denom = tape.add(tape.mul(qu_safe, qv_safe), tape.scalar(1e-300));
  Var arg = tape.div(inner(xu, xv), denom);

  Mat arg_v = tape.value(arg);
  DistancePrediction out;
  out.defined.resize(pairs.size());
  Mat clamp_mask(arg_v.rows(), 1);
  for (int i = 0; i < arg_v.rows(); ++i) {
    bool projectable = qu_v(i, 0) > 0.0 && qv_v(i, 0) > 0.0;
    bool inside = projectable && arg_v(i, 0) >= -1.0 && arg_v(i, 0) <= 1.0;
    out.defined[static_cast<std::size_t>(i)] = inside;
    if (!inside) ++out.skipped;
    clamp_mask(i, 0) = inside ? 1.0 : 0.0;
  }
  // Zero the argument of undefined pairs before acos so no NaN enters the
  // tape; those rows are masked out of the loss anyway.
  Var masked_arg = tape.mul(arg, tape.constant(clamp_mask));
  out.pred = tape.mul(tape.scalar(radius), tape.acos(masked_arg));
  return out;
}

}  // namespace

DistancePrediction build_distances(Model& model, Tape& tape, Var xhat, const PairSet& pairs) {
  DistancePrediction out;
  out.defined.assign(pairs.size(), true);
  switch (model.geometry) {
    case GeometryKind::kNst:
      out.pred = model.nst.quasi_metric_batch(tape, xhat, pairs.u, pairs.v);
      return out;
    case GeometryKind::kEuclidean:
      out.pred = euclidean_batch(tape, xhat, pairs);
      return out;
    case GeometryKind::kMinkowski:
      out.pred = minkowski_batch(tape, xhat, pairs);
      return out;
    case GeometryKind::kDesitter:
      return desitter_batch(tape, xhat, pairs, model.desitter_radius);
    case GeometryKind::kSnowflakeV1: {
      Var r = euclidean_batch(tape, xhat, pairs);
      out.pred = model.snowflake->distance_batch(tape, r);
      return out;
    }
  }
  throw Error("unreachable geometry");
}

namespace {

// Per-edge correctness of the learned order on the one-hop edges: an edge is
// correct when sum_t relu(T_u - T_v) is exactly zero.
double total_correct_from_codes(const Mat& codes, const WeightedDigraph& g) {
  if (g.edges().empty()) throw EmptyEdgeSet("total_correct needs at least one edge");
  int correct = 0;
  for (const graph::Edge& e : g.edges()) {
    bool ok = true;
    for (int t = 0; t < codes.cols(); ++t)
      if (codes(e.u, t) > codes(e.v, t)) {
        ok = false;
        break;
      }
    if (ok) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(g.edges().size());
}

struct CausalityTerm {
  Var loss;
  double total_correct = -1.0;
};

// Local (one-hop) causality loss, eq.-style: the steep-sigmoid margin sum
// masked by A and damped by the non-differentiable (1 - TotalCorrect) factor.
CausalityTerm local_causality(Tape& tape, Var time_codes, const WeightedDigraph& g) {
  CausalityTerm out;
  std::vector<int> eu, ev;
  eu.reserve(g.edges().size());
  ev.reserve(g.edges().size());
  for (const graph::Edge& e : g.edges()) {
    eu.push_back(e.u);
    ev.push_back(e.v);
  }
  out.total_correct = total_correct_from_codes(tape.value(time_codes), g);
  Var diff = tape.sub(tape.gather_rows(time_codes, eu), tape.gather_rows(time_codes, ev));
  Var sig_sum = tape.sum(tape.steep_sigmoid(diff));
  // The factor is a constant on the tape: its gradient is deliberately zero.
  out.loss = tape.mul(sig_sum, tape.scalar(1.0 - out.total_correct));
  return out;
}

struct GlobalMasks {
  std::vector<int> comparable_u, comparable_v;  // u strictly precedes v
  std::vector<int> anti_u, anti_v;              // ordered antichain pairs
};

GlobalMasks global_masks(const WeightedDigraph& g) {
  graph::Poset poset = graph::dag_to_poset(g);  // throws CyclicInput
  GlobalMasks masks;
  const int k = g.node_count();
  for (int u = 0; u < k; ++u)
    for (int v = 0; v < k; ++v) {
      if (u == v) continue;
      if (poset.leq(u, v)) {
        masks.comparable_u.push_back(u);
        masks.comparable_v.push_back(v);
      } else if (!poset.leq(v, u)) {
        masks.anti_u.push_back(u);
        masks.anti_v.push_back(v);
      }
    }
  return masks;
}

CausalityTerm global_causality(Tape& tape, Var time_codes, const WeightedDigraph& g,
                               double epsilon, bool smooth) {
  GlobalMasks masks = global_masks(g);
  int time_dims = static_cast<int>(tape.value(time_codes).cols());
  if (!masks.anti_u.empty() && time_dims < 2)
    throw TooFewTimeDims("antichains need at least two time dimensions");

  auto barrier = [&](Var x) { return smooth ? tape.steep_sigmoid(x) : tape.relu(x); };

  CausalityTerm out;
  // A pure antichain has no edges; only the no-causality term applies then.
  if (!g.edges().empty())
    out.total_correct = total_correct_from_codes(tape.value(time_codes), g);
  Var total = tape.scalar(0.0);
  if (!masks.comparable_u.empty()) {
    Var diff = tape.sub(tape.gather_rows(time_codes, masks.comparable_u),
                        tape.gather_rows(time_codes, masks.comparable_v));
    total = tape.add(total, tape.sum(barrier(diff)));
  }
  if (!masks.anti_u.empty()) {
    Var diff = tape.add(tape.sub(tape.gather_rows(time_codes, masks.anti_v),
                                 tape.gather_rows(time_codes, masks.anti_u)),
                        tape.scalar(epsilon));
    total = tape.add(total, tape.sum(tape.row_min(barrier(diff))));
  }
  out.loss = total;
  return out;
}

}  // namespace

LossPieces build_loss(Model& model, Tape& tape, const WeightedDigraph& g, const PairSet& pairs,
                      const TrainConfig& cfg) {
  LossPieces out;
  Var xhat = model.nst.encode(tape, tape.constant(g.features()));

  // Distance term: A-masked MSE, normalized by the number of scored pairs.
  DistancePrediction dist = build_distances(model, tape, xhat, pairs);
  out.skipped_pairs = dist.skipped;
  Mat target(static_cast<int>(pairs.size()), 1);
  Mat defined(static_cast<int>(pairs.size()), 1);
  int scored = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    target(static_cast<int>(i), 0) = pairs.target[i];
    defined(static_cast<int>(i), 0) = dist.defined[i] ? 1.0 : 0.0;
    if (dist.defined[i]) ++scored;
  }
  Var sq = tape.square(tape.sub(dist.pred, tape.constant(target)));
  if (out.skipped_pairs > 0) sq = tape.mul(sq, tape.constant(defined));
  Var distance_term =
      scored > 0 ? tape.div(tape.sum(sq), tape.scalar(static_cast<double>(scored)))
                 : tape.scalar(0.0);
  out.distance_value = tape.value(distance_term)(0, 0);

  Var total = tape.mul(tape.scalar(cfg.weight_distance), distance_term);

  bool causality_active =
      model.has_time_codes() && !cfg.global_distance &&
      (!g.edges().empty() || cfg.causality == CausalityMode::kGlobal);
  if (causality_active) {
    Var codes = *build_time_codes(model, tape, xhat);
    CausalityTerm term = cfg.causality == CausalityMode::kLocal
                             ? local_causality(tape, codes, g)
                             : global_causality(tape, codes, g, cfg.epsilon, cfg.smooth_global);
    out.total_correct = term.total_correct;
    out.causality_value = tape.value(term.loss)(0, 0);
    total = tape.add(total, tape.mul(tape.scalar(cfg.weight_causality), term.loss));
  }
  out.total = total;
  return out;
}

double distance_loss(Model& model, const WeightedDigraph& g) {
  TrainConfig cfg;
  cfg.geometry = model.geometry;
  Tape tape;
  PairSet pairs = build_pair_set(g, cfg);
  if (pairs.size() == 0) return 0.0;
  Var xhat = model.nst.encode(tape, tape.constant(g.features()));
  DistancePrediction dist = build_distances(model, tape, xhat, pairs);
  const Mat& pred = tape.value(dist.pred);
  double sum = 0.0;
  int scored = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!dist.defined[i]) continue;
    double d = pred(static_cast<int>(i), 0) - pairs.target[i];
    sum += d * d;
    ++scored;
  }
  return scored ? sum / scored : 0.0;
}

double total_correct(Model& model, const WeightedDigraph& g) {
  if (!model.has_time_codes()) throw ShapeMismatch("geometry has no time codes");
  Tape tape;
  Var xhat = model.nst.encode(tape, tape.constant(g.features()));
  Var codes = *build_time_codes(model, tape, xhat);
  return total_correct_from_codes(tape.value(codes), g);
}

double causality_loss(Model& model, const WeightedDigraph& g) {
  if (!model.has_time_codes()) throw ShapeMismatch("geometry has no time codes");
  Tape tape;
  Var xhat = model.nst.encode(tape, tape.constant(g.features()));
  Var codes = *build_time_codes(model, tape, xhat);
  CausalityTerm term = local_causality(tape, codes, g);
  return tape.value(term.loss)(0, 0);
}

double global_causality_loss(Model& model, const WeightedDigraph& g, double epsilon,
                             bool smooth) {
  if (!model.has_time_codes()) throw ShapeMismatch("geometry has no time codes");
  Tape tape;
  Var xhat = model.nst.encode(tape, tape.constant(g.features()));
  Var codes = *build_time_codes(model, tape, xhat);
  CausalityTerm term = global_causality(tape, codes, g, epsilon, smooth);
  return tape.value(term.loss)(0, 0);
}

void AdamW::step(std::vector<Param*>& params, double lr, double clip_norm) {
  if (m_.empty()) {
    for (Param* p : params) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw ShapeMismatch("optimizer state does not match params");

  ad::clip_global_norm(params, clip_norm);
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param* p = params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p->grad;
    v_[i] = (beta2_ * v_[i].array() + (1.0 - beta2_) * p->grad.array().square()).matrix();
    Mat m_hat = m_[i] / bc1;
    Mat v_hat = v_[i] / bc2;
    p->value.array() -=
        lr * (m_hat.array() / (v_hat.array().sqrt() + eps_) + weight_decay_ * p->value.array());
    if (std::isfinite(p->lower_bound))
      p->value = p->value.cwiseMax(p->lower_bound);  // constraint projection
  }
}

EmbeddingReport evaluate(Model& model, const WeightedDigraph& g, const PairSet& pairs,
                         const TrainConfig& cfg) {
  EmbeddingReport report;
  Tape tape;
  Var xhat = model.nst.encode(tape, tape.constant(g.features()));
  if (pairs.size() > 0) {
    DistancePrediction dist = build_distances(model, tape, xhat, pairs);
    Mat pred = tape.value(dist.pred);
    report.skipped_pairs = dist.skipped;
    double sum = 0.0, sum_sq = 0.0, mse = 0.0;
    int finite = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!dist.defined[i]) continue;
      double ratio = pred(static_cast<int>(i), 0) / pairs.target[i];
      report.distortion.push_back(ratio);
      if (!std::isfinite(ratio)) {
        ++report.nonfinite_pairs;
        continue;
      }
      sum += ratio;
      sum_sq += ratio * ratio;
      report.max_distortion = std::max(report.max_distortion, ratio);
      double err = pred(static_cast<int>(i), 0) - pairs.target[i];
      mse += err * err;
      ++finite;
    }
    if (finite > 0) {
      report.avg_distortion = sum / finite;
      double var = sum_sq / finite - report.avg_distortion * report.avg_distortion;
      report.std_distortion = std::sqrt(std::max(var, 0.0));
      report.final_distance_loss = mse / finite;
    }
  }

  if (model.has_time_codes() && !g.edges().empty()) {
    Var codes = *build_time_codes(model, tape, xhat);
    // Copy: later loss nodes may reallocate the tape storage.
    Mat code_values = tape.value(codes);
    report.directionality = total_correct_from_codes(code_values, g);
    if (!cfg.global_distance) {
      CausalityTerm term = cfg.causality == CausalityMode::kLocal
                               ? local_causality(tape, codes, g)
                               : global_causality(tape, codes, g, cfg.epsilon, cfg.smooth_global);
      report.final_causality_loss = tape.value(term.loss)(0, 0);
    }
    // Remark-style consistency: once every edge is ordered, transitivity of
    // the product order must order the whole reachability closure.
    if (report.directionality == 1.0 && graph::is_dag(g)) {
      graph::Poset closure = graph::dag_to_poset(g);
      long total = 0, good = 0;
      for (int u = 0; u < g.node_count(); ++u)
        for (int v = 0; v < g.node_count(); ++v) {
          if (u == v || !closure.leq(u, v)) continue;
          ++total;
          bool ok = true;
          for (int t = 0; t < code_values.cols(); ++t)
            if (code_values(u, t) > code_values(v, t)) {
              ok = false;
              break;
            }
          if (ok) ++good;
        }
      report.closure_directionality =
          total ? static_cast<double>(good) / static_cast<double>(total) : 1.0;
    }
  }
  return report;
}

EmbeddingReport evaluate(Model& model, const WeightedDigraph& g, const TrainConfig& cfg) {
  PairSet pairs = build_pair_set(g, cfg);
  return evaluate(model, g, pairs, cfg);
}

TrainResult train(const WeightedDigraph& g, const TrainConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();

  Model model = make_model(g, cfg);
  PairSet pairs = build_pair_set(g, cfg);
  std::vector<Param*> params = model.trainable();
  AdamW optimizer;
  std::vector<CurvePoint> curve;
  curve.reserve(static_cast<std::size_t>(cfg.epochs));
  Rng batch_rng(cfg.seed ^ 0x5eedULL);

  const bool batched = cfg.pair_batch > 0 && pairs.size() > static_cast<std::size_t>(cfg.pair_batch);
  std::vector<std::size_t> perm(pairs.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  Tape tape;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (!batched) {
      tape.clear();
      ad::zero_grads(params);
      LossPieces loss = build_loss(model, tape, g, pairs, cfg);
      curve.push_back({epoch, loss.distance_value, loss.causality_value, loss.total_correct});
      tape.backward(loss.total);
      optimizer.step(params, cfg.lr, cfg.clip_norm);
    } else {
      // Fisher-Yates reshuffle per epoch, then one step per chunk.
      for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[batch_rng.below(i)]);
      CurvePoint point{epoch, 0.0, 0.0, -1.0};
      int chunks = 0;
      for (std::size_t start = 0; start < perm.size(); start += cfg.pair_batch) {
        PairSet chunk;
        for (std::size_t i = start; i < std::min(perm.size(), start + cfg.pair_batch); ++i) {
          chunk.u.push_back(pairs.u[perm[i]]);
          chunk.v.push_back(pairs.v[perm[i]]);
          chunk.target.push_back(pairs.target[perm[i]]);
        }
        tape.clear();
        ad::zero_grads(params);
        LossPieces loss = build_loss(model, tape, g, chunk, cfg);
        point.distance_loss += loss.distance_value;
        point.causality_loss += loss.causality_value;
        point.total_correct = loss.total_correct;
        ++chunks;
        tape.backward(loss.total);
        optimizer.step(params, cfg.lr, cfg.clip_norm);
      }
      point.distance_loss /= std::max(chunks, 1);
      point.causality_loss /= std::max(chunks, 1);
      curve.push_back(point);
    }
  }

  EmbeddingReport report = evaluate(model, g, pairs, cfg);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report), std::move(curve)};
}

}  // namespace nst::train
