#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nst/baselines.hpp"
#include "nst/graph.hpp"
#include "nst/spacetime.hpp"
#include "nst/tape.hpp"

namespace nst::train {

enum class CausalityMode { kLocal, kGlobal };

struct TrainConfig {
  int space = 10;                  // D
  int time = 10;                   // T
  int encoder_hidden_layers = 10;
  int encoder_width = 100;
  int metric_depth = 4;            // J
  int order_depth = 4;             // J~
  double lr = 1e-4;
  int epochs = 5000;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  int pair_batch = 0;              // 0 = full batch
  baselines::GeometryKind geometry = baselines::GeometryKind::kNst;
  CausalityMode causality = CausalityMode::kLocal;
  double epsilon = 0.1;            // margin of the global no-causality term
  bool smooth_global = false;      // steep sigmoid instead of relu in global mode
  double weight_distance = 1.0;
  double weight_causality = 1.0;
  // Train against all-pairs geodesics of the undirected view instead of the
  // one-hop mask (the tree-embedding protocol); disables the causality term.
  bool global_distance = false;
  bool deterministic = true;
  double desitter_radius = 1.0;

  void validate() const;
};

// Model bundle for a training run: the encoder always lives in `nst`; the
// metric/order heads are used only by the nst geometry, the snowflake head
// only by snowflake-v1.
struct Model {
  baselines::GeometryKind geometry = baselines::GeometryKind::kNst;
  spacetime::NeuralSpacetime nst;
  std::optional<baselines::SnowflakeModel> snowflake;
  double desitter_radius = 1.0;
  std::uint64_t seed = 0;

  Model(baselines::GeometryKind kind, spacetime::Dims dims, double desitter_r = 1.0);
  void init_weights(std::uint64_t seed_value);
  std::vector<ad::Param*> trainable();
  int embedding_dim() const { return nst.dims().space + nst.dims().time; }
  bool has_time_codes() const;
};

Model make_model(const graph::WeightedDigraph& g, const TrainConfig& cfg);

// The masked pair list the distance loss runs over.
struct PairSet {
  std::vector<int> u;
  std::vector<int> v;
  std::vector<double> target;
  std::size_t size() const { return u.size(); }
};
// One-hop A-masked pairs, or every reachable unordered pair at geodesic
// distance when cfg.global_distance is set.
PairSet build_pair_set(const graph::WeightedDigraph& g, const TrainConfig& cfg);

double steep_sigmoid(double x);

// Batched time codes for the active geometry (the raw first coordinate for
// the Lorentzian baselines); empty optional when the geometry has none.
std::optional<ad::Var> build_time_codes(Model& model, ad::Tape& tape, ad::Var xhat);

// Predicted distances for the pair set; `defined_mask`/`skipped` report pairs
// the De Sitter geometry cannot score (they are dropped from the loss).
struct DistancePrediction {
  ad::Var pred;                 // P x 1
  std::vector<bool> defined;
  int skipped = 0;
};
DistancePrediction build_distances(Model& model, ad::Tape& tape, ad::Var xhat,
                                   const PairSet& pairs);

// Value-level operations (fresh tape per call).
double distance_loss(Model& model, const graph::WeightedDigraph& g);
double total_correct(Model& model, const graph::WeightedDigraph& g);
double causality_loss(Model& model, const graph::WeightedDigraph& g);
double global_causality_loss(Model& model, const graph::WeightedDigraph& g, double epsilon,
                             bool smooth = false);

// Loss graph for one optimizer step over the given pairs.
struct LossPieces {
  ad::Var total;
  double distance_value = 0.0;
  double causality_value = 0.0;
  double total_correct = -1.0;  // -1 when the geometry has no time codes
  int skipped_pairs = 0;
};
LossPieces build_loss(Model& model, ad::Tape& tape, const graph::WeightedDigraph& g,
                      const PairSet& pairs, const TrainConfig& cfg);

// AdamW with decoupled weight decay, preceded by a global-norm clip and
// followed by the projection of constrained params onto their feasible set.
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
        double weight_decay = 0.01)
      : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  void step(std::vector<ad::Param*>& params, double lr, double clip_norm);

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

struct EmbeddingReport {
  std::vector<double> distortion;       // per masked pair, pred / true
  double avg_distortion = 0.0;
  double std_distortion = 0.0;
  double max_distortion = 0.0;
  int nonfinite_pairs = 0;              // flagged outliers (inf/nan predictions)
  int skipped_pairs = 0;                // undefined De Sitter pairs
  double directionality = -1.0;         // total_correct; -1 when not applicable
  double closure_directionality = -1.0; // checked when directionality hits 1
  double final_distance_loss = 0.0;
  double final_causality_loss = 0.0;
  double wall_seconds = 0.0;
};

struct CurvePoint {
  int epoch = 0;
  double distance_loss = 0.0;
  double causality_loss = 0.0;
  double total_correct = -1.0;
};

EmbeddingReport evaluate(Model& model, const graph::WeightedDigraph& g, const PairSet& pairs,
                         const TrainConfig& cfg);
EmbeddingReport evaluate(Model& model, const graph::WeightedDigraph& g, const TrainConfig& cfg);

struct TrainResult {
  Model model;
  EmbeddingReport report;
  std::vector<CurvePoint> curve;
};

TrainResult train(const graph::WeightedDigraph& g, const TrainConfig& cfg);

}  // namespace nst::train
