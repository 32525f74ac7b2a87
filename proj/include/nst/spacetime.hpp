#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nst/tape.hpp"
#include "nst/types.hpp"

namespace nst::spacetime {

// Eq.-style activation shared by the metric and order networks:
// sgn(x)|x|^s below the unit scale, sgn(x)|x|^l at or above it.
template <typename Scalar>
Scalar metric_activation(Scalar x, Scalar s, Scalar l) {
  Scalar ax = std::abs(x);
  Scalar sign = x > Scalar(0) ? Scalar(1) : (x < Scalar(0) ? Scalar(-1) : Scalar(0));
  return sign * std::pow(ax, ax < Scalar(1) ? s : l);
}

// lambda * I + |W~|; strictly diagonally dominant, hence invertible, with
// positive entries on the diagonal. Throws NonPositiveLambda.
Mat positive_invertible(double lambda, const Mat& w_tilde);

// Componentwise product order on the time codes.
bool precedes(const Vec& t_u, const Vec& t_v);

struct Dims {
  int n_features = 2;
  int space = 2;       // D
  int time = 2;        // T, 0 disables the order network
  int encoder_hidden_layers = 10;
  int encoder_width = 100;
  int metric_depth = 4;   // J: number of weight matrices, last is a row
  int order_depth = 4;    // J~
};

struct LinearLayer {
  ad::Param weight;  // out x in
  ad::Param bias;    // 1 x out
};

// One quasi-metric stage: the effective matrix is lambda*I + |w_tilde|
// (a plain positive row lambda + |w_tilde| for the final stage).
struct MetricLayer {
  ad::Param w_tilde;
  ad::Param lambda;
  ad::Param s;
  ad::Param l;
};

struct OrderLayer {
  ad::Param v_tilde;  // T x T
  ad::Param lambda;
  ad::Param bias;     // 1 x T
  ad::Param s;        // shared exponent (s = l)
};

// The trainable triplet: encoder MLP, neural quasi-metric on the first D
// coordinates, neural partial order on the last T.
class NeuralSpacetime {
 public:
  explicit NeuralSpacetime(Dims dims);

  const Dims& dims() const { return dims_; }

  // C.-style init: uniform(0, 1/(rows*cols)) for the metric/order raw
  // matrices, lambda = 0.1, exponents = 1, encoder uniform(+-1/sqrt(fan_in)).
  void init_weights(std::uint64_t seed);

  std::vector<ad::Param*> params();
  std::vector<const ad::Param*> params() const;

  // Batched tape builders; non-const because leaves bind this model's
  // gradient slots. X is k x N, Xhat is k x (D+T).
  ad::Var encode(ad::Tape& tape, ad::Var x);
  // Pairwise distances for (idx_u[i], idx_v[i]) rows of Xhat; returns P x 1.
  ad::Var quasi_metric_batch(ad::Tape& tape, ad::Var xhat, const std::vector<int>& idx_u,
                             const std::vector<int>& idx_v);
  // Time codes T(xhat) for every row; returns k x T.
  ad::Var time_codes(ad::Tape& tape, ad::Var xhat);

  // Single-input conveniences (fresh scratch tape per call).
  Vec encoder_forward(const Vec& x);
  double quasi_metric(const Vec& xhat_u, const Vec& xhat_v);
  Vec partial_order_forward(const Vec& xhat);

  // 2^{sum_j beta_j} * prod_j |W_j|_op with beta_j = max(max(s_j,l_j)-1, 0),
  // the relaxed-triangle-inequality constant from the quasi-metric proof.
  double relaxed_triangle_constant() const;

  // Effective (post-parameterization) matrices, for inspection and tests.
  Mat metric_matrix(int j) const;      // j in [1, metric_depth-1]
  RowVec metric_out_row() const;
  Mat order_matrix(int j) const;       // j in [1, order_depth]

  std::vector<LinearLayer> encoder;
  ad::Param metric_s0, metric_l0;
  std::vector<MetricLayer> metric_mid;  // j = 1 .. J-1
  MetricLayer metric_out;               // j = J (1 x D row)
  std::vector<OrderLayer> order;        // j = 1 .. J~

 private:
  Dims dims_;
};

}  // namespace nst::spacetime
