#pragma once

// Shared model fixtures for the unit and acceptance suites.

#include "nst/spacetime.hpp"
#include "nst/types.hpp"

namespace model_helpers {

// Closed-form configuration from the implementation lemma: with J = 2,
// s0 = l0 = 1, s1 = l1 = p, W1 = I, W2 = all-ones row and final exponent
// alpha/p, the quasi-metric equals |x - y|_p^alpha on the spatial slice.
inline void configure_lp_snowflake(nst::spacetime::NeuralSpacetime& model, double p,
                                   double alpha) {
  if (model.dims().metric_depth != 2)
    throw nst::ShapeMismatch("lp configuration needs metric depth 2");
  model.metric_s0.value.setConstant(1.0);
  model.metric_l0.value.setConstant(1.0);
  auto& mid = model.metric_mid.at(0);
  mid.w_tilde.value.setZero();
  mid.lambda.value.setConstant(1.0);  // W1 = I
  mid.s.value.setConstant(p);
  mid.l.value.setConstant(p);
  model.metric_out.w_tilde.value.setZero();
  model.metric_out.lambda.value.setConstant(1.0);  // all-ones row
  model.metric_out.s.value.setConstant(alpha / p);
  model.metric_out.l.value.setConstant(alpha / p);
}

// Random quasi-metric head (encoder untouched) in the trained regime:
// exponents >= 1, uniform positive raw matrices, lambda in [0.1, 1].
inline nst::spacetime::NeuralSpacetime random_metric_model(nst::Rng& rng, int space_dim,
                                                           int depth) {
  nst::spacetime::Dims dims;
  dims.n_features = space_dim;
  dims.space = space_dim;
  dims.time = 0;
  dims.encoder_hidden_layers = 0;
  dims.encoder_width = 1;
  dims.metric_depth = depth;
  dims.order_depth = 1;
  nst::spacetime::NeuralSpacetime model(dims);
  auto fill = [&](nst::Mat& m, double lo, double hi) {
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(lo, hi);
  };
  model.metric_s0.value.setConstant(rng.uniform(1.0, 2.2));
  model.metric_l0.value.setConstant(rng.uniform(1.0, 2.2));
  for (auto& layer : model.metric_mid) {
    fill(layer.w_tilde.value, 0.0, 1.0);
    layer.lambda.value.setConstant(rng.uniform(0.1, 1.0));
    layer.s.value.setConstant(rng.uniform(1.0, 2.2));
    layer.l.value.setConstant(rng.uniform(1.0, 2.2));
  }
  fill(model.metric_out.w_tilde.value, 0.0, 1.0);
  model.metric_out.lambda.value.setConstant(rng.uniform(0.1, 1.0));
  model.metric_out.s.value.setConstant(rng.uniform(1.0, 2.2));
  model.metric_out.l.value.setConstant(rng.uniform(1.0, 2.2));
  return model;
}

// Random order head on T time dimensions (encoder untouched).
inline nst::spacetime::NeuralSpacetime random_order_model(nst::Rng& rng, int time_dim,
                                                          int depth) {
  nst::spacetime::Dims dims;
  dims.n_features = time_dim;
  dims.space = 1;
  dims.time = time_dim;
  dims.encoder_hidden_layers = 0;
  dims.encoder_width = 1;
  dims.metric_depth = 1;
  dims.order_depth = depth;
  nst::spacetime::NeuralSpacetime model(dims);
  auto fill = [&](nst::Mat& m, double lo, double hi) {
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(lo, hi);
  };
  for (auto& layer : model.order) {
    fill(layer.v_tilde.value, 0.0, 1.0);
    layer.lambda.value.setConstant(rng.uniform(0.1, 1.0));
    fill(layer.bias.value, -1.0, 1.0);
    layer.s.value.setConstant(rng.uniform(1.0, 2.2));
  }
  return model;
}

inline nst::Vec random_point(nst::Rng& rng, int dim, double scale = 3.0) {
  nst::Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.uniform(-scale, scale);
  return v;
}

}  // namespace model_helpers
