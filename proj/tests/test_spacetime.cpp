#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/LU>
#include <cmath>

#include "model_helpers.hpp"
#include "nst/spacetime.hpp"

using namespace nst;
using namespace nst::spacetime;

TEST_CASE("metric activation") {
  CHECK(metric_activation(0.5, 2.0, 3.0) == 0.25);
  CHECK(metric_activation(-2.0, 2.0, 3.0) == -8.0);
  for (double x : {-3.0, -1.0, -0.2, 0.0, 0.7, 1.0, 42.0})
    CHECK(metric_activation(x, 1.0, 1.0) == doctest::Approx(x).epsilon(1e-15));
}

TEST_CASE("metric activation is odd and monotone") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    double s = rng.uniform(1.0, 3.0);
    double l = rng.uniform(1.0, 3.0);
    double x = rng.uniform(-4.0, 4.0);
    double y = rng.uniform(-4.0, 4.0);
    CHECK(metric_activation(-x, s, l) == -metric_activation(x, s, l));
    if (x < y) CHECK(metric_activation(x, s, l) < metric_activation(y, s, l));
  }
}

TEST_CASE("positive_invertible") {
  CHECK(positive_invertible(1.0, Mat::Zero(3, 3)) == Mat::Identity(3, 3));

  Mat w(2, 2);
  w << -1, 2, 0, -3;
  Mat expected(2, 2);
  expected << 1.5, 2, 0, 3.5;
  CHECK(positive_invertible(0.5, w) == expected);

  CHECK_THROWS_AS(positive_invertible(0.0, Mat::Zero(2, 2)), NonPositiveLambda);
  CHECK_THROWS_AS(positive_invertible(-1.0, Mat::Zero(2, 2)), NonPositiveLambda);

  // Random instances stay invertible (LU determinant oracle).
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Mat raw(5, 5);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) raw(r, c) = rng.uniform(-2.0, 2.0);
    Mat m = positive_invertible(rng.uniform(1e-3, 2.0), raw);
    CHECK(Eigen::FullPivLU<Mat>(m).determinant() != 0.0);
    CHECK((m.array() >= 0.0).all());
  }
}

TEST_CASE("precedes is the product order") {
  Vec t(3);
  t << 1, 2, 3;
  CHECK(precedes(t, t));  // reflexive

  Vec a(2), b(2);
  a << 0, 1;
  b << 1, 0;
  CHECK_FALSE(precedes(a, b));
  CHECK_FALSE(precedes(b, a));  // antichain

  Vec c(3), d(3);
  c << 1, 2, 3;
  d << 1, 2, 4;
  CHECK(precedes(c, d));
  CHECK_FALSE(precedes(d, c));

  Vec shorter(2);
  CHECK_THROWS_AS(precedes(t, shorter), LengthMismatch);
}

TEST_CASE("encoder forward") {
  Dims dims;
  dims.n_features = 3;
  dims.space = 2;
  dims.time = 1;
  dims.encoder_hidden_layers = 2;
  dims.encoder_width = 4;
  NeuralSpacetime model(dims);

  // All-zero weights and biases give the zero vector.
  Vec x(3);
  x << 1.0, -2.0, 0.5;
  CHECK(model.encoder_forward(x) == Vec::Zero(3));

  // Identity-configured single projection layer is a passthrough.
  Dims id_dims;
  id_dims.n_features = 3;
  id_dims.space = 2;
  id_dims.time = 1;
  id_dims.encoder_hidden_layers = 0;
  NeuralSpacetime id_model(id_dims);
  id_model.encoder[0].weight.value = Mat::Identity(3, 3);
  id_model.encoder[0].bias.value.setZero();
  CHECK(id_model.encoder_forward(x) == x);
}

TEST_CASE("quasi-metric basics") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    int d = 1 + static_cast<int>(rng.below(6));
    int depth = 1 + static_cast<int>(rng.below(4));
    NeuralSpacetime model = model_helpers::random_metric_model(rng, d, depth);
    Vec x = model_helpers::random_point(rng, d);
    Vec y = model_helpers::random_point(rng, d);
    CHECK(model.quasi_metric(x, x) == 0.0);
    CHECK(model.quasi_metric(x, y) == model.quasi_metric(y, x));
    CHECK(model.quasi_metric(x, y) >= 0.0);
    if (x != y) CHECK(model.quasi_metric(x, y) > 0.0);
  }
}

TEST_CASE("quasi-metric ignores time coordinates") {
  // Vectors differing only in time have distance exactly zero.
  Rng rng(5);
  Dims dims;
  dims.n_features = 5;
  dims.space = 3;
  dims.time = 2;
  dims.encoder_hidden_layers = 0;
  dims.metric_depth = 3;
  NeuralSpacetime model(dims);
  model.init_weights(9);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x = model_helpers::random_point(rng, 5);
    Vec y = x;
    y(3) = rng.uniform(-5.0, 5.0);
    y(4) = rng.uniform(-5.0, 5.0);
    CHECK(model.quasi_metric(x, y) == 0.0);
  }
}

TEST_CASE("lp snowflake configuration") {
  Rng rng(33);
  for (double p : {1.0, 2.0}) {
    for (double alpha : {0.5, 1.0}) {
      Dims dims;
      dims.n_features = 4;
      dims.space = 4;
      dims.time = 0;
      dims.encoder_hidden_layers = 0;
      dims.metric_depth = 2;
      NeuralSpacetime model(dims);
      model_helpers::configure_lp_snowflake(model, p, alpha);
      for (int trial = 0; trial < 100; ++trial) {
        Vec x = model_helpers::random_point(rng, 4);
        Vec y = model_helpers::random_point(rng, 4);
        double want = p == 2.0 ? std::pow((x - y).norm(), alpha)
                               : std::pow((x - y).lpNorm<1>(), alpha);
        CHECK(model.quasi_metric(x, y) == doctest::Approx(want).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("relaxed triangle inequality with the model constant") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    int d = 2 + static_cast<int>(rng.below(5));
    int depth = 1 + static_cast<int>(rng.below(4));
    NeuralSpacetime model = model_helpers::random_metric_model(rng, d, depth);
    double c = model.relaxed_triangle_constant();
    Vec x = model_helpers::random_point(rng, d);
    Vec y = model_helpers::random_point(rng, d);
    Vec z = model_helpers::random_point(rng, d);
    double dxy = model.quasi_metric(x, y);
    double bound = c * (model.quasi_metric(x, z) + model.quasi_metric(z, y));
    CHECK(dxy <= bound);
  }
}

TEST_CASE("partial order network") {
  // V = I, b = 0, s = 1: passthrough on the positive orthant.
  Dims dims;
  dims.n_features = 5;
  dims.space = 2;
  dims.time = 3;
  dims.encoder_hidden_layers = 0;
  dims.order_depth = 2;
  NeuralSpacetime model(dims);
  for (auto& layer : model.order) {
    layer.v_tilde.value.setZero();
    layer.lambda.value.setConstant(1.0);
    layer.bias.value.setZero();
    layer.s.value.setConstant(1.0);
  }
  Vec xhat(5);
  xhat << -1.0, 2.0, 0.5, 1.5, 3.0;
  Vec t = model.partial_order_forward(xhat);
  CHECK(t == Vec(xhat.tail(3)));

  // Strictly increasing in each time coordinate.
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    NeuralSpacetime m = model_helpers::random_order_model(rng, 3, 3);
    Vec a = model_helpers::random_point(rng, 4);
    Vec b = a;
    for (int i = 1; i < 4; ++i) b(i) += rng.uniform(0.0, 2.0);
    Vec ta = m.partial_order_forward(a);
    Vec tb = m.partial_order_forward(b);
    CHECK(precedes(ta, tb));
  }
}

TEST_CASE("partial order antisymmetry via injectivity") {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    int t = 1 + static_cast<int>(rng.below(4));
    NeuralSpacetime m =
        model_helpers::random_order_model(rng, t, 1 + static_cast<int>(rng.below(3)));
    Vec a = model_helpers::random_point(rng, 1 + t);
    Vec b = model_helpers::random_point(rng, 1 + t);
    if (a.tail(t) == b.tail(t)) continue;
    Vec ta = m.partial_order_forward(a);
    Vec tb = m.partial_order_forward(b);
    // Distinct time inputs cannot precede each other both ways.
    bool both_ways = precedes(ta, tb) && precedes(tb, ta);
    CHECK_FALSE(both_ways);
  }
}

TEST_CASE("init_weights determinism and ranges") {
  Dims dims;
  dims.n_features = 2;
  dims.space = 4;
  dims.time = 4;
  dims.encoder_hidden_layers = 4;
  dims.encoder_width = 10;
  NeuralSpacetime a(dims), b(dims);
  a.init_weights(0);
  b.init_weights(0);
  auto pa = a.params();
  auto pb = b.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);

  // Effective metric matrix entries live in (0, 1] right after init.
  for (int j = 1; j < dims.metric_depth; ++j) {
    Mat m = a.metric_matrix(j);
    CHECK((m.array() >= 0.0).all());
    CHECK((m.array() <= 1.0).all());
    CHECK((m.diagonal().array() > 0.0).all());
  }
  CHECK((a.metric_out_row().array() > 0.0).all());
  CHECK((a.metric_out_row().array() <= 1.0).all());

  // Forward magnitudes stay sane for a depth-4, width-10 encoder.
  NeuralSpacetime c(dims);
  c.init_weights(1234);
  Vec unit = Vec::Ones(2);
  Vec xhat = c.encoder_forward(unit);
  double inf_norm = xhat.cwiseAbs().maxCoeff();
  CHECK(inf_norm >= 1e-6);
  CHECK(inf_norm <= 1e3);
  Vec other = -Vec::Ones(2);
  double dist = c.quasi_metric(xhat, c.encoder_forward(other));
  CHECK(dist >= 1e-6);
  CHECK(dist <= 1e3);
}

TEST_CASE("golden forward values for seed 0") {
  Dims dims;
  dims.n_features = 2;
  dims.space = 3;
  dims.time = 2;
  dims.encoder_hidden_layers = 2;
  dims.encoder_width = 5;
  dims.metric_depth = 2;
  dims.order_depth = 2;
  NeuralSpacetime model(dims);
  model.init_weights(0);
  Vec x(2);
  x << 0.25, -0.75;
  Vec xhat = model.encoder_forward(x);
  Vec codes = model.partial_order_forward(xhat);
  Vec y(2);
  y << -0.5, 1.0;
  double d = model.quasi_metric(xhat, model.encoder_forward(y));
  // Locked on the first run; guards drift of init or forward conventions.
  CHECK(xhat(0) == doctest::Approx(0.045868735075774159).epsilon(1e-12));
  CHECK(codes(0) == doctest::Approx(0.015328060749235211).epsilon(1e-12));
  CHECK(d == doctest::Approx(0.01916027517518783).epsilon(1e-12));
}
