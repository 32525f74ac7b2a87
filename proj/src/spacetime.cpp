#include "nst/spacetime.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace nst::spacetime {

using ad::Param;
using ad::Tape;
using ad::Var;

Mat positive_invertible(double lambda, const Mat& w_tilde) {
  if (!(lambda > 0.0)) throw NonPositiveLambda("lambda must be strictly positive");
  if (w_tilde.rows() != w_tilde.cols()) throw ShapeMismatch("w_tilde must be square");
  return lambda * Mat::Identity(w_tilde.rows(), w_tilde.cols()) + w_tilde.cwiseAbs();
}

bool precedes(const Vec& t_u, const Vec& t_v) {
  if (t_u.size() != t_v.size()) throw LengthMismatch("time codes have different lengths");
  for (int i = 0; i < t_u.size(); ++i)
    if (!(t_u(i) <= t_v(i))) return false;
  return true;
}

NeuralSpacetime::NeuralSpacetime(Dims dims) : dims_(dims) {
  if (dims_.n_features <= 0 || dims_.space <= 0 || dims_.time < 0)
    throw ShapeMismatch("dimensions must be positive (time may be zero)");
  if (dims_.metric_depth < 1) throw ShapeMismatch("metric depth must be at least 1");
  if (dims_.time > 0 && dims_.order_depth < 1)
    throw ShapeMismatch("order depth must be at least 1");

  const int d = dims_.space;
  const int t = dims_.time;
  const int out = d + t;

  int in = dims_.n_features;
  for (int i = 0; i < dims_.encoder_hidden_layers; ++i) {
    encoder.push_back({Param(Mat::Zero(dims_.encoder_width, in), -INFINITY,
                             "encoder.w" + std::to_string(i)),
                       Param(Mat::Zero(1, dims_.encoder_width), -INFINITY,
                             "encoder.b" + std::to_string(i))});
    in = dims_.encoder_width;
  }
  encoder.push_back({Param(Mat::Zero(out, in), -INFINITY, "encoder.w_out"),
                     Param(Mat::Zero(1, out), -INFINITY, "encoder.b_out")});

  metric_s0 = Param(Mat::Constant(1, 1, 1.0), 1.0, "metric.s0");
  metric_l0 = Param(Mat::Constant(1, 1, 1.0), 1.0, "metric.l0");
  for (int j = 1; j < dims_.metric_depth; ++j) {
    std::string tag = "metric." + std::to_string(j);
    metric_mid.push_back({Param(Mat::Zero(d, d), -INFINITY, tag + ".w"),
                          Param(Mat::Constant(1, 1, 0.1), 1e-6, tag + ".lambda"),
                          Param(Mat::Constant(1, 1, 1.0), 1.0, tag + ".s"),
                          Param(Mat::Constant(1, 1, 1.0), 1.0, tag + ".l")});
  }
  metric_out = {Param(Mat::Zero(1, d), -INFINITY, "metric.out.w"),
                Param(Mat::Constant(1, 1, 0.1), 1e-6, "metric.out.lambda"),
                Param(Mat::Constant(1, 1, 1.0), 1.0, "metric.out.s"),
                Param(Mat::Constant(1, 1, 1.0), 1.0, "metric.out.l")};

  for (int j = 1; j <= (t > 0 ? dims_.order_depth : 0); ++j) {
    std::string tag = "order." + std::to_string(j);
    order.push_back({Param(Mat::Zero(t, t), -INFINITY, tag + ".v"),
                     Param(Mat::Constant(1, 1, 0.1), 1e-6, tag + ".lambda"),
                     Param(Mat::Zero(1, t), -INFINITY, tag + ".b"),
                     Param(Mat::Constant(1, 1, 1.0), 1.0, tag + ".s")});
  }
}

void NeuralSpacetime::init_weights(std::uint64_t seed) {
  Rng rng(seed);
  auto fill_uniform = [&](Mat& m, double lo, double hi) {
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(lo, hi);
  };
  for (LinearLayer& layer : encoder) {
    double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.value.cols()));
    fill_uniform(layer.weight.value, -bound, bound);
    fill_uniform(layer.bias.value, -bound, bound);
  }
  metric_s0.value.setConstant(1.0);
  metric_l0.value.setConstant(1.0);
  for (MetricLayer& layer : metric_mid) {
    fill_uniform(layer.w_tilde.value, 0.0, 1.0 / static_cast<double>(layer.w_tilde.value.size()));
    layer.lambda.value.setConstant(0.1);
    layer.s.value.setConstant(1.0);
    layer.l.value.setConstant(1.0);
  }
  fill_uniform(metric_out.w_tilde.value, 0.0,
               1.0 / static_cast<double>(metric_out.w_tilde.value.size()));
  metric_out.lambda.value.setConstant(0.1);
  metric_out.s.value.setConstant(1.0);
  metric_out.l.value.setConstant(1.0);
  for (OrderLayer& layer : order) {
    fill_uniform(layer.v_tilde.value, 0.0, 1.0 / static_cast<double>(layer.v_tilde.value.size()));
    layer.lambda.value.setConstant(0.1);
    layer.bias.value.setZero();
    layer.s.value.setConstant(1.0);
  }
}

std::vector<Param*> NeuralSpacetime::params() {
  std::vector<Param*> out;
  for (LinearLayer& layer : encoder) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&metric_s0);
  out.push_back(&metric_l0);
  for (MetricLayer& layer : metric_mid) {
    out.push_back(&layer.w_tilde);
    out.push_back(&layer.lambda);
    out.push_back(&layer.s);
    out.push_back(&layer.l);
  }
  out.push_back(&metric_out.w_tilde);
  out.push_back(&metric_out.lambda);
  out.push_back(&metric_out.s);
  out.push_back(&metric_out.l);
  for (OrderLayer& layer : order) {
    out.push_back(&layer.v_tilde);
    out.push_back(&layer.lambda);
    out.push_back(&layer.bias);
    out.push_back(&layer.s);
  }
  return out;
}

std::vector<const Param*> NeuralSpacetime::params() const {
  auto mutable_params = const_cast<NeuralSpacetime*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

Var NeuralSpacetime::encode(Tape& tape, Var x) {
  if (tape.value(x).cols() != dims_.n_features)
    throw ShapeMismatch("encoder input width does not match n_features");
  Var h = x;
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    LinearLayer& layer = encoder[i];
    h = tape.add_rowvec(tape.matmul(h, tape.transpose(tape.leaf(layer.weight))),
                        tape.leaf(layer.bias));
    if (i + 1 < encoder.size()) h = tape.leaky_relu(h, 0.01);
  }
  return h;
}

Var NeuralSpacetime::quasi_metric_batch(Tape& tape, Var xhat, const std::vector<int>& idx_u,
                                        const std::vector<int>& idx_v) {
  if (idx_u.size() != idx_v.size()) throw LengthMismatch("pair index lists differ in length");
  if (tape.value(xhat).cols() != dims_.space + dims_.time)
    throw ShapeMismatch("embedding width does not match D+T");

  Var s0 = tape.leaf(metric_s0);
  Var l0 = tape.leaf(metric_l0);
  Var xu = tape.slice_cols(tape.gather_rows(xhat, idx_u), 0, dims_.space);
  Var xv = tape.slice_cols(tape.gather_rows(xhat, idx_v), 0, dims_.space);
  Var u = tape.abs(tape.sub(tape.piecewise_pow(xu, s0, l0), tape.piecewise_pow(xv, s0, l0)));

  for (MetricLayer& layer : metric_mid) {
    Var w = tape.add(tape.diag_scale(tape.leaf(layer.lambda), dims_.space),
                     tape.abs(tape.leaf(layer.w_tilde)));
    u = tape.matmul(tape.piecewise_pow(u, tape.leaf(layer.s), tape.leaf(layer.l)),
                    tape.transpose(w));
  }
  // Final row stage applies the activation after the projection so that the
  // closed-form l^p configurations are realizable exactly.
  Var w_out = tape.add(tape.abs(tape.leaf(metric_out.w_tilde)), tape.leaf(metric_out.lambda));
  Var projected = tape.matmul(u, tape.transpose(w_out));
  return tape.piecewise_pow(projected, tape.leaf(metric_out.s), tape.leaf(metric_out.l));
}

Var NeuralSpacetime::time_codes(Tape& tape, Var xhat) {
  if (dims_.time == 0) throw ShapeMismatch("model has no time dimensions");
  Var z = tape.slice_cols(xhat, dims_.space, dims_.time);
  for (OrderLayer& layer : order) {
    Var v = tape.add(tape.diag_scale(tape.leaf(layer.lambda), dims_.time),
                     tape.abs(tape.leaf(layer.v_tilde)));
    Var activated = tape.sign_pow(tape.leaky_relu(z, 0.01), tape.leaf(layer.s));
    z = tape.add_rowvec(tape.matmul(activated, tape.transpose(v)), tape.leaf(layer.bias));
  }
  return z;
}

Vec NeuralSpacetime::encoder_forward(const Vec& x) {
  Tape tape;
  Var out = encode(tape, tape.constant(x.transpose()));
  return tape.value(out).row(0).transpose();
}

double NeuralSpacetime::quasi_metric(const Vec& xhat_u, const Vec& xhat_v) {
  if (xhat_u.size() != xhat_v.size()) throw LengthMismatch("embedding sizes differ");
  Tape tape;
  Mat stacked(2, xhat_u.size());
  stacked.row(0) = xhat_u.transpose();
  stacked.row(1) = xhat_v.transpose();
  Var d = quasi_metric_batch(tape, tape.constant(stacked), {0}, {1});
  return tape.value(d)(0, 0);
}

Vec NeuralSpacetime::partial_order_forward(const Vec& xhat) {
  Tape tape;
  Var t = time_codes(tape, tape.constant(xhat.transpose()));
  return tape.value(t).row(0).transpose();
}

Mat NeuralSpacetime::metric_matrix(int j) const {
  const MetricLayer& layer = metric_mid.at(static_cast<std::size_t>(j) - 1);
  return positive_invertible(layer.lambda.value(0, 0), layer.w_tilde.value);
}

RowVec NeuralSpacetime::metric_out_row() const {
  return (metric_out.w_tilde.value.cwiseAbs().array() + metric_out.lambda.value(0, 0))
      .matrix()
      .row(0);
}

Mat NeuralSpacetime::order_matrix(int j) const {
  const OrderLayer& layer = order.at(static_cast<std::size_t>(j) - 1);
  return positive_invertible(layer.lambda.value(0, 0), layer.v_tilde.value);
}

double NeuralSpacetime::relaxed_triangle_constant() const {
  auto beta = [](const ad::Param& s, const ad::Param& l) {
    return std::max(std::max(s.value(0, 0), l.value(0, 0)) - 1.0, 0.0);
  };
  double beta_sum = beta(metric_s0, metric_l0);
  double op_product = 1.0;
  for (std::size_t j = 0; j < metric_mid.size(); ++j) {
    beta_sum += beta(metric_mid[j].s, metric_mid[j].l);
    Mat w = metric_matrix(static_cast<int>(j) + 1);
    op_product *= Eigen::JacobiSVD<Mat>(w).singularValues()(0);
  }
  beta_sum += beta(metric_out.s, metric_out.l);
  op_product *= metric_out_row().norm();
  return std::pow(2.0, beta_sum) * op_product;
}

}  // namespace nst::spacetime
