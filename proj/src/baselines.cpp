#include "nst/baselines.hpp"

#include <cmath>

namespace nst::baselines {

using ad::Param;
using ad::Tape;
using ad::Var;

GeometryKind parse_geometry(const std::string& name) {
  if (name == "nst") return GeometryKind::kNst;
  if (name == "euclidean") return GeometryKind::kEuclidean;
  if (name == "minkowski") return GeometryKind::kMinkowski;
  if (name == "desitter") return GeometryKind::kDesitter;
  if (name == "snowflake-v1") return GeometryKind::kSnowflakeV1;
  throw UnknownMetric("unknown geometry: " + name);
}

std::string geometry_name(GeometryKind kind) {
  switch (kind) {
    case GeometryKind::kNst: return "nst";
    case GeometryKind::kEuclidean: return "euclidean";
    case GeometryKind::kMinkowski: return "minkowski";
    case GeometryKind::kDesitter: return "desitter";
    case GeometryKind::kSnowflakeV1: return "snowflake-v1";
  }
  return "?";
}

double euclidean_distance(const Vec& xhat_u, const Vec& xhat_v) {
  if (xhat_u.size() != xhat_v.size()) throw LengthMismatch("embedding sizes differ");
  return (xhat_u - xhat_v).norm();
}

MinkowskiInterval minkowski_interval(const Vec& xhat_u, const Vec& xhat_v) {
  if (xhat_u.size() != xhat_v.size()) throw LengthMismatch("embedding sizes differ");
  if (xhat_u.size() < 2) throw ShapeMismatch("need one time and at least one space coordinate");
  double dt = xhat_v(0) - xhat_u(0);
  double dx2 = (xhat_v.tail(xhat_v.size() - 1) - xhat_u.tail(xhat_u.size() - 1)).squaredNorm();
  double s2 = dt * dt - dx2;
  MinkowskiInterval out;
  out.distance = std::sqrt(std::max(s2, 0.0));
  out.causal = s2 >= 0.0 && dt > 0.0;
  return out;
}

namespace {

double minkowski_inner(const Vec& a, const Vec& b) {
  return -a(0) * b(0) + a.tail(a.size() - 1).dot(b.tail(b.size() - 1));
}

Vec project_to_hyperboloid(const Vec& z, double radius) {
  double q = minkowski_inner(z, z);
  if (!(q > 0.0)) throw OffManifold("point has no radial projection onto the hyperboloid");
  return z * (radius / std::sqrt(q));
}

}  // namespace

DeSitterResult desitter_distance(const Vec& xhat_u, const Vec& xhat_v, double radius) {
  if (xhat_u.size() != xhat_v.size()) throw LengthMismatch("embedding sizes differ");
  if (xhat_u.size() < 2) throw ShapeMismatch("need one time and at least one space coordinate");
  if (!(radius > 0.0)) throw ConstraintViolation("curvature radius must be positive");
  Vec pu = project_to_hyperboloid(xhat_u, radius);
  Vec pv = project_to_hyperboloid(xhat_v, radius);
  double arg = minkowski_inner(pu, pv) / (radius * radius);
  DeSitterResult out;
  if (arg < -1.0 || arg > 1.0) return out;  // undefined, mirrors the inf rows
  out.defined = true;
  out.distance = radius * std::acos(arg);
  return out;
}

double snowflake_v1(const SnowflakeV1& sf, double r) {
  if (r < 0.0) throw NegativeInput("snowflake input must be non-negative");
  Vec u = Vec::Constant(1, r);
  for (const SnowflakeV1Layer& layer : sf.layers) {
    if (layer.a.cols() != u.size()) throw ShapeMismatch("snowflake layer shape mismatch");
    Vec projected = layer.a * u;
    Mat psi(projected.size(), 3);
    for (int i = 0; i < projected.size(); ++i) {
      double av = std::abs(projected(i));
      psi(i, 0) = 1.0 - std::exp(-av);
      psi(i, 1) = std::pow(av, layer.alpha);
      psi(i, 2) = std::pow(std::log1p(av), layer.beta);
    }
    u = layer.b * (psi * layer.c);
  }
  if (u.size() != 1) throw ShapeMismatch("snowflake must end in a scalar");
  return std::pow(u(0), 1.0 + std::abs(sf.p));
}

SnowflakeModel::SnowflakeModel(int depth, int hidden) {
  if (depth < 1 || hidden < 1) throw ShapeMismatch("snowflake depth and width must be positive");
  int prev = 1;
  for (int j = 1; j <= depth; ++j) {
    int dj = j == depth ? 1 : hidden;
    std::string tag = "snowflake." + std::to_string(j);
    layers.push_back({Param(Mat::Zero(hidden, prev), -INFINITY, tag + ".a"),
                      Param(Mat::Zero(dj, hidden), -INFINITY, tag + ".b"),
                      Param(Mat::Zero(1, 3), -INFINITY, tag + ".c")});
    prev = dj;
  }
  p = Param(Mat::Zero(1, 1), -INFINITY, "snowflake.p");
}

void SnowflakeModel::init_weights(std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&](Mat& m) {
    double hi = 1.0 / static_cast<double>(m.size());
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(0.0, hi);
  };
  for (Layer& layer : layers) {
    fill(layer.a_raw.value);
    fill(layer.b_raw.value);
    fill(layer.c_raw.value);
  }
  p.value.setZero();
}

std::vector<Param*> SnowflakeModel::params() {
  std::vector<Param*> out;
  for (Layer& layer : layers) {
    out.push_back(&layer.a_raw);
    out.push_back(&layer.b_raw);
    out.push_back(&layer.c_raw);
  }
  out.push_back(&p);
  return out;
}

Var SnowflakeModel::distance_batch(Tape& tape, Var r) {
  Var u = r;  // P x 1, non-negative
  for (Layer& layer : layers) {
    Var a = tape.abs(tape.leaf(layer.a_raw));
    Var b = tape.abs(tape.leaf(layer.b_raw));
    Var c = tape.abs(tape.leaf(layer.c_raw));
    Var z = tape.matmul(u, tape.transpose(a));  // P x d~
    // psi * C collapses to a weighted sum of the three activation branches.
    Var mixed = tape.add(
        tape.add(tape.mul(tape.slice_cols(c, 0, 1), tape.one_minus_exp_neg_abs(z)),
                 tape.mul(tape.slice_cols(c, 1, 1), tape.abs(z))),
        tape.mul(tape.slice_cols(c, 2, 1), tape.log1p_abs(z)));
    u = tape.matmul(mixed, tape.transpose(b));  // P x d_j
  }
  Var exponent = tape.add(tape.scalar(1.0), tape.abs(tape.leaf(p)));
  return tape.sign_pow(u, exponent);
}

SnowflakeV1 SnowflakeModel::effective() const {
  SnowflakeV1 sf;
  for (const Layer& layer : layers) {
    SnowflakeV1Layer out;
    out.a = layer.a_raw.value.cwiseAbs();
    out.b = layer.b_raw.value.cwiseAbs();
    out.c = layer.c_raw.value.cwiseAbs().row(0).transpose();
    sf.layers.push_back(std::move(out));
  }
  sf.p = p.value(0, 0);
  return sf;
}

}  // namespace nst::baselines
