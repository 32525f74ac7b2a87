#pragma once

#include <string>
#include <vector>

#include "nst/tape.hpp"
#include "nst/types.hpp"

namespace nst::baselines {

enum class GeometryKind { kNst, kEuclidean, kMinkowski, kDesitter, kSnowflakeV1 };

GeometryKind parse_geometry(const std::string& name);  // throws UnknownMetric
std::string geometry_name(GeometryKind kind);

double euclidean_distance(const Vec& xhat_u, const Vec& xhat_v);

// Coordinate 0 is time. distance = sqrt(max(dt^2 - |dx|^2, 0)),
// causal = timelike-or-lightlike separation with strictly increasing time.
struct MinkowskiInterval {
  double distance = 0.0;
  bool causal = false;
};
MinkowskiInterval minkowski_interval(const Vec& xhat_u, const Vec& xhat_v);

// Geodesic distance on the radius-R De Sitter hyperboloid <x,x>_M = R^2 with
// <a,b>_M = -a0 b0 + sum_i ai bi. Raw points are projected radially; a point
// with <z,z>_M <= 0 cannot be projected (OffManifold). The distance itself is
// undefined when the arccos argument leaves [-1,1] (timelike separation);
// such pairs are flagged rather than clamped.
struct DeSitterResult {
  double distance = 0.0;
  bool defined = false;
};
DeSitterResult desitter_distance(const Vec& xhat_u, const Vec& xhat_v, double radius = 1.0);

// Legacy snowflake (v1): u_j = B_j psi_{a_j,b_j}(A_j u_{j-1}) C_j with
// psi rows (1 - e^{-|u|}, |u|^a, log(1+|u|)^b), output u_J^{1+|p|}.
struct SnowflakeV1Layer {
  Mat a;               // d~_j x d_{j-1}, non-negative
  Mat b;               // d_j x d~_j, non-negative
  Eigen::Vector3d c;   // non-negative
  double alpha = 1.0;  // in (0, 1]
  double beta = 1.0;   // in [0, 1]
};
struct SnowflakeV1 {
  std::vector<SnowflakeV1Layer> layers;
  double p = 0.0;
};
// Evaluates the closed form on a scalar input r >= 0 (the Euclidean distance
// of an encoded pair). Throws NegativeInput.
double snowflake_v1(const SnowflakeV1& sf, double r);

// Trainable snowflake head: raw matrices are stored unconstrained and used
// through an entrywise absolute value, the activation exponents are fixed at
// a = b = 1 (the stable v1 configuration), p is trained freely.
class SnowflakeModel {
 public:
  SnowflakeModel(int depth, int hidden);

  void init_weights(std::uint64_t seed);
  std::vector<ad::Param*> params();

  // r is a P x 1 column of pairwise Euclidean distances on the tape.
  ad::Var distance_batch(ad::Tape& tape, ad::Var r);

  // Snapshot of the effective (non-negative) closed-form parameters.
  SnowflakeV1 effective() const;

  struct Layer {
    ad::Param a_raw;
    ad::Param b_raw;
    ad::Param c_raw;  // 1 x 3
  };
  std::vector<Layer> layers;
  ad::Param p;
};

}  // namespace nst::baselines
