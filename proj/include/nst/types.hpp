#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nst {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using IntMat = Eigen::MatrixXi;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input-shape / malformed-data family (CLI exit code 3).
struct MalformedInput : Error { using Error::Error; };
struct CyclicInput : MalformedInput { using MalformedInput::MalformedInput; };
struct NegativeWeight : MalformedInput { using MalformedInput::MalformedInput; };
struct TooLarge : MalformedInput { using MalformedInput::MalformedInput; };
struct UnknownMetric : MalformedInput { using MalformedInput::MalformedInput; };
struct ShapeMismatch : MalformedInput { using MalformedInput::MalformedInput; };
struct LengthMismatch : MalformedInput { using MalformedInput::MalformedInput; };
struct EmptyEdgeSet : MalformedInput { using MalformedInput::MalformedInput; };
struct NegativeInput : MalformedInput { using MalformedInput::MalformedInput; };
struct IoError : MalformedInput { using MalformedInput::MalformedInput; };

// Constraint family (CLI exit code 2).
struct ConstraintViolation : Error { using Error::Error; };
struct NonPositiveLambda : ConstraintViolation { using ConstraintViolation::ConstraintViolation; };
struct NonScalarLoss : ConstraintViolation { using ConstraintViolation::ConstraintViolation; };
struct DoubleBackward : ConstraintViolation { using ConstraintViolation::ConstraintViolation; };
struct TooFewTimeDims : ConstraintViolation { using ConstraintViolation::ConstraintViolation; };
struct OffManifold : ConstraintViolation { using ConstraintViolation::ConstraintViolation; };

// Deterministic RNG. std::uniform_real_distribution is implementation
// defined, so draws are produced directly from the engine bits to keep
// outputs identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  // xorshift* core; enough for initialization and layout jitter.
  std::uint64_t next_u64() {
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  // Box-Muller; two engine draws per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace nst
