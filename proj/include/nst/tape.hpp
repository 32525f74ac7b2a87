#pragma once

#include <limits>
#include <string>
#include <vector>

#include "nst/types.hpp"

namespace nst::ad {

// Trainable value with a gradient slot. `lower_bound` is the constraint tag:
// the optimizer projects back into [lower_bound, inf) after every step
// (exponents use 1, lambdas use 1e-6, unconstrained params use -inf).
struct Param {
  Mat value;
  Mat grad;
  double lower_bound = -std::numeric_limits<double>::infinity();
  std::string name;

  Param() = default;
  Param(Mat v, double lb, std::string n)
      : value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())),
        lower_bound(lb), name(std::move(n)) {}
  void zero_grad() { grad.setZero(); }
};

enum class Op : std::uint8_t {
  kConstant, kLeaf,
  kAdd, kSub, kMul, kDiv, kMatMul, kTranspose,
  kAbs, kSignPow, kPiecewisePow, kLeakyRelu, kRelu, kSteepSigmoid, kAcos,
  kOneMinusExpNegAbs, kLog1pAbs,
  kSum, kMean, kRowSum, kRowMin, kSquare,
  kGatherRows, kSliceCols, kAddRowVec, kDiagScale,
};

struct Node {
  Op op;
  int a = -1, b = -1, c = -1;  // parent indices
  Mat value;
  Mat grad;
  double aux = 0.0;            // slope for leaky relu / sigmoid
  int i0 = 0, i1 = 0;          // slice start / length, diag dimension
  std::vector<int> rows;       // gather indices
  Param* param = nullptr;      // leaf binding
};

class Tape;

// Lightweight handle into a tape.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;
  const Mat& value() const;
};

// Append-only reverse-mode tape over dense matrices. Forward values are
// computed eagerly when a node is recorded; parents always precede children.
class Tape {
 public:
  Var constant(Mat v);
  Var scalar(double v) { return constant(Mat::Constant(1, 1, v)); }
  Var leaf(Param& p);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var abs(Var a);
  // sgn(x)|x|^e with a trainable scalar exponent.
  Var sign_pow(Var x, Var e);
  // sgn(x)|x|^s where |x| < 1, sgn(x)|x|^l where |x| >= 1.
  Var piecewise_pow(Var x, Var s, Var l);
  Var leaky_relu(Var x, double slope = 0.01);
  Var relu(Var x);
  Var steep_sigmoid(Var x, double slope = 10.0);
  Var acos(Var x);
  Var one_minus_exp_neg_abs(Var x);  // 1 - e^{-|x|}
  Var log1p_abs(Var x);              // log(1 + |x|)
  Var sum(Var x);
  Var mean(Var x);
  Var row_sum(Var x);
  Var row_min(Var x);
  Var square(Var x);
  Var gather_rows(Var x, std::vector<int> rows);
  Var slice_cols(Var x, int start, int len);
  Var add_rowvec(Var x, Var row);
  Var diag_scale(Var lambda, int dim);

  // Reverse accumulation from a 1x1 loss node into every reachable Param's
  // grad slot. A tape can be walked backward once; build a fresh tape (or
  // clear()) for the next step.
  void backward(Var loss);

  void clear() {
    nodes_.clear();
    backward_done_ = false;
  }
  std::size_t size() const { return nodes_.size(); }
  const Mat& value(Var v) const { return nodes_[v.idx].value; }

  // Smallest distance of any nonsmooth-op input to its kink locus
  // (0 for abs/relu/sign_pow, {0, |x|=1} for piecewise_pow, |x|=1 for acos,
  // row ties for row_min). Used to reject non-smooth evaluation points in
  // gradient checks.
  double kink_margin() const;

 private:
  Var push(Node n);
  void check_same_shape_or_scalar(const Var& a, const Var& b) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Mat& Var::value() const { return tape->value(*this); }

// Exact direction-preserving clip: g * min(1, max_norm/|g|_2) over the
// concatenation of all grads; a zero gradient is left untouched.
void clip_global_norm(std::vector<Param*>& params, double max_norm);

double global_grad_norm(const std::vector<Param*>& params);

void zero_grads(std::vector<Param*>& params);

// Max relative error between analytic gradients and central finite
// differences of `loss_fn` (a deterministic closure rebuilding the loss from
// scratch) over every element of every param. `step` is the half-width h.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
  bool passed = false;
};

template <class LossFn>
GradCheckReport gradient_check(LossFn&& loss_fn, std::vector<Param*> params, double step,
                               double tolerance) {
  GradCheckReport report;
  zero_grads(params);
  {
    Tape tape;
    Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param* p = params[pi];
    for (int i = 0; i < p->value.size(); ++i) {
      double saved = p->value.data()[i];
      p->value.data()[i] = saved + step;
      Tape tp;
      double up = tp.value(loss_fn(tp))(0, 0);
      p->value.data()[i] = saved - step;
      Tape tm;
      double dn = tm.value(loss_fn(tm))(0, 0);
      p->value.data()[i] = saved;
      double numeric = (up - dn) / (2.0 * step);
      double a = analytic[pi].data()[i];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->name;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace nst::ad
