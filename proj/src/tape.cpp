#include "nst/tape.hpp"

#include <cmath>

namespace nst::ad {

namespace {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// sgn(x)|x|^e with exact fast paths for the exponents that training starts
// from (e = 1) and the common square.
inline double sign_pow_value(double x, double e) {
  if (e == 1.0) return x;
  if (e == 2.0) return x * std::abs(x);
  return sgn(x) * std::pow(std::abs(x), e);
}

// d/dx sgn(x)|x|^e = e|x|^{e-1}; the x = 0 value is the analytic limit for
// e > 1 and the two-sided slope for e = 1. For e < 1 the limit diverges, so
// 0 is used as the subgradient convention there as well.
inline double sign_pow_dx(double x, double e) {
  if (e == 1.0) return 1.0;
  if (x == 0.0) return 0.0;
  return e * std::pow(std::abs(x), e - 1.0);
}

// d/de sgn(x)|x|^e = sgn(x)|x|^e ln|x|; 0 at x = 0 (analytic limit).
inline double sign_pow_de(double x, double e) {
  if (x == 0.0) return 0.0;
  double ax = std::abs(x);
  return sgn(x) * std::pow(ax, e) * std::log(ax);
}

}  // namespace

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::check_same_shape_or_scalar(const Var& a, const Var& b) const {
  const Mat& va = nodes_[a.idx].value;
  const Mat& vb = nodes_[b.idx].value;
  bool ok = (va.rows() == vb.rows() && va.cols() == vb.cols()) || va.size() == 1 || vb.size() == 1;
  if (!ok) throw ShapeMismatch("elementwise operands have incompatible shapes");
}

Var Tape::constant(Mat v) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Tape::leaf(Param& p) {
  Node n;
  n.op = Op::kLeaf;
  n.value = p.value;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check_same_shape_or_scalar(a, b);
  Node n;
  n.op = Op::kAdd;
  n.a = a.idx;
  n.b = b.idx;
  const Mat& va = nodes_[a.idx].value;
  const Mat& vb = nodes_[b.idx].value;
  if (va.size() == 1 && vb.size() != 1)
    n.value = (vb.array() + va(0, 0)).matrix();
  else if (vb.size() == 1 && va.size() != 1)
    n.value = (va.array() + vb(0, 0)).matrix();
  else
    n.value = va + vb;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check_same_shape_or_scalar(a, b);
  Node n;
  n.op = Op::kSub;
  n.a = a.idx;
  n.b = b.idx;
  const Mat& va = nodes_[a.idx].value;
  const Mat& vb = nodes_[b.idx].value;
  if (va.size() == 1 && vb.size() != 1)
    n.value = (va(0, 0) - vb.array()).matrix();
  else if (vb.size() == 1 && va.size() != 1)
    n.value = (va.array() - vb(0, 0)).matrix();
  else
    n.value = va - vb;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check_same_shape_or_scalar(a, b);
  Node n;
  n.op = Op::kMul;
  n.a = a.idx;
  n.b = b.idx;
  const Mat& va = nodes_[a.idx].value;
  const Mat& vb = nodes_[b.idx].value;
  if (va.size() == 1 && vb.size() != 1)
    n.value = vb * va(0, 0);
  else if (vb.size() == 1 && va.size() != 1)
    n.value = va * vb(0, 0);
  else
    n.value = (va.array() * vb.array()).matrix();
  return push(std::move(n));
}

Var Tape::div(Var a, Var b) {
  check_same_shape_or_scalar(a, b);
  Node n;
  n.op = Op::kDiv;
  n.a = a.idx;
  n.b = b.idx;
  const Mat& va = nodes_[a.idx].value;
  const Mat& vb = nodes_[b.idx].value;
  if (va.size() == 1 && vb.size() != 1)
    n.value = (va(0, 0) / vb.array()).matrix();
  else if (vb.size() == 1 && va.size() != 1)
    n.value = va / vb(0, 0);
  else
    n.value = (va.array() / vb.array()).matrix();
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Mat& va = nodes_[a.idx].value;
  const Mat& vb = nodes_[b.idx].value;
  if (va.cols() != vb.rows()) throw ShapeMismatch("matmul inner dimensions disagree");
  Node n;
  n.op = Op::kMatMul;
  n.a = a.idx;
  n.b = b.idx;
  n.value = va * vb;
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a.idx;
  n.value = nodes_[a.idx].value.transpose();
  return push(std::move(n));
}

Var Tape::abs(Var a) {
  Node n;
  n.op = Op::kAbs;
  n.a = a.idx;
  n.value = nodes_[a.idx].value.array().abs().matrix();
  return push(std::move(n));
}

Var Tape::sign_pow(Var x, Var e) {
  if (nodes_[e.idx].value.size() != 1) throw ShapeMismatch("exponent must be a scalar");
  Node n;
  n.op = Op::kSignPow;
  n.a = x.idx;
  n.b = e.idx;
  const Mat& vx = nodes_[x.idx].value;
  double ev = nodes_[e.idx].value(0, 0);
  n.value = vx.unaryExpr([ev](double v) { return sign_pow_value(v, ev); });
  return push(std::move(n));
}

Var Tape::piecewise_pow(Var x, Var s, Var l) {
  if (nodes_[s.idx].value.size() != 1 || nodes_[l.idx].value.size() != 1)
    throw ShapeMismatch("exponents must be scalars");
  Node n;
  n.op = Op::kPiecewisePow;
  n.a = x.idx;
  n.b = s.idx;
  n.c = l.idx;
  const Mat& vx = nodes_[x.idx].value;
  double sv = nodes_[s.idx].value(0, 0);
  double lv = nodes_[l.idx].value(0, 0);
  // |x| = 1 takes the l branch.
  n.value = vx.unaryExpr(
      [sv, lv](double v) { return sign_pow_value(v, std::abs(v) < 1.0 ? sv : lv); });
  return push(std::move(n));
}

Var Tape::leaky_relu(Var x, double slope) {
  Node n;
  n.op = Op::kLeakyRelu;
  n.a = x.idx;
  n.aux = slope;
  n.value = nodes_[x.idx].value.unaryExpr(
      [slope](double v) { return v >= 0.0 ? v : slope * v; });
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x.idx;
  n.value = nodes_[x.idx].value.cwiseMax(0.0);
  return push(std::move(n));
}

Var Tape::steep_sigmoid(Var x, double slope) {
  Node n;
  n.op = Op::kSteepSigmoid;
  n.a = x.idx;
  n.aux = slope;
  n.value = nodes_[x.idx].value.unaryExpr(
      [slope](double v) { return 1.0 / (1.0 + std::exp(-slope * v)); });
  return push(std::move(n));
}

Var Tape::acos(Var x) {
  Node n;
  n.op = Op::kAcos;
  n.a = x.idx;
  n.value = nodes_[x.idx].value.unaryExpr([](double v) { return std::acos(v); });
  return push(std::move(n));
}

Var Tape::one_minus_exp_neg_abs(Var x) {
  Node n;
  n.op = Op::kOneMinusExpNegAbs;
  n.a = x.idx;
  n.value = nodes_[x.idx].value.unaryExpr(
      [](double v) { return 1.0 - std::exp(-std::abs(v)); });
  return push(std::move(n));
}

Var Tape::log1p_abs(Var x) {
  Node n;
  n.op = Op::kLog1pAbs;
  n.a = x.idx;
  n.value = nodes_[x.idx].value.unaryExpr([](double v) { return std::log1p(std::abs(v)); });
  return push(std::move(n));
}

Var Tape::sum(Var x) {
  Node n;
  n.op = Op::kSum;
  n.a = x.idx;
  n.value = Mat::Constant(1, 1, nodes_[x.idx].value.sum());
  return push(std::move(n));
}

Var Tape::mean(Var x) {
  Node n;
  n.op = Op::kMean;
  n.a = x.idx;
  n.value = Mat::Constant(1, 1, nodes_[x.idx].value.mean());
  return push(std::move(n));
}

Var Tape::row_sum(Var x) {
  Node n;
  n.op = Op::kRowSum;
  n.a = x.idx;
  n.value = nodes_[x.idx].value.rowwise().sum();
  return push(std::move(n));
}

Var Tape::row_min(Var x) {
  Node n;
  n.op = Op::kRowMin;
  n.a = x.idx;
  n.value = nodes_[x.idx].value.rowwise().minCoeff();
  return push(std::move(n));
}

Var Tape::square(Var x) {
  Node n;
  n.op = Op::kSquare;
  n.a = x.idx;
  n.value = nodes_[x.idx].value.array().square().matrix();
  return push(std::move(n));
}

Var Tape::gather_rows(Var x, std::vector<int> rows) {
  const Mat& vx = nodes_[x.idx].value;
  Node n;
  n.op = Op::kGatherRows;
  n.a = x.idx;
  n.value.resize(static_cast<int>(rows.size()), vx.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= vx.rows()) throw ShapeMismatch("gather index out of range");
    n.value.row(static_cast<int>(i)) = vx.row(rows[i]);
  }
  n.rows = std::move(rows);
  return push(std::move(n));
}

Var Tape::slice_cols(Var x, int start, int len) {
  const Mat& vx = nodes_[x.idx].value;
  if (start < 0 || len < 0 || start + len > vx.cols())
    throw ShapeMismatch("column slice out of range");
  Node n;
  n.op = Op::kSliceCols;
  n.a = x.idx;
  n.i0 = start;
  n.i1 = len;
  n.value = vx.middleCols(start, len);
  return push(std::move(n));
}

Var Tape::add_rowvec(Var x, Var row) {
  const Mat& vx = nodes_[x.idx].value;
  const Mat& vr = nodes_[row.idx].value;
  if (vr.rows() != 1 || vr.cols() != vx.cols())
    throw ShapeMismatch("row vector does not match matrix columns");
  Node n;
  n.op = Op::kAddRowVec;
  n.a = x.idx;
  n.b = row.idx;
  n.value = vx.rowwise() + vr.row(0);
  return push(std::move(n));
}

Var Tape::diag_scale(Var lambda, int dim) {
  if (nodes_[lambda.idx].value.size() != 1) throw ShapeMismatch("lambda must be a scalar");
  Node n;
  n.op = Op::kDiagScale;
  n.a = lambda.idx;
  n.i0 = dim;
  n.value = Mat::Identity(dim, dim) * nodes_[lambda.idx].value(0, 0);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (loss.tape != this || loss.idx < 0 || loss.idx >= static_cast<int>(nodes_.size()))
    throw Error("loss node does not belong to this tape");
  if (nodes_[loss.idx].value.size() != 1)
    throw NonScalarLoss("backward requires a scalar loss node");
  if (backward_done_)
    throw DoubleBackward("tape already walked backward; clear() before reusing");
  backward_done_ = true;

  for (Node& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  nodes_[loss.idx].grad(0, 0) = 1.0;

  auto accumulate = [&](int parent, const Mat& g) {
    Mat& dst = nodes_[parent].grad;
    if (dst.size() == 1 && g.size() != 1)
      dst(0, 0) += g.sum();  // broadcasted scalar operand
    else
      dst += g;
  };

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::kConstant:
        break;
      case Op::kLeaf:
        n.param->grad += g;
        break;
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::kMul: {
        const Mat& va = nodes_[n.a].value;
        const Mat& vb = nodes_[n.b].value;
        if (va.size() == 1 && vb.size() != 1) {
          accumulate(n.a, (g.array() * vb.array()).matrix());
          accumulate(n.b, g * va(0, 0));
        } else if (vb.size() == 1 && va.size() != 1) {
          accumulate(n.a, g * vb(0, 0));
          accumulate(n.b, (g.array() * va.array()).matrix());
        } else {
          accumulate(n.a, (g.array() * vb.array()).matrix());
          accumulate(n.b, (g.array() * va.array()).matrix());
        }
        break;
      }
      case Op::kDiv: {
        const Mat& va = nodes_[n.a].value;
        const Mat& vb = nodes_[n.b].value;
        if (vb.size() == 1 && va.size() != 1) {
          accumulate(n.a, g / vb(0, 0));
          accumulate(n.b, (-(g.array() * va.array()) / (vb(0, 0) * vb(0, 0))).matrix());
        } else if (va.size() == 1 && vb.size() != 1) {
          accumulate(n.a, (g.array() / vb.array()).matrix());
          accumulate(n.b, (-g.array() * va(0, 0) / vb.array().square()).matrix());
        } else {
          accumulate(n.a, (g.array() / vb.array()).matrix());
          accumulate(n.b, (-g.array() * va.array() / vb.array().square()).matrix());
        }
        break;
      }
      case Op::kMatMul:
        accumulate(n.a, g * nodes_[n.b].value.transpose());
        accumulate(n.b, nodes_[n.a].value.transpose() * g);
        break;
      case Op::kTranspose:
        accumulate(n.a, g.transpose());
        break;
      case Op::kAbs: {
        const Mat& vx = nodes_[n.a].value;
        accumulate(n.a, (g.array() * vx.unaryExpr([](double v) { return sgn(v); }).array()).matrix());
        break;
      }
      case Op::kSignPow: {
        const Mat& vx = nodes_[n.a].value;
        double e = nodes_[n.b].value(0, 0);
        accumulate(n.a, (g.array() * vx.unaryExpr([e](double v) { return sign_pow_dx(v, e); }).array()).matrix());
        double de = (g.array() * vx.unaryExpr([e](double v) { return sign_pow_de(v, e); }).array()).sum();
        accumulate(n.b, Mat::Constant(1, 1, de));
        break;
      }
      case Op::kPiecewisePow: {
        const Mat& vx = nodes_[n.a].value;
        double s = nodes_[n.b].value(0, 0);
        double l = nodes_[n.c].value(0, 0);
        accumulate(n.a, (g.array() * vx.unaryExpr([s, l](double v) {
                          return sign_pow_dx(v, std::abs(v) < 1.0 ? s : l);
                        }).array()).matrix());
        double ds = 0.0, dl = 0.0;
        for (int r = 0; r < vx.rows(); ++r)
          for (int cidx = 0; cidx < vx.cols(); ++cidx) {
            double v = vx(r, cidx);
            if (std::abs(v) < 1.0)
              ds += g(r, cidx) * sign_pow_de(v, s);
            else
              dl += g(r, cidx) * sign_pow_de(v, l);
          }
        accumulate(n.b, Mat::Constant(1, 1, ds));
        accumulate(n.c, Mat::Constant(1, 1, dl));
        break;
      }
      case Op::kLeakyRelu: {
        const Mat& vx = nodes_[n.a].value;
        double slope = n.aux;
        accumulate(n.a, (g.array() * vx.unaryExpr([slope](double v) {
                          return v >= 0.0 ? 1.0 : slope;
                        }).array()).matrix());
        break;
      }
      case Op::kRelu: {
        const Mat& vx = nodes_[n.a].value;
        accumulate(n.a, (g.array() * vx.unaryExpr([](double v) {
                          return v > 0.0 ? 1.0 : 0.0;
                        }).array()).matrix());
        break;
      }
      case Op::kSteepSigmoid: {
        double slope = n.aux;
        accumulate(n.a, (g.array() * (slope * n.value.array() * (1.0 - n.value.array()))).matrix());
        break;
      }
      case Op::kAcos: {
        const Mat& vx = nodes_[n.a].value;
        accumulate(n.a, (g.array() * vx.unaryExpr([](double v) {
                          return -1.0 / std::sqrt(1.0 - v * v);
                        }).array()).matrix());
        break;
      }
      case Op::kOneMinusExpNegAbs: {
        const Mat& vx = nodes_[n.a].value;
        accumulate(n.a, (g.array() * vx.unaryExpr([](double v) {
                          return sgn(v) * std::exp(-std::abs(v));
                        }).array()).matrix());
        break;
      }
      case Op::kLog1pAbs: {
        const Mat& vx = nodes_[n.a].value;
        accumulate(n.a, (g.array() * vx.unaryExpr([](double v) {
                          return sgn(v) / (1.0 + std::abs(v));
                        }).array()).matrix());
        break;
      }
      case Op::kSum:
        accumulate(n.a, Mat::Constant(nodes_[n.a].value.rows(), nodes_[n.a].value.cols(), g(0, 0)));
        break;
      case Op::kMean:
        accumulate(n.a, Mat::Constant(nodes_[n.a].value.rows(), nodes_[n.a].value.cols(),
                                      g(0, 0) / static_cast<double>(nodes_[n.a].value.size())));
        break;
      case Op::kRowSum: {
        const Mat& vx = nodes_[n.a].value;
        Mat gx(vx.rows(), vx.cols());
        for (int c = 0; c < vx.cols(); ++c) gx.col(c) = g.col(0);
        accumulate(n.a, gx);
        break;
      }
      case Op::kRowMin: {
        // Route each row's gradient to the first argmin entry.
        const Mat& vx = nodes_[n.a].value;
        Mat gx = Mat::Zero(vx.rows(), vx.cols());
        for (int r = 0; r < vx.rows(); ++r) {
          int arg = 0;
          for (int c = 1; c < vx.cols(); ++c)
            if (vx(r, c) < vx(r, arg)) arg = c;
          gx(r, arg) = g(r, 0);
        }
        accumulate(n.a, gx);
        break;
      }
      case Op::kSquare:
        accumulate(n.a, (2.0 * g.array() * nodes_[n.a].value.array()).matrix());
        break;
      case Op::kGatherRows: {
        const Mat& vx = nodes_[n.a].value;
        Mat gx = Mat::Zero(vx.rows(), vx.cols());
        for (std::size_t r = 0; r < n.rows.size(); ++r)
          gx.row(n.rows[r]) += g.row(static_cast<int>(r));
        accumulate(n.a, gx);
        break;
      }
      case Op::kSliceCols: {
        const Mat& vx = nodes_[n.a].value;
        Mat gx = Mat::Zero(vx.rows(), vx.cols());
        gx.middleCols(n.i0, n.i1) = g;
        accumulate(n.a, gx);
        break;
      }
      case Op::kAddRowVec:
        accumulate(n.a, g);
        accumulate(n.b, g.colwise().sum());
        break;
      case Op::kDiagScale:
        accumulate(n.a, Mat::Constant(1, 1, g.trace()));
        break;
    }
  }
}

double Tape::kink_margin() const {
  double margin = std::numeric_limits<double>::infinity();
  auto see = [&](double m) { margin = std::min(margin, m); };
  for (const Node& n : nodes_) {
    switch (n.op) {
      case Op::kAbs:
      case Op::kLeakyRelu:
      case Op::kRelu:
      case Op::kSignPow:
      case Op::kOneMinusExpNegAbs:
      case Op::kLog1pAbs:
        see(nodes_[n.a].value.array().abs().minCoeff());
        break;
      case Op::kPiecewisePow: {
        const Mat& vx = nodes_[n.a].value;
        see(vx.array().abs().minCoeff());
        see((vx.array().abs() - 1.0).abs().minCoeff());
        break;
      }
      case Op::kAcos:
        see((1.0 - nodes_[n.a].value.array().abs()).minCoeff());
        break;
      case Op::kRowMin: {
        const Mat& vx = nodes_[n.a].value;
        if (vx.cols() < 2) break;
        for (int r = 0; r < vx.rows(); ++r) {
          double lo = std::numeric_limits<double>::infinity();
          double second = lo;
          for (int c = 0; c < vx.cols(); ++c) {
            double v = vx(r, c);
            if (v < lo) {
              second = lo;
              lo = v;
            } else if (v < second) {
              second = v;
            }
          }
          see(second - lo);
        }
        break;
      }
      default:
        break;
    }
  }
  return margin;
}

double global_grad_norm(const std::vector<Param*>& params) {
  double sq = 0.0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void clip_global_norm(std::vector<Param*>& params, double max_norm) {
  double norm = global_grad_norm(params);
  if (norm == 0.0) return;
  double scale = std::min(1.0, max_norm / norm);
  if (scale == 1.0) return;
  for (Param* p : params) p->grad *= scale;
}

void zero_grads(std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace nst::ad
