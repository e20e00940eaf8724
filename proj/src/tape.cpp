#include "ndtt/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ndtt::ad {

namespace {

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::push(Node n) {
  if (!n.val.allFinite())
    throw Error(ErrorKind::NumericFailure, "non-finite value in forward computation (op " +
                                               std::to_string(static_cast<int>(n.op)) + ")");
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

double Tape::val1(Var v) const {
  const Vec& x = val(v);
  if (x.size() != 1) throw Error(ErrorKind::Internal, "expected a scalar node");
  return x[0];
}

Var Tape::constant(Vec v) {
  Node n;
  n.op = Op::Const;
  n.val = std::move(v);
  return push(std::move(n));
}

Var Tape::leaf(Tensor* t) {
  if (t->cols() != 1) throw Error(ErrorKind::Internal, "leaf() expects a column tensor");
  Node n;
  n.op = Op::Leaf;
  n.t = t;
  n.val = t->value.col(0);
  return push(std::move(n));
}

Var Tape::matvec(Tensor* W, Var x) {
  if (W->cols() != size(x)) throw Error(ErrorKind::ShapeConflict, "matvec shape mismatch");
  Node n;
  n.op = Op::MatVec;
  n.t = W;
  n.a = x.idx;
  n.val = W->value * val(x);
  return push(std::move(n));
}

namespace {
// elementwise binary with size-1 broadcast
template <class F>
Vec broadcast_apply(const Vec& a, const Vec& b, F f) {
  if (a.size() == b.size()) {
    Vec out(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  if (a.size() == 1) {
    Vec out(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) out[i] = f(a[0], b[i]);
    return out;
  }
  if (b.size() == 1) {
    Vec out(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out[i] = f(a[i], b[0]);
    return out;
  }
  throw Error(ErrorKind::ShapeConflict, "elementwise op on mismatched sizes");
}
}  // namespace

Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::Add;
  n.a = a.idx;
  n.b = b.idx;
  n.val = broadcast_apply(val(a), val(b), [](double x, double y) { return x + y; });
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  Node n;
  n.op = Op::Sub;
  n.a = a.idx;
  n.b = b.idx;
  n.val = broadcast_apply(val(a), val(b), [](double x, double y) { return x - y; });
  return push(std::move(n));
}

Var Tape::add_many(const std::vector<Var>& xs) {
  if (xs.empty()) throw Error(ErrorKind::Internal, "add_many of nothing");
  if (xs.size() == 1) return xs[0];
  Node n;
  n.op = Op::AddMany;
  n.val = val(xs[0]);
  for (size_t i = 1; i < xs.size(); ++i) {
    if (size(xs[i]) != n.val.size())
      throw Error(ErrorKind::ShapeConflict, "add_many size mismatch");
    n.val += val(xs[i]);
  }
  for (Var x : xs) n.list.push_back(x.idx);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  Node n;
  n.op = Op::Mul;
  n.a = a.idx;
  n.b = b.idx;
  n.val = broadcast_apply(val(a), val(b), [](double x, double y) { return x * y; });
  return push(std::move(n));
}

Var Tape::div(Var a, Var b) {
  Node n;
  n.op = Op::Div;
  n.a = a.idx;
  n.b = b.idx;
  n.val = broadcast_apply(val(a), val(b), [](double x, double y) { return x / y; });
  return push(std::move(n));
}

Var Tape::neg(Var a) {
  Node n;
  n.op = Op::Neg;
  n.a = a.idx;
  n.val = -val(a);
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a.idx;
  n.c = c;
  n.val = c * val(a);
  return push(std::move(n));
}

Var Tape::add_const(Var a, double c) {
  Node n;
  n.op = Op::AddConst;
  n.a = a.idx;
  n.c = c;
  n.val = val(a).array() + c;
  return push(std::move(n));
}

Var Tape::concat(const std::vector<Var>& xs) {
  Node n;
  n.op = Op::Concat;
  Eigen::Index total = 0;
  for (Var x : xs) total += val(x).size();
  n.val.resize(total);
  Eigen::Index off = 0;
  for (Var x : xs) {
    n.val.segment(off, val(x).size()) = val(x);
    off += val(x).size();
    n.list.push_back(x.idx);
  }
  return push(std::move(n));
}

Var Tape::slice(Var a, int offset, int len) {
  if (offset < 0 || len < 0 || offset + len > size(a))
    throw Error(ErrorKind::Internal, "slice out of range");
  Node n;
  n.op = Op::Slice;
  n.a = a.idx;
  n.i0 = offset;
  n.i1 = len;
  n.val = val(a).segment(offset, len);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a.idx;
  n.val = val(a).array().tanh();
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a.idx;
  n.val = val(a).unaryExpr([](double x) { return stable_sigmoid(x); });
  return push(std::move(n));
}

Var Tape::softplus1(Var a) {
  Node n;
  n.op = Op::Softplus1;
  n.a = a.idx;
  n.val = val(a).unaryExpr([](double x) { return stable_softplus(x); });
  return push(std::move(n));
}

Var Tape::softplus_scaled(Var x, Var tau) {
  double t = val1(tau);
  Node n;
  n.op = Op::SoftplusScaled;
  n.a = x.idx;
  n.b = tau.idx;
  // clamped at the smallest normal so intensities stay strictly positive even
  // when tau * softplus(x/tau) underflows
  n.val = val(x).unaryExpr([t](double xi) {
    return std::max(t * stable_softplus(xi / t), std::numeric_limits<double>::min());
  });
  return push(std::move(n));
}

Var Tape::signed_pow(Var x, Var beta) {
  double b = val1(beta);
  Node n;
  n.op = Op::SignedPow;
  n.a = x.idx;
  n.b = beta.idx;
  n.val = val(x).unaryExpr([b](double xi) {
    return xi == 0.0 ? 0.0 : (xi > 0 ? std::pow(xi, b) : -std::pow(-xi, b));
  });
  return push(std::move(n));
}

Var Tape::signed_root(Var y, Var beta) {
  double b = val1(beta);
  Node n;
  n.op = Op::SignedRoot;
  n.a = y.idx;
  n.b = beta.idx;
  n.val = val(y).unaryExpr([b](double yi) {
    return yi == 0.0 ? 0.0 : (yi > 0 ? std::pow(yi, 1.0 / b) : -std::pow(-yi, 1.0 / b));
  });
  return push(std::move(n));
}

Var Tape::abs(Var a) {
  Node n;
  n.op = Op::Abs;
  n.a = a.idx;
  n.val = val(a).array().abs();
  return push(std::move(n));
}

Var Tape::recip(Var a) {
  Node n;
  n.op = Op::Recip;
  n.a = a.idx;
  n.val = val(a).cwiseInverse();
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.a = a.idx;
  n.val = Vec::Constant(1, val(a).sum());
  return push(std::move(n));
}

Var Tape::log(Var a) {
  Node n;
  n.op = Op::Log;
  n.a = a.idx;
  n.val = val(a).array().log();
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  Node n;
  n.op = Op::Exp;
  n.a = a.idx;
  n.val = val(a).array().exp();
  return push(std::move(n));
}

Var Tape::logsumexp(Var a) {
  const Vec& x = val(a);
  if (x.size() == 0) throw Error(ErrorKind::Internal, "logsumexp of nothing");
  double m = x.maxCoeff();
  double s = (x.array() - m).exp().sum();
  Node n;
  n.op = Op::LogSumExp;
  n.a = a.idx;
  n.val = Vec::Constant(1, m + std::log(s));
  return push(std::move(n));
}

Var Tape::where_pos(const Vec& mask, Var a, Var b) {
  if (mask.size() != val(a).size() || mask.size() != val(b).size())
    throw Error(ErrorKind::ShapeConflict, "where_pos size mismatch");
  Node n;
  n.op = Op::WherePos;
  n.a = a.idx;
  n.b = b.idx;
  n.aux = mask;
  n.val = (mask.array() > 0).select(val(a), val(b));
  return push(std::move(n));
}

void Tape::backward(Var loss, double seed) {
  if (!loss.ok() || size(loss) != 1)
    throw Error(ErrorKind::Internal, "backward requires a scalar loss");
  const size_t top = static_cast<size_t>(loss.idx);
  std::vector<Vec> grads(top + 1);
  std::vector<char> live(top + 1, 0);
  grads[top] = Vec::Constant(1, seed);
  live[top] = 1;

  auto acc = [&](int32_t i, const Vec& g) {
    size_t k = static_cast<size_t>(i);
    if (!live[k]) {
      grads[k] = g;
      live[k] = 1;
    } else {
      grads[k] += g;
    }
  };
  // add the (possibly broadcast) gradient g of a binary op output into input i
  auto acc_bcast = [&](int32_t i, const Vec& g) {
    size_t k = static_cast<size_t>(i);
    if (nodes_[k].val.size() == g.size()) {
      acc(i, g);
    } else {
      acc(i, Vec::Constant(1, g.sum()));
    }
  };

  for (size_t i = top + 1; i-- > 0;) {
    if (!live[i]) continue;
    const Node& n = nodes_[i];
    const Vec& g = grads[i];
    switch (n.op) {
      case Op::Const:
        break;
      case Op::Leaf:
        if (!n.t->frozen) n.t->grad.col(0) += g;
        break;
      case Op::MatVec:
        acc(n.a, n.t->value.transpose() * g);
        if (!n.t->frozen) n.t->grad += g * v(n.a).transpose();
        break;
      case Op::Add:
        acc_bcast(n.a, g);
        acc_bcast(n.b, g);
        break;
      case Op::Sub:
        acc_bcast(n.a, g);
        acc_bcast(n.b, Vec(-g));
        break;
      case Op::AddMany:
        for (int32_t x : n.list) acc(x, g);
        break;
      case Op::Mul: {
        Vec da = broadcast_apply(g, v(n.b), [](double gi, double bi) { return gi * bi; });
        Vec db = broadcast_apply(g, v(n.a), [](double gi, double ai) { return gi * ai; });
        acc_bcast(n.a, da);
        acc_bcast(n.b, db);
        break;
      }
      case Op::Div: {
        Vec da = broadcast_apply(g, v(n.b), [](double gi, double bi) { return gi / bi; });
        acc_bcast(n.a, da);
        Vec y_over_b = broadcast_apply(n.val, v(n.b), [](double yi, double bi) { return yi / bi; });
        Vec db = broadcast_apply(g, y_over_b, [](double gi, double q) { return -gi * q; });
        acc_bcast(n.b, db);
        break;
      }
      case Op::Neg:
        acc(n.a, Vec(-g));
        break;
      case Op::Scale:
        acc(n.a, Vec(n.c * g));
        break;
      case Op::AddConst:
        acc(n.a, g);
        break;
      case Op::Concat: {
        Eigen::Index off = 0;
        for (int32_t x : n.list) {
          Eigen::Index len = v(x).size();
          acc(x, g.segment(off, len));
          off += len;
        }
        break;
      }
      case Op::Slice: {
        Vec gx = Vec::Zero(v(n.a).size());
        gx.segment(n.i0, n.i1) = g;
        acc(n.a, gx);
        break;
      }
      case Op::Tanh:
        acc(n.a, Vec(g.array() * (1.0 - n.val.array().square())));
        break;
      case Op::Sigmoid:
        acc(n.a, Vec(g.array() * n.val.array() * (1.0 - n.val.array())));
        break;
      case Op::Softplus1:
        acc(n.a, Vec(g.array() * v(n.a).unaryExpr([](double x) { return stable_sigmoid(x); }).array()));
        break;
      case Op::SoftplusScaled: {
        double t = v(n.b)[0];
        const Vec& x = v(n.a);
        Vec dx(x.size());
        double dtau = 0;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
          double u = x[k] / t;
          double s = stable_sigmoid(u);
          dx[k] = g[k] * s;
          dtau += g[k] * (stable_softplus(u) - u * s);
        }
        acc(n.a, dx);
        acc(n.b, Vec::Constant(1, dtau));
        break;
      }
      case Op::SignedPow: {
        double b = v(n.b)[0];
        const Vec& x = v(n.a);
        Vec dx(x.size());
        double db = 0;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
          double ax = std::fabs(x[k]);
          if (ax == 0.0) {
            dx[k] = g[k] * (b == 1.0 ? 1.0 : 0.0);
          } else {
            dx[k] = g[k] * b * std::pow(ax, b - 1.0);
            db += g[k] * n.val[k] * std::log(ax);
          }
        }
        acc(n.a, dx);
        acc(n.b, Vec::Constant(1, db));
        break;
      }
      case Op::SignedRoot: {
        double b = v(n.b)[0];
        const Vec& y = v(n.a);
        Vec dy(y.size());
        double db = 0;
        for (Eigen::Index k = 0; k < y.size(); ++k) {
          double ay = std::fabs(y[k]);
          if (ay == 0.0) {
            dy[k] = g[k] * (b == 1.0 ? 1.0 : 0.0);
          } else {
            dy[k] = g[k] * (1.0 / b) * std::pow(ay, 1.0 / b - 1.0);
            db += g[k] * n.val[k] * std::log(ay) * (-1.0 / (b * b));
          }
        }
        acc(n.a, dy);
        acc(n.b, Vec::Constant(1, db));
        break;
      }
      case Op::Abs:
        acc(n.a, Vec(g.array() * v(n.a).unaryExpr([](double x) {
                                      return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
                                    }).array()));
        break;
      case Op::Recip:
        acc(n.a, Vec(-g.array() * n.val.array().square()));
        break;
      case Op::Sum:
        acc(n.a, Vec::Constant(v(n.a).size(), g[0]));
        break;
      case Op::Log:
        acc(n.a, Vec(g.array() / v(n.a).array()));
        break;
      case Op::Exp:
        acc(n.a, Vec(g.array() * n.val.array()));
        break;
      case Op::LogSumExp: {
        const Vec& x = v(n.a);
        acc(n.a, Vec(g[0] * (x.array() - n.val[0]).exp()));
        break;
      }
      case Op::WherePos: {
        Vec ga = (n.aux.array() > 0).select(g, Vec::Zero(g.size()));
        Vec gb = (n.aux.array() > 0).select(Vec::Zero(g.size()), g);
        acc(n.a, ga);
        acc(n.b, gb);
        break;
      }
    }
  }
}

}  // namespace ndtt::ad
