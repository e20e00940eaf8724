#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ndtt/error.hpp"

namespace ndtt::ad {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Named trainable tensor; vectors are stored as n x 1. The gradient buffer
// persists across tapes and is cleared by the optimizer step.
struct Tensor {
  Mat value;
  Mat grad;
  bool frozen = false;

  Tensor() = default;
  Tensor(Mat v, bool frozen_ = false)
      : value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())), frozen(frozen_) {}
  int rows() const { return static_cast<int>(value.rows()); }
  int cols() const { return static_cast<int>(value.cols()); }
};

struct Var {
  int32_t idx = -1;
  bool ok() const { return idx >= 0; }
};

// Reverse-mode tape over dense vectors. The graph is rebuilt per sequence;
// backward() accumulates into the parameters' grad buffers and the tape is
// then discarded. Every forward op checks its output for NaN/Inf.
class Tape {
public:
  Var constant(Vec v);
  Var constant(double x) { return constant(Vec::Constant(1, x)); }
  Var zeros(int n) { return constant(Vec::Zero(n)); }

  // leaf over a parameter; the tensor must be a column (n x 1)
  Var leaf(Tensor* t);
  // W.value * x, gradient into W unless frozen
  Var matvec(Tensor* W, Var x);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_many(const std::vector<Var>& xs);
  Var mul(Var a, Var b);  // elementwise; either side may be a scalar
  Var div(Var a, Var b);
  Var neg(Var a);
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var concat(const std::vector<Var>& xs);
  Var slice(Var a, int offset, int len);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus1(Var a);                 // ln(1 + e^x), elementwise
  Var softplus_scaled(Var x, Var tau);  // tau ln(1 + e^{x/tau}); tau scalar
  Var signed_pow(Var x, Var beta);      // sign(x) |x|^beta; beta scalar
  Var signed_root(Var y, Var beta);     // sign(y) |y|^{1/beta}
  Var abs(Var a);
  Var recip(Var a);
  Var sum(Var a);  // -> scalar
  Var log(Var a);
  Var exp(Var a);
  Var logsumexp(Var a);  // -> scalar
  // elementwise mask > 0 ? a : b; mask carries no gradient
  Var where_pos(const Vec& mask, Var a, Var b);

  const Vec& val(Var v) const { return nodes_[static_cast<size_t>(v.idx)].val; }
  double val1(Var v) const;
  int size(Var v) const { return static_cast<int>(val(v).size()); }

  // reverse sweep from a scalar; seeds d(loss)/d(loss) = seed
  void backward(Var loss, double seed = 1.0);

  size_t num_nodes() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

private:
  enum class Op : uint8_t {
    Const, Leaf, MatVec, Add, Sub, AddMany, Mul, Div, Neg, Scale, AddConst,
    Concat, Slice, Tanh, Sigmoid, Softplus1, SoftplusScaled, SignedPow,
    SignedRoot, Abs, Recip, Sum, Log, Exp, LogSumExp, WherePos,
  };

  struct Node {
    Op op;
    int32_t a = -1, b = -1;
    int32_t i0 = 0, i1 = 0;
    double c = 0;
    Tensor* t = nullptr;
    std::vector<int32_t> list;
    Vec val;
    Vec aux;  // mask for WherePos
  };

  Var push(Node n);
  const Vec& v(int32_t i) const { return nodes_[static_cast<size_t>(i)].val; }

  std::vector<Node> nodes_;
};

}  // namespace ndtt::ad
