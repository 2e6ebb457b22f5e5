#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "ecl/matrix.hpp"

namespace ecl::ad {

// Reverse-mode tape over dense matrices. Nodes are created in topological
// order (parents always precede children), so backward() is a single reverse
// sweep. Gradient accumulation order is fixed by tape order: identical tapes
// give bit-identical gradients.
//
// Single-threaded per tape; independent tapes may live on different threads.

enum class Op {
  kLeaf,
  kDetach,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMatMul,
  kTranspose,
  kAffine,      // alpha * x + beta
  kBiasAddRow,  // X[n,c] + broadcast of b[1,c]
  kRelu,
  kTanh,
  kSigmoid,
  kExp,
  kLog,  // log(max(x, kLogEps))
  kRowSoftmax,
  kSum,
  kMean,
  kPowConst,
  kAbs,
  kSumSq,
  kNorm,
  kRowNorm,     // [n,c] -> [n,1] L2 norm per row
  kPairSqDist,  // X[n,k], A[b,k] -> [n,b]
  kScaleRows,   // M[n,c] * diag-broadcast of v[n,1]
  kMulScalar,   // M * s with s a 1x1 node
  kTakeCols,    // y[i] = M[i, idx[i]], [n,1]
};

const char* op_name(Op op);

using NodeRef = int;

// Guard for log() inputs.
inline constexpr double kLogEps = 1e-12;

class Tape {
 public:
  NodeRef leaf(Matrix value);
  NodeRef scalar(double value) { return leaf(Matrix::scalar(value)); }

  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef mul(NodeRef a, NodeRef b);
  NodeRef div(NodeRef a, NodeRef b);
  NodeRef matmul(NodeRef a, NodeRef b);
  NodeRef transpose(NodeRef a);
  NodeRef affine(NodeRef a, double alpha, double beta);
  NodeRef bias_add_row(NodeRef x, NodeRef bias);
  NodeRef relu(NodeRef a);
  NodeRef tanh(NodeRef a);
  NodeRef sigmoid(NodeRef a);
  NodeRef exp(NodeRef a);
  NodeRef log(NodeRef a);
  NodeRef row_softmax(NodeRef a);
  NodeRef sum(NodeRef a);
  NodeRef mean(NodeRef a);
  NodeRef pow_const(NodeRef a, double exponent);
  NodeRef abs(NodeRef a);
  NodeRef sumsq(NodeRef a);
  NodeRef norm(NodeRef a);
  NodeRef row_norm(NodeRef a);
  NodeRef pair_sqdist(NodeRef x, NodeRef anchors);
  NodeRef scale_rows(NodeRef m, NodeRef v);
  NodeRef mul_scalar(NodeRef m, NodeRef s);
  NodeRef take_cols(NodeRef m, std::vector<int> idx);
  NodeRef detach(NodeRef a);

  // Zeroes all accumulators, seeds d(root)/d(root) = 1 and sweeps the tape in
  // reverse. root must be 1x1.
  void backward(NodeRef root);

  const Matrix& value(NodeRef n) const { return values_[n]; }
  const Matrix& grad(NodeRef n) const { return grads_[n]; }
  int size() const { return static_cast<int>(values_.size()); }
  void clear();

 private:
  NodeRef push(Op op, Matrix value, NodeRef p0 = -1, NodeRef p1 = -1,
               double a = 0.0, double b = 0.0);
  void backward_step(int i);

  // Deques keep value()/grad() references stable while new nodes are pushed.
  std::deque<Matrix> values_;
  std::deque<Matrix> grads_;
  std::vector<Op> ops_;
  std::vector<int> parent0_;
  std::vector<int> parent1_;
  std::vector<double> aux_a_;
  std::vector<double> aux_b_;
  std::vector<std::vector<int>> col_idx_;  // kTakeCols payload
};

// Central finite differences of a deterministic scalar map, one coordinate at
// a time. Test oracle for backward().
std::vector<Matrix> finite_difference_grad(
    const std::function<double(const std::vector<Matrix>&)>& f,
    const std::vector<Matrix>& theta, double h);

}  // namespace ecl::ad
