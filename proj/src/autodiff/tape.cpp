#include "ecl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ecl/kernels.hpp"

namespace ecl::ad {

namespace {
const kernels::KernelTable& K() { return kernels::active(); }

// A single reduction catches inf (sum becomes inf or nan) and nan.
bool finite_matrix(const Matrix& m) {
  return std::isfinite(K().sum(m.ptr(), m.data.size()));
}

[[noreturn]] void shape_error(Op op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op_name(op)) + ": shape mismatch (" +
                              std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                              " vs " + std::to_string(b.rows) + "x" +
                              std::to_string(b.cols) + ")");
}
}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kDetach: return "detach";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAffine: return "affine";
    case Op::kBiasAddRow: return "bias_add_row";
    case Op::kRelu: return "relu";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kRowSoftmax: return "row_softmax";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kPowConst: return "pow_const";
    case Op::kAbs: return "abs";
    case Op::kSumSq: return "sumsq";
    case Op::kNorm: return "norm";
    case Op::kRowNorm: return "row_norm";
    case Op::kPairSqDist: return "pair_sqdist";
    case Op::kScaleRows: return "scale_rows";
    case Op::kMulScalar: return "mul_scalar";
    case Op::kTakeCols: return "take_cols";
  }
  return "?";
}

NodeRef Tape::push(Op op, Matrix value, NodeRef p0, NodeRef p1, double a, double b) {
  if (op != Op::kLeaf && !finite_matrix(value))
    throw std::runtime_error(std::string(op_name(op)) + ": non-finite value produced");
  values_.push_back(std::move(value));
  ops_.push_back(op);
  parent0_.push_back(p0);
  parent1_.push_back(p1);
  aux_a_.push_back(a);
  aux_b_.push_back(b);
  col_idx_.emplace_back();
  return static_cast<NodeRef>(values_.size() - 1);
}

NodeRef Tape::leaf(Matrix value) { return push(Op::kLeaf, std::move(value)); }

NodeRef Tape::detach(NodeRef a) {
  // Value copy with no parents: backward never crosses it.
  return push(Op::kDetach, values_[a]);
}

NodeRef Tape::add(NodeRef a, NodeRef b) {
  const Matrix &va = values_[a], &vb = values_[b];
  if (!va.same_shape(vb)) shape_error(Op::kAdd, va, vb);
  Matrix out(va.rows, va.cols);
  K().add(va.ptr(), vb.ptr(), out.ptr(), out.data.size());
  return push(Op::kAdd, std::move(out), a, b);
}

NodeRef Tape::sub(NodeRef a, NodeRef b) {
  const Matrix &va = values_[a], &vb = values_[b];
  if (!va.same_shape(vb)) shape_error(Op::kSub, va, vb);
  Matrix out(va.rows, va.cols);
  K().sub(va.ptr(), vb.ptr(), out.ptr(), out.data.size());
  return push(Op::kSub, std::move(out), a, b);
}

NodeRef Tape::mul(NodeRef a, NodeRef b) {
  const Matrix &va = values_[a], &vb = values_[b];
  if (!va.same_shape(vb)) shape_error(Op::kMul, va, vb);
  Matrix out(va.rows, va.cols);
  K().mul(va.ptr(), vb.ptr(), out.ptr(), out.data.size());
  return push(Op::kMul, std::move(out), a, b);
}

NodeRef Tape::div(NodeRef a, NodeRef b) {
  const Matrix &va = values_[a], &vb = values_[b];
  if (!va.same_shape(vb)) shape_error(Op::kDiv, va, vb);
  Matrix out(va.rows, va.cols);
  K().div(va.ptr(), vb.ptr(), out.ptr(), out.data.size());
  return push(Op::kDiv, std::move(out), a, b);
}

NodeRef Tape::matmul(NodeRef a, NodeRef b) {
  const Matrix &va = values_[a], &vb = values_[b];
  if (va.cols != vb.rows) shape_error(Op::kMatMul, va, vb);
  Matrix out(va.rows, vb.cols);
  K().matmul_nn(va.ptr(), vb.ptr(), out.ptr(), va.rows, va.cols, vb.cols);
  return push(Op::kMatMul, std::move(out), a, b);
}

NodeRef Tape::transpose(NodeRef a) {
  const Matrix& va = values_[a];
  Matrix out(va.cols, va.rows);
  for (int i = 0; i < va.rows; ++i)
    for (int j = 0; j < va.cols; ++j) out.at(j, i) = va.at(i, j);
  return push(Op::kTranspose, std::move(out), a);
}

NodeRef Tape::affine(NodeRef a, double alpha, double beta) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, va.cols);
  K().affine(alpha, beta, va.ptr(), out.ptr(), out.data.size());
  return push(Op::kAffine, std::move(out), a, -1, alpha, beta);
}

NodeRef Tape::bias_add_row(NodeRef x, NodeRef bias) {
  const Matrix &vx = values_[x], &vb = values_[bias];
  if (vb.rows != 1 || vb.cols != vx.cols) shape_error(Op::kBiasAddRow, vx, vb);
  Matrix out(vx.rows, vx.cols);
  for (int i = 0; i < vx.rows; ++i)
    K().add(vx.row(i), vb.ptr(), out.row(i), static_cast<std::size_t>(vx.cols));
  return push(Op::kBiasAddRow, std::move(out), x, bias);
}

NodeRef Tape::relu(NodeRef a) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, va.cols);
  K().relu(va.ptr(), out.ptr(), out.data.size());
  return push(Op::kRelu, std::move(out), a);
}

NodeRef Tape::tanh(NodeRef a) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, va.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::tanh(va.data[i]);
  return push(Op::kTanh, std::move(out), a);
}

NodeRef Tape::sigmoid(NodeRef a) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, va.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double x = va.data[i];
    out.data[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                           : std::exp(x) / (1.0 + std::exp(x));
  }
  return push(Op::kSigmoid, std::move(out), a);
}

NodeRef Tape::exp(NodeRef a) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, va.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::exp(va.data[i]);
  return push(Op::kExp, std::move(out), a);
}

NodeRef Tape::log(NodeRef a) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, va.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::log(std::max(va.data[i], kLogEps));
  return push(Op::kLog, std::move(out), a);
}

NodeRef Tape::row_softmax(NodeRef a) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, va.cols);
  for (int i = 0; i < va.rows; ++i) {
    const double* xi = va.row(i);
    double* yi = out.row(i);
    double mx = xi[0];
    for (int j = 1; j < va.cols; ++j) mx = std::max(mx, xi[j]);
    double denom = 0.0;
    for (int j = 0; j < va.cols; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      denom += yi[j];
    }
    for (int j = 0; j < va.cols; ++j) yi[j] /= denom;
  }
  return push(Op::kRowSoftmax, std::move(out), a);
}

NodeRef Tape::sum(NodeRef a) {
  const Matrix& va = values_[a];
  return push(Op::kSum, Matrix::scalar(K().sum(va.ptr(), va.data.size())), a);
}

NodeRef Tape::mean(NodeRef a) {
  const Matrix& va = values_[a];
  return push(Op::kMean,
              Matrix::scalar(K().sum(va.ptr(), va.data.size()) / va.size()), a);
}

NodeRef Tape::pow_const(NodeRef a, double exponent) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, va.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::pow(va.data[i], exponent);
  return push(Op::kPowConst, std::move(out), a, -1, exponent);
}

NodeRef Tape::abs(NodeRef a) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, va.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::fabs(va.data[i]);
  return push(Op::kAbs, std::move(out), a);
}

NodeRef Tape::sumsq(NodeRef a) {
  const Matrix& va = values_[a];
  return push(Op::kSumSq, Matrix::scalar(K().sumsq(va.ptr(), va.data.size())), a);
}

NodeRef Tape::norm(NodeRef a) {
  const Matrix& va = values_[a];
  return push(Op::kNorm,
              Matrix::scalar(std::sqrt(K().sumsq(va.ptr(), va.data.size()))), a);
}

NodeRef Tape::row_norm(NodeRef a) {
  const Matrix& va = values_[a];
  Matrix out(va.rows, 1);
  for (int i = 0; i < va.rows; ++i)
    out.data[i] = std::sqrt(K().sumsq(va.row(i), static_cast<std::size_t>(va.cols)));
  return push(Op::kRowNorm, std::move(out), a);
}

NodeRef Tape::pair_sqdist(NodeRef x, NodeRef anchors) {
  const Matrix &vx = values_[x], &va = values_[anchors];
  if (vx.cols != va.cols) shape_error(Op::kPairSqDist, vx, va);
  Matrix out(vx.rows, va.rows);
  K().pair_sqdist(vx.ptr(), va.ptr(), out.ptr(), vx.rows, va.rows, vx.cols);
  return push(Op::kPairSqDist, std::move(out), x, anchors);
}

NodeRef Tape::scale_rows(NodeRef m, NodeRef v) {
  const Matrix &vm = values_[m], &vv = values_[v];
  if (vv.rows != vm.rows || vv.cols != 1) shape_error(Op::kScaleRows, vm, vv);
  Matrix out(vm.rows, vm.cols);
  for (int i = 0; i < vm.rows; ++i)
    K().affine(vv.data[i], 0.0, vm.row(i), out.row(i), static_cast<std::size_t>(vm.cols));
  return push(Op::kScaleRows, std::move(out), m, v);
}

NodeRef Tape::mul_scalar(NodeRef m, NodeRef s) {
  const Matrix &vm = values_[m], &vs = values_[s];
  if (vs.size() != 1) shape_error(Op::kMulScalar, vm, vs);
  Matrix out(vm.rows, vm.cols);
  K().affine(vs.data[0], 0.0, vm.ptr(), out.ptr(), out.data.size());
  return push(Op::kMulScalar, std::move(out), m, s);
}

NodeRef Tape::take_cols(NodeRef m, std::vector<int> idx) {
  const Matrix& vm = values_[m];
  if (static_cast<int>(idx.size()) != vm.rows)
    throw std::invalid_argument("take_cols: index count != rows");
  Matrix out(vm.rows, 1);
  for (int i = 0; i < vm.rows; ++i) {
    if (idx[i] < 0 || idx[i] >= vm.cols)
      throw std::invalid_argument("take_cols: column index out of range");
    out.data[i] = vm.at(i, idx[i]);
  }
  NodeRef r = push(Op::kTakeCols, std::move(out), m);
  col_idx_[r] = std::move(idx);
  return r;
}

void Tape::backward(NodeRef root) {
  if (values_[root].size() != 1)
    throw std::invalid_argument("backward: root must be a 1x1 scalar");
  grads_.assign(values_.size(), Matrix());
  for (std::size_t i = 0; i < values_.size(); ++i)
    grads_[i] = Matrix::zeros(values_[i].rows, values_[i].cols);
  grads_[root].data[0] = 1.0;
  for (int i = root; i >= 0; --i) backward_step(i);
}

void Tape::backward_step(int i) {
  const Op op = ops_[i];
  if (op == Op::kLeaf || op == Op::kDetach) return;
  const Matrix& g = grads_[i];
  const Matrix& y = values_[i];
  const int p0 = parent0_[i];
  const int p1 = parent1_[i];
  const Matrix& x0 = values_[p0];
  const std::size_t n0 = x0.data.size();

  switch (op) {
    case Op::kAdd:
      K().axpy(1.0, g.ptr(), grads_[p0].ptr(), n0);
      K().axpy(1.0, g.ptr(), grads_[p1].ptr(), n0);
      break;
    case Op::kSub:
      K().axpy(1.0, g.ptr(), grads_[p0].ptr(), n0);
      K().axpy(-1.0, g.ptr(), grads_[p1].ptr(), n0);
      break;
    case Op::kMul: {
      Matrix t(x0.rows, x0.cols);
      K().mul(g.ptr(), values_[p1].ptr(), t.ptr(), n0);
      K().axpy(1.0, t.ptr(), grads_[p0].ptr(), n0);
      K().mul(g.ptr(), x0.ptr(), t.ptr(), n0);
      K().axpy(1.0, t.ptr(), grads_[p1].ptr(), n0);
      break;
    }
    case Op::kDiv: {
      // y = a/b: da += g/b, db += -g*a/b^2 = -g*y/b
      const Matrix& b = values_[p1];
      Matrix t(x0.rows, x0.cols);
      K().div(g.ptr(), b.ptr(), t.ptr(), n0);
      K().axpy(1.0, t.ptr(), grads_[p0].ptr(), n0);
      K().mul(t.ptr(), y.ptr(), t.ptr(), n0);
      K().axpy(-1.0, t.ptr(), grads_[p1].ptr(), n0);
      break;
    }
    case Op::kMatMul: {
      const Matrix& a = x0;
      const Matrix& b = values_[p1];
      Matrix da(a.rows, a.cols);
      K().matmul_nt(g.ptr(), b.ptr(), da.ptr(), g.rows, g.cols, b.rows);
      K().axpy(1.0, da.ptr(), grads_[p0].ptr(), da.data.size());
      Matrix db(b.rows, b.cols);
      K().matmul_tn(a.ptr(), g.ptr(), db.ptr(), a.cols, a.rows, g.cols);
      K().axpy(1.0, db.ptr(), grads_[p1].ptr(), db.data.size());
      break;
    }
    case Op::kTranspose:
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) grads_[p0].at(c, r) += g.at(r, c);
      break;
    case Op::kAffine:
      K().axpy(aux_a_[i], g.ptr(), grads_[p0].ptr(), n0);
      break;
    case Op::kBiasAddRow: {
      K().axpy(1.0, g.ptr(), grads_[p0].ptr(), n0);
      Matrix& db = grads_[p1];
      for (int r = 0; r < g.rows; ++r)
        K().axpy(1.0, g.row(r), db.ptr(), static_cast<std::size_t>(g.cols));
      break;
    }
    case Op::kRelu:
      K().relu_backward(x0.ptr(), g.ptr(), grads_[p0].ptr(), n0);
      break;
    case Op::kTanh: {
      Matrix t(x0.rows, x0.cols);
      K().mul(y.ptr(), y.ptr(), t.ptr(), n0);
      K().affine(-1.0, 1.0, t.ptr(), t.ptr(), n0);  // 1 - y^2
      K().mul(t.ptr(), g.ptr(), t.ptr(), n0);
      K().axpy(1.0, t.ptr(), grads_[p0].ptr(), n0);
      break;
    }
    case Op::kSigmoid: {
      Matrix t(x0.rows, x0.cols);
      K().affine(-1.0, 1.0, y.ptr(), t.ptr(), n0);  // 1 - y
      K().mul(t.ptr(), y.ptr(), t.ptr(), n0);
      K().mul(t.ptr(), g.ptr(), t.ptr(), n0);
      K().axpy(1.0, t.ptr(), grads_[p0].ptr(), n0);
      break;
    }
    case Op::kExp: {
      Matrix t(x0.rows, x0.cols);
      K().mul(g.ptr(), y.ptr(), t.ptr(), n0);
      K().axpy(1.0, t.ptr(), grads_[p0].ptr(), n0);
      break;
    }
    case Op::kLog: {
      Matrix& dx = grads_[p0];
      for (std::size_t j = 0; j < n0; ++j)
        dx.data[j] += g.data[j] / std::max(x0.data[j], kLogEps);
      break;
    }
    case Op::kRowSoftmax: {
      Matrix& dx = grads_[p0];
      for (int r = 0; r < y.rows; ++r) {
        const double gd = K().dot(g.row(r), y.row(r), static_cast<std::size_t>(y.cols));
        for (int c = 0; c < y.cols; ++c)
          dx.at(r, c) += y.at(r, c) * (g.at(r, c) - gd);
      }
      break;
    }
    case Op::kSum:
      for (std::size_t j = 0; j < n0; ++j) grads_[p0].data[j] += g.data[0];
      break;
    case Op::kMean: {
      const double s = g.data[0] / x0.size();
      for (std::size_t j = 0; j < n0; ++j) grads_[p0].data[j] += s;
      break;
    }
    case Op::kPowConst: {
      const double e = aux_a_[i];
      Matrix& dx = grads_[p0];
      for (std::size_t j = 0; j < n0; ++j)
        dx.data[j] += g.data[j] * e * std::pow(x0.data[j], e - 1.0);
      break;
    }
    case Op::kAbs: {
      Matrix& dx = grads_[p0];
      for (std::size_t j = 0; j < n0; ++j) {
        const double s = x0.data[j] > 0.0 ? 1.0 : (x0.data[j] < 0.0 ? -1.0 : 0.0);
        dx.data[j] += g.data[j] * s;
      }
      break;
    }
    case Op::kSumSq:
      K().axpy(2.0 * g.data[0], x0.ptr(), grads_[p0].ptr(), n0);
      break;
    case Op::kNorm: {
      const double denom = std::max(y.data[0], 1e-30);
      K().axpy(g.data[0] / denom, x0.ptr(), grads_[p0].ptr(), n0);
      break;
    }
    case Op::kRowNorm: {
      Matrix& dx = grads_[p0];
      for (int r = 0; r < x0.rows; ++r) {
        const double denom = std::max(y.data[r], 1e-30);
        K().axpy(g.data[r] / denom, x0.row(r), dx.row(r),
                 static_cast<std::size_t>(x0.cols));
      }
      break;
    }
    case Op::kPairSqDist: {
      const Matrix& xv = x0;                 // [n,k]
      const Matrix& av = values_[p1];        // [b,k]
      Matrix& dx = grads_[p0];
      Matrix& da = grads_[p1];
      // dX = 2*(rowsum(g) .* X - g*A), dA = 2*(colsum(g) .* A - g^T*X)
      Matrix ga(xv.rows, xv.cols);
      K().matmul_nn(g.ptr(), av.ptr(), ga.ptr(), g.rows, g.cols, av.cols);
      for (int r = 0; r < xv.rows; ++r) {
        const double rs = K().sum(g.row(r), static_cast<std::size_t>(g.cols));
        for (int c = 0; c < xv.cols; ++c)
          dx.at(r, c) += 2.0 * (rs * xv.at(r, c) - ga.at(r, c));
      }
      Matrix gx(av.rows, av.cols);
      K().matmul_tn(g.ptr(), xv.ptr(), gx.ptr(), g.cols, g.rows, xv.cols);
      for (int r = 0; r < av.rows; ++r) {
        double cs = 0.0;
        for (int q = 0; q < g.rows; ++q) cs += g.at(q, r);
        for (int c = 0; c < av.cols; ++c)
          da.at(r, c) += 2.0 * (cs * av.at(r, c) - gx.at(r, c));
      }
      break;
    }
    case Op::kScaleRows: {
      const Matrix& vv = values_[p1];
      Matrix& dm = grads_[p0];
      Matrix& dv = grads_[p1];
      for (int r = 0; r < x0.rows; ++r) {
        K().axpy(vv.data[r], g.row(r), dm.row(r), static_cast<std::size_t>(x0.cols));
        dv.data[r] += K().dot(g.row(r), x0.row(r), static_cast<std::size_t>(x0.cols));
      }
      break;
    }
    case Op::kMulScalar: {
      const double s = values_[p1].data[0];
      K().axpy(s, g.ptr(), grads_[p0].ptr(), n0);
      grads_[p1].data[0] += K().dot(g.ptr(), x0.ptr(), n0);
      break;
    }
    case Op::kTakeCols: {
      Matrix& dm = grads_[p0];
      const std::vector<int>& idx = col_idx_[i];
      for (int r = 0; r < x0.rows; ++r) dm.at(r, idx[r]) += g.data[r];
      break;
    }
    case Op::kLeaf:
    case Op::kDetach:
      break;
  }
}

void Tape::clear() {
  values_.clear();
  grads_.clear();
  ops_.clear();
  parent0_.clear();
  parent1_.clear();
  aux_a_.clear();
  aux_b_.clear();
  col_idx_.clear();
}

std::vector<Matrix> finite_difference_grad(
    const std::function<double(const std::vector<Matrix>&)>& f,
    const std::vector<Matrix>& theta, double h) {
  std::vector<Matrix> grad;
  grad.reserve(theta.size());
  std::vector<Matrix> probe = theta;
  for (std::size_t t = 0; t < theta.size(); ++t) {
    Matrix g(theta[t].rows, theta[t].cols);
    for (std::size_t j = 0; j < theta[t].data.size(); ++j) {
      const double orig = probe[t].data[j];
      probe[t].data[j] = orig + h;
      const double fp = f(probe);
      probe[t].data[j] = orig - h;
      const double fm = f(probe);
      probe[t].data[j] = orig;
      g.data[j] = (fp - fm) / (2.0 * h);
    }
    grad.push_back(std::move(g));
  }
  return grad;
}

}  // namespace ecl::ad
