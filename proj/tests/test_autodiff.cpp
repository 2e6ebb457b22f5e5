#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <random>

#include "ecl/tape.hpp"

using namespace ecl;
using ad::NodeRef;
using ad::Tape;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data) v = d(gen);
  return m;
}

double rel_err(const Matrix& got, const Matrix& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.data.size(); ++i) {
    num += (got.data[i] - want.data[i]) * (got.data[i] - want.data[i]);
    den += want.data[i] * want.data[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace

TEST_CASE("softmax of symmetric logits is uniform") {
  Tape t;
  NodeRef x = t.leaf(Matrix(1, 2, {0.0, 0.0}));
  const Matrix& s = t.value(t.row_softmax(x));
  CHECK(s.data[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.data[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("log inverts exp") {
  Tape t;
  NodeRef x = t.leaf(Matrix::scalar(1.0));
  const Matrix& y = t.value(t.log(t.exp(x)));
  CHECK(std::fabs(y.data[0] - 1.0) < 1e-12);
}

TEST_CASE("detach keeps the value and blocks the gradient") {
  Tape t;
  NodeRef x = t.leaf(Matrix(1, 3, {1.0, -2.0, 0.5}));
  NodeRef d = t.detach(x);
  CHECK(t.value(d).data == t.value(x).data);
  NodeRef root = t.sum(t.mul(d, d));
  t.backward(root);
  for (double g : t.grad(x).data) CHECK(g == 0.0);
}

TEST_CASE("backward of sum is all ones; of sumsq is 2x") {
  Tape t;
  NodeRef x = t.leaf(Matrix(2, 2, {1.0, 2.0, 3.0, 4.0}));
  t.backward(t.sum(x));
  for (double g : t.grad(x).data) CHECK(g == 1.0);

  Tape t2;
  NodeRef v = t2.leaf(Matrix(1, 2, {3.0, 4.0}));
  t2.backward(t2.sumsq(v));
  CHECK(t2.grad(v).data[0] == doctest::Approx(6.0));
  CHECK(t2.grad(v).data[1] == doctest::Approx(8.0));
}

TEST_CASE("finite differences: quadratic, constant, and mlp self-consistency") {
  auto square = [](const std::vector<Matrix>& p) { return p[0].data[0] * p[0].data[0]; };
  auto g = ad::finite_difference_grad(square, {Matrix::scalar(3.0)}, 1e-4);
  CHECK(std::fabs(g[0].data[0] - 6.0) < 1e-7);

  auto constant = [](const std::vector<Matrix>&) { return 42.0; };
  g = ad::finite_difference_grad(constant, {Matrix(2, 2)}, 1e-4);
  for (double v : g[0].data) CHECK(std::fabs(v) < 1e-9);

  // 2-class single-layer net: cross-entropy on one sample vs backward().
  std::mt19937_64 gen(5);
  const Matrix x = random_matrix(1, 3, gen);
  const Matrix w = random_matrix(3, 2, gen);
  const Matrix y(1, 2, {1.0, 0.0});
  auto ce = [&](const std::vector<Matrix>& p) {
    Tape t;
    NodeRef s = t.row_softmax(t.matmul(t.leaf(x), t.leaf(p[0])));
    return -t.value(t.sum(t.mul(t.log(s), t.leaf(y)))).data[0];
  };
  auto fd = ad::finite_difference_grad(ce, {w}, 1e-4);
  Tape t;
  NodeRef wn = t.leaf(w);
  NodeRef s = t.row_softmax(t.matmul(t.leaf(x), wn));
  NodeRef loss = t.affine(t.sum(t.mul(t.log(s), t.leaf(y))), -1.0, 0.0);
  t.backward(loss);
  CHECK(rel_err(t.grad(wn), fd[0]) < 1e-5);
}

TEST_CASE("every op matches central finite differences on random shapes") {
  std::mt19937_64 gen(7);
  using Build = std::function<NodeRef(Tape&, NodeRef, NodeRef)>;
  struct Spec {
    const char* name;
    int arity;
    double lo, hi;
    Build build;
  };
  const Spec specs[] = {
      {"add", 2, -2, 2, [](Tape& t, NodeRef a, NodeRef b) { return t.add(a, b); }},
      {"sub", 2, -2, 2, [](Tape& t, NodeRef a, NodeRef b) { return t.sub(a, b); }},
      {"mul", 2, -2, 2, [](Tape& t, NodeRef a, NodeRef b) { return t.mul(a, b); }},
      {"div", 2, 0.5, 2.5, [](Tape& t, NodeRef a, NodeRef b) { return t.div(a, b); }},
      {"matmul", 2, -1, 1, [](Tape& t, NodeRef a, NodeRef b) { return t.matmul(a, t.transpose(b)); }},
      {"transpose", 1, -2, 2, [](Tape& t, NodeRef a, NodeRef) { return t.transpose(a); }},
      {"affine", 1, -2, 2, [](Tape& t, NodeRef a, NodeRef) { return t.affine(a, 1.7, -0.4); }},
      {"relu", 1, 0.1, 2, [](Tape& t, NodeRef a, NodeRef) { return t.relu(a); }},
      {"tanh", 1, -2, 2, [](Tape& t, NodeRef a, NodeRef) { return t.tanh(a); }},
      {"sigmoid", 1, -2, 2, [](Tape& t, NodeRef a, NodeRef) { return t.sigmoid(a); }},
      {"exp", 1, -1, 1, [](Tape& t, NodeRef a, NodeRef) { return t.exp(a); }},
      {"log", 1, 0.2, 3, [](Tape& t, NodeRef a, NodeRef) { return t.log(a); }},
      {"row_softmax", 1, -2, 2, [](Tape& t, NodeRef a, NodeRef) { return t.row_softmax(a); }},
      {"mean", 1, -2, 2, [](Tape& t, NodeRef a, NodeRef) { return t.mean(a); }},
      {"pow_const", 1, 0.3, 2, [](Tape& t, NodeRef a, NodeRef) { return t.pow_const(a, 1.7); }},
      {"abs", 1, 0.2, 2, [](Tape& t, NodeRef a, NodeRef) { return t.abs(a); }},
      {"norm", 1, 0.3, 2, [](Tape& t, NodeRef a, NodeRef) { return t.norm(a); }},
      {"row_norm", 1, 0.3, 2, [](Tape& t, NodeRef a, NodeRef) { return t.row_norm(a); }},
      {"pair_sqdist", 2, -1, 1,
       [](Tape& t, NodeRef a, NodeRef b) { return t.pair_sqdist(a, b); }},
      {"scale_rows", 1, 0.3, 2,
       [](Tape& t, NodeRef a, NodeRef) {
         Matrix v(t.value(a).rows, 1);
         for (int i = 0; i < v.rows; ++i) v.data[i] = 0.5 + 0.1 * i;
         return t.scale_rows(a, t.leaf(v));
       }},
      {"mul_scalar", 1, -2, 2,
       [](Tape& t, NodeRef a, NodeRef) { return t.mul_scalar(a, t.scalar(1.3)); }},
      {"take_cols", 1, -2, 2,
       [](Tape& t, NodeRef a, NodeRef) {
         std::vector<int> idx(t.value(a).rows);
         for (std::size_t i = 0; i < idx.size(); ++i)
           idx[i] = static_cast<int>(i) % t.value(a).cols;
         return t.take_cols(a, idx);
       }},
      {"bias_add_row", 2, -2, 2,
       [](Tape& t, NodeRef a, NodeRef b) {
         // b gets reshaped to a row vector by the caller
         return t.bias_add_row(a, b);
       }},
      {"sumsq", 1, -2, 2, [](Tape& t, NodeRef a, NodeRef) { return t.sumsq(a); }},
  };

  std::uniform_int_distribution<int> dim(1, 5);
  int checked = 0;
  for (const Spec& spec : specs) {
    const int trials = 100 / static_cast<int>(std::size(specs)) + 2;
    for (int trial = 0; trial < trials; ++trial) {
      const int r = dim(gen), c = dim(gen);
      Matrix a = random_matrix(r, c, gen, spec.lo, spec.hi);
      Matrix b = std::string(spec.name) == "bias_add_row"
                     ? random_matrix(1, c, gen, spec.lo, spec.hi)
                     : random_matrix(r, c, gen, spec.lo, spec.hi);

      // Scalarize through fixed non-uniform weights so ops with constant
      // row sums (softmax) still expose their Jacobian.
      auto weigh = [](Tape& t, NodeRef out) {
        const Matrix& o = t.value(out);
        Matrix w(o.rows, o.cols);
        for (std::size_t i = 0; i < w.data.size(); ++i)
          w.data[i] = 0.4 + 0.13 * static_cast<double>(i % 7);
        return t.sum(t.mul(out, t.leaf(w)));
      };
      auto scalarized = [&](const std::vector<Matrix>& p) {
        Tape t;
        NodeRef an = t.leaf(p[0]);
        NodeRef bn = t.leaf(p[1]);
        return t.value(weigh(t, spec.build(t, an, bn))).data[0];
      };
      auto fd = ad::finite_difference_grad(scalarized, {a, b}, 1e-4);

      Tape t;
      NodeRef an = t.leaf(a);
      NodeRef bn = t.leaf(b);
      t.backward(weigh(t, spec.build(t, an, bn)));
      INFO("op ", std::string(spec.name), " r=", r, " c=", c);
      CHECK(rel_err(t.grad(an), fd[0]) < 1e-5);
      if (spec.arity == 2) CHECK(rel_err(t.grad(bn), fd[1]) < 1e-5);
      ++checked;
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("random five-node graph matches finite differences") {
  std::mt19937_64 gen(11);
  const Matrix a0 = random_matrix(3, 3, gen, 0.3, 1.5);
  auto f = [](const std::vector<Matrix>& p) {
    Tape t;
    NodeRef x = t.leaf(p[0]);
    NodeRef y = t.mul(t.tanh(x), t.exp(t.affine(x, 0.3, 0.0)));
    NodeRef z = t.matmul(y, t.transpose(x));
    return t.value(t.norm(z)).data[0];
  };
  auto fd = ad::finite_difference_grad(f, {a0}, 1e-4);
  Tape t;
  NodeRef x = t.leaf(a0);
  NodeRef y = t.mul(t.tanh(x), t.exp(t.affine(x, 0.3, 0.0)));
  NodeRef z = t.matmul(y, t.transpose(x));
  t.backward(t.norm(z));
  CHECK(rel_err(t.grad(x), fd[0]) < 1e-5);
}

TEST_CASE("backward is deterministic bit for bit") {
  std::mt19937_64 gen(13);
  const Matrix a = random_matrix(4, 4, gen);
  auto run = [&]() {
    Tape t;
    NodeRef x = t.leaf(a);
    NodeRef y = t.row_softmax(t.matmul(x, t.transpose(x)));
    t.backward(t.sumsq(y));
    return t.grad(x).data;
  };
  CHECK(run() == run());
}

TEST_CASE("hard errors: shapes, non-scalar root, non-finite values") {
  Tape t;
  NodeRef a = t.leaf(Matrix(2, 3));
  NodeRef b = t.leaf(Matrix(3, 2));
  CHECK_THROWS_AS((void)t.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(t.backward(a), std::invalid_argument);

  NodeRef zero = t.leaf(Matrix(1, 1, {0.0}));
  NodeRef one = t.leaf(Matrix(1, 1, {1.0}));
  CHECK_THROWS_WITH_AS((void)t.div(one, zero), doctest::Contains("div"),
                       std::runtime_error);
}
