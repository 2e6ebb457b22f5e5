#include <doctest.h>

#include <cmath>
#include <random>

#include "ecl/minibatch.hpp"

using namespace ecl;
using namespace ecl::loss;
using ad::NodeRef;
using ad::Tape;

namespace {

Matrix random_unit(int n, int k, std::mt19937_64& gen, double lo = 0.1, double hi = 0.9) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(n, k);
  for (double& v : m.data) v = d(gen);
  return m;
}

}  // namespace

TEST_CASE("ledger starts at zero and EMA-moves toward the proximal output") {
  BinLedger led = BinLedger::init(4, 1, 0.25, 3);
  for (double v : led.u_s.data) CHECK(v == 0.0);
  for (double v : led.u_t.data) CHECK(v == 0.0);

  AnchorGrid g = AnchorGrid::scalar_grid(Paradigm::kTopLabel, 4);
  std::mt19937_64 gen(3);
  Matrix stat = random_unit(60, 1, gen);
  Matrix p = random_unit(60, 1, gen);
  Tape t;
  MinibatchStep step =
      ecl_minibatch_step(t, t.leaf(stat), t.leaf(stat), t.leaf(p), t.leaf(p), g, led);
  REQUIRE_FALSE(step.skipped);
  // after one step the cache is alpha * prox-output
  double moved = 0;
  for (double v : led.u_s.data) moved += std::fabs(v);
  CHECK(moved > 0.0);
  for (double v : led.u_s.data) CHECK(std::fabs(v) < 1.0);  // 0.25 * something in [0,1]
}

TEST_CASE("loss vanishes when every observation sits on its bin mean") {
  // All p identical: the proximal minimizer converges to that value and the
  // quadratic terms collapse.
  AnchorGrid g = AnchorGrid::scalar_grid(Paradigm::kTopLabel, 5);
  BinLedger led = BinLedger::init(5, 1, 0.1, 25);
  std::mt19937_64 gen(5);
  Matrix stat = random_unit(50, 1, gen);
  Matrix p = Matrix::full(50, 1, 0.42);
  Tape t;
  NodeRef sn = t.leaf(stat), pn = t.leaf(p);
  MinibatchStep step = ecl_minibatch_step(t, sn, sn, pn, pn, g, led);
  // The shrink coupling offsets each u~ from the common value by
  // w_j/(2 n_j); the loss floor is sum over bins and domains of n * tau^2.
  const Matrix& om = t.value(t.row_softmax(
      t.affine(t.pair_sqdist(sn, t.leaf(g.anchors)), -1.0 / g.tau, 0.0)));
  std::vector<double> counts(g.bins(), 0.0);
  for (int i = 0; i < om.rows; ++i)
    for (int j = 0; j < g.bins(); ++j) counts[j] += om.at(i, j);
  double total = 0;
  for (double c : counts) total += c;
  double floor = 0;
  for (int j = 0; j < g.bins(); ++j) {
    if (counts[j] <= 0) continue;
    const double w = counts[j] / total;
    floor += 2.0 * counts[j] * (w / (2.0 * counts[j])) * (w / (2.0 * counts[j]));
  }
  CHECK(t.value(step.loss).data[0] < 2.0 * floor + 1e-6);
}

TEST_CASE("recomputed bin weights follow the target batch") {
  AnchorGrid g = AnchorGrid::scalar_grid(Paradigm::kTopLabel, 3);
  BinLedger led = BinLedger::init(3, 1, 0.1, 3);
  std::mt19937_64 gen(7);
  Matrix stat_s = random_unit(30, 1, gen);
  Matrix stat_t = random_unit(30, 1, gen, 0.6, 0.95);  // mass in the top bin
  Matrix p = random_unit(30, 1, gen);
  Tape t;
  MinibatchStep step = ecl_minibatch_step(t, t.leaf(stat_s), t.leaf(stat_t), t.leaf(p),
                                          t.leaf(p), g, led);
  REQUIRE(step.bin_weights.size() == 3);
  double sum = 0;
  for (double w : step.bin_weights) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(step.bin_weights[2] > step.bin_weights[0]);
}

TEST_CASE("empty batches are skipped") {
  AnchorGrid g = AnchorGrid::scalar_grid(Paradigm::kTopLabel, 3);
  BinLedger led = BinLedger::init(3, 1, 0.1, 3);
  Tape t;
  NodeRef empty = t.leaf(Matrix(0, 1));
  NodeRef p = t.leaf(Matrix(0, 1));
  MinibatchStep step = ecl_minibatch_step(t, empty, empty, p, p, g, led);
  CHECK(step.skipped);
}

TEST_CASE("gradient flows through assignments and observations") {
  AnchorGrid g = AnchorGrid::scalar_grid(Paradigm::kTopLabel, 4);
  std::mt19937_64 gen(11);
  Matrix stat_s = random_unit(10, 1, gen);
  Matrix stat_t = random_unit(10, 1, gen);
  Matrix p_s = random_unit(10, 1, gen);
  Matrix p_t = random_unit(10, 1, gen);

  // The detached proximal outputs are constants of the loss node: freeze the
  // ones from the base point and differentiate the explicit expression.
  BinLedger led = BinLedger::init(4, 1, 0.1, 3);
  Tape t;
  NodeRef a = t.leaf(stat_s), b = t.leaf(stat_t), c = t.leaf(p_s), d = t.leaf(p_t);
  MinibatchStep step = ecl_minibatch_step(t, a, b, c, d, g, led);
  t.backward(step.loss);
  const Matrix us = step.u_tilde_s, ut = step.u_tilde_t;

  auto f = [&](const std::vector<Matrix>& in) {
    Tape tt;
    NodeRef os = soft_assign(tt, tt.leaf(in[0]), g);
    NodeRef ot = soft_assign(tt, tt.leaf(in[1]), g);
    NodeRef ls = tt.sum(tt.mul(os, tt.pair_sqdist(tt.leaf(in[2]), tt.leaf(us))));
    NodeRef lt = tt.sum(tt.mul(ot, tt.pair_sqdist(tt.leaf(in[3]), tt.leaf(ut))));
    return tt.value(tt.add(ls, lt)).data[0];
  };
  auto fd = ad::finite_difference_grad(f, {stat_s, stat_t, p_s, p_t}, 1e-6);

  auto rel = [&](const Matrix& got, const Matrix& want) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < got.data.size(); ++i) {
      num += (got.data[i] - want.data[i]) * (got.data[i] - want.data[i]);
      den += want.data[i] * want.data[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
  };
  CHECK(rel(t.grad(a), fd[0]) < 1e-4);
  CHECK(rel(t.grad(b), fd[1]) < 1e-4);
  CHECK(rel(t.grad(c), fd[2]) < 1e-4);
  CHECK(rel(t.grad(d), fd[3]) < 1e-4);
}

TEST_CASE("identical full batches with converged ledger give a symmetric step") {
  AnchorGrid g = AnchorGrid::scalar_grid(Paradigm::kTopLabel, 5);
  std::mt19937_64 gen(13);
  Matrix stat = random_unit(80, 1, gen);
  Matrix p = random_unit(80, 1, gen);
  BinLedger led = BinLedger::init(5, 1, 1.0, 10);  // alpha 1: cache = prox output
  Tape t;
  NodeRef sn = t.leaf(stat), pn = t.leaf(p);
  MinibatchStep step = ecl_minibatch_step(t, sn, sn, pn, pn, g, led);
  t.backward(step.loss);
  // identical domains: ledger halves agree and the loss splits evenly
  for (int j = 0; j < 5; ++j)
    CHECK(led.u_s.data[j] == doctest::Approx(led.u_t.data[j]).epsilon(1e-9));
}
