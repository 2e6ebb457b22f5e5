#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ecl/model.hpp"
#include "ecl/losses.hpp"

using namespace ecl;
using namespace ecl::model;

namespace {

MlpParameters fresh(int d = 2, int h = 8, int k = 2,
                    Paradigm p = Paradigm::kCanonical, std::uint64_t seed = 1) {
  Rng rng(seed);
  return MlpParameters::init(d, h, k, p, rng);
}

Matrix random_batch(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  for (double& v : x.data) v = rng.normal();
  return x;
}

bool bit_identical(const Matrix& a, const Matrix& b) { return a.data == b.data; }

}  // namespace

TEST_CASE("zeroed scoring layer gives uniform confidence") {
  MlpParameters p = fresh(2, 8, 3);
  p.w3 = Matrix::zeros(8, 3);
  p.b3 = Matrix::zeros(1, 3);
  EvalOut out = eval_classifier(p, random_batch(5, 2, 2));
  for (int i = 0; i < 5; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(out.scores.at(i, c) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("scores are strictly positive rows summing to one") {
  MlpParameters p = fresh(3, 16, 4, Paradigm::kCanonical, 7);
  EvalOut out = eval_classifier(p, random_batch(20, 3, 8));
  for (int i = 0; i < out.scores.rows; ++i) {
    double sum = 0;
    for (int c = 0; c < out.scores.cols; ++c) {
      CHECK(out.scores.at(i, c) > 0.0);
      sum += out.scores.at(i, c);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("predicted class and confidence from a hand example") {
  Matrix s(1, 3, {0.2, 0.7, 0.1});
  CHECK(argmax_row(s, 0) == 1);
  CHECK(s.at(0, argmax_row(s, 0)) == 0.7);
}

TEST_CASE("aux head with zero weights is maximally uncertain") {
  MlpParameters p = fresh(2, 8, 2, Paradigm::kCanonical);
  p.wa = Matrix::zeros(8, 2);
  p.ba = Matrix::zeros(1, 2);
  EvalOut out = eval_classifier(p, random_batch(4, 2, 3));
  Matrix aux = eval_aux_head(p, out.features);
  for (double v : aux.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

  MlpParameters q = fresh(2, 8, 2, Paradigm::kTopLabel);
  q.wa = Matrix::zeros(8, 1);
  q.ba = Matrix::zeros(1, 1);
  EvalOut out2 = eval_classifier(q, random_batch(4, 2, 3));
  Matrix aux2 = eval_aux_head(q, out2.features);
  for (double v : aux2.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  MlpParameters p = fresh();
  const Matrix before = p.w1;
  AdamState opt = AdamState::init(p.all(), 1e-3);
  std::vector<Matrix> zero_grads;
  for (Matrix* m : p.all()) zero_grads.push_back(Matrix::zeros(m->rows, m->cols));
  opt.step(p.all(), zero_grads);
  CHECK(bit_identical(p.w1, before));
}

TEST_CASE("adam: first step from zeroed state moves by about the learning rate") {
  Matrix x = Matrix::scalar(1.0);
  AdamState opt = AdamState::init({&x}, 1e-3);
  opt.step({&x}, {Matrix::scalar(1.0)});
  CHECK(x.data[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
}

TEST_CASE("adam: constant gradient descends against its sign") {
  Matrix x = Matrix::scalar(0.0);
  AdamState opt = AdamState::init({&x}, 1e-2);
  for (int i = 0; i < 50; ++i) opt.step({&x}, {Matrix::scalar(2.5)});
  CHECK(x.data[0] < -0.1);
  Matrix y = Matrix::scalar(0.0);
  AdamState opt2 = AdamState::init({&y}, 1e-2);
  for (int i = 0; i < 50; ++i) opt2.step({&y}, {Matrix::scalar(-2.5)});
  CHECK(y.data[0] > 0.1);
}

TEST_CASE("adam rejects mismatched gradients") {
  MlpParameters p = fresh();
  AdamState opt = AdamState::init(p.all(), 1e-3);
  std::vector<Matrix> bad(p.all().size(), Matrix::zeros(1, 1));
  CHECK_THROWS_AS(opt.step(p.all(), bad), std::invalid_argument);
}

TEST_CASE("training separates a linearly separable toy set") {
  const int n = 120;
  Matrix x(n, 2);
  std::vector<int> y(n);
  Rng rng(4);
  for (int i = 0; i < n; ++i) {
    const int cls = i % 2;
    x.at(i, 0) = rng.normal(cls == 0 ? -2.0 : 2.0, 0.4);
    x.at(i, 1) = rng.normal(cls == 0 ? -2.0 : 2.0, 0.4);
    y[i] = cls;
  }
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 40;
  cfg.seed = 11;
  MlpParameters p = train_source_classifier(x, y, 2, 16, Paradigm::kTopLabel, cfg);
  EvalOut out = eval_classifier(p, x);
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += argmax_row(out.scores, i) == y[i];
  CHECK(static_cast<double>(hits) / n >= 0.99);
}

TEST_CASE("training is deterministic in the seed") {
  Matrix x = random_batch(60, 2, 5);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) y[i] = x.at(i, 0) > 0 ? 1 : 0;
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 20;
  cfg.seed = 21;
  MlpParameters a = train_source_classifier(x, y, 2, 8, Paradigm::kCanonical, cfg);
  MlpParameters b = train_source_classifier(x, y, 2, 8, Paradigm::kCanonical, cfg);
  auto ta = a.all();
  auto tb = b.all();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(bit_identical(*ta[i], *tb[i]));
}

TEST_CASE("head-only training freezes the backbone bit for bit") {
  Matrix x = random_batch(50, 2, 6);
  std::vector<int> y(50);
  for (int i = 0; i < 50; ++i) y[i] = x.at(i, 1) > 0 ? 1 : 0;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 25;
  cfg.seed = 31;
  MlpParameters p = train_source_classifier(x, y, 2, 8, Paradigm::kCanonical, cfg);
  const Matrix w1 = p.w1, b1 = p.b1, w2 = p.w2, b2 = p.b2, w3 = p.w3, b3 = p.b3;
  model::TrainLog log;
  MlpParameters q = calibrate_aux_head(p, x, y, cfg, 15, &log);
  CHECK(bit_identical(q.w1, w1));
  CHECK(bit_identical(q.b1, b1));
  CHECK(bit_identical(q.w2, w2));
  CHECK(bit_identical(q.b2, b2));
  CHECK(bit_identical(q.w3, w3));
  CHECK(bit_identical(q.b3, b3));
  CHECK_FALSE(bit_identical(q.wa, p.wa));
}

TEST_CASE("head calibration drives the soft ECE down") {
  Matrix x = random_batch(200, 2, 8);
  std::vector<int> y(200);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const double p1 = 1.0 / (1.0 + std::exp(-2.0 * x.at(i, 0)));
    y[i] = rng.uniform() < p1 ? 0 : 1;
  }
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 50;
  cfg.seed = 41;
  MlpParameters p = train_source_classifier(x, y, 2, 8, Paradigm::kCanonical, cfg);
  model::TrainLog log;
  calibrate_aux_head(p, x, y, cfg, 15, &log);
  REQUIRE(log.epoch_loss.size() >= 10);
  int non_increasing = 0;
  for (std::size_t e = 1; e < log.epoch_loss.size(); ++e)
    non_increasing += log.epoch_loss[e] <= log.epoch_loss[e - 1] + 5e-4;
  CHECK(static_cast<double>(non_increasing) / (log.epoch_loss.size() - 1) >= 0.8);
  CHECK(log.epoch_loss.back() <= log.epoch_loss.front());
}

TEST_CASE("aux head settles near one half where classes overlap equally") {
  // Labels independent of x: the true posterior is (0.5, 0.5) everywhere.
  Matrix x = random_batch(300, 2, 9);
  std::vector<int> y(300);
  Rng rng(9);
  for (int i = 0; i < 300; ++i) y[i] = rng.uniform() < 0.5 ? 0 : 1;
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 50;
  cfg.seed = 51;
  MlpParameters p = train_source_classifier(x, y, 2, 8, Paradigm::kCanonical, cfg);
  MlpParameters q = calibrate_aux_head(p, x, y, cfg, 15);
  Matrix aux = eval_aux_head(q, eval_classifier(q, x).features);
  double mean = 0;
  for (int i = 0; i < aux.rows; ++i) mean += aux.at(i, 0) / aux.rows;
  CHECK(std::fabs(mean - 0.5) < 0.1);
}

TEST_CASE("training aborts on divergence") {
  Matrix x(4, 2, {1e308, 1e308, -1e308, 1e308, 1e308, -1e308, 0.0, 0.0});
  std::vector<int> y = {0, 1, 0, 1};
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 1;
  CHECK_THROWS_AS(
      (void)train_source_classifier(x, y, 2, 4, Paradigm::kCanonical, cfg),
      std::runtime_error);
}
