#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>

#include "ecl/analytic1d.hpp"
#include "ecl/simdata.hpp"

using namespace ecl;
using namespace ecl::sim;

TEST_CASE("gaussian shift matches the configured moments") {
  const int n = 400;
  auto samples = sample_gaussian_shift(n, 42);
  REQUIRE(samples.size() == 2 * n);
  const double bound = 3.0 * std::sqrt(5.0 / n);
  double sx[2] = {0, 0}, tx[2] = {0, 0};
  for (const LabeledSample& s : samples) {
    double* acc = s.domain == Domain::kSource ? sx : tx;
    acc[0] += s.x[0] / n;
    acc[1] += s.x[1] / n;
  }
  CHECK(std::fabs(sx[0]) < bound);
  CHECK(std::fabs(sx[1]) < bound);
  CHECK(std::fabs(tx[0] - 2.0) < bound);
  CHECK(std::fabs(tx[1] - 2.0) < bound);
}

TEST_CASE("generators are pure functions of (spec, seed)") {
  auto a = sample_gaussian_shift(50, 9);
  auto b = sample_gaussian_shift(50, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].label == b[i].label);
  }
  auto c = sample_gaussian_shift(50, 10);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_diff |= a[i].x != c[i].x;
  CHECK(any_diff);
}

TEST_CASE("uniform shift stays on its boxes") {
  const int n = 500;
  auto samples = sample_uniform_shift(n, 3);
  double mean[2] = {0, 0};
  for (const LabeledSample& s : samples) {
    if (s.domain == Domain::kSource) {
      CHECK(s.x[0] >= -2.5);
      CHECK(s.x[0] <= 2.5);
      CHECK(s.x[1] >= -2.5);
      CHECK(s.x[1] <= 2.5);
      mean[0] += s.x[0] / n;
      mean[1] += s.x[1] / n;
    } else {
      CHECK(s.x[0] >= -1.5);
      CHECK(s.x[0] <= 3.5);
      CHECK(s.x[1] >= -1.5);
      CHECK(s.x[1] <= 3.5);
    }
  }
  const double bound = 3.0 * (5.0 / std::sqrt(12.0)) / std::sqrt(n);
  CHECK(std::fabs(mean[0]) < bound);
  CHECK(std::fabs(mean[1]) < bound);
}

TEST_CASE("labels are consistent with the stored posterior") {
  auto samples = sample_gaussian_shift(50000, 17);
  // Group by posterior cell and compare label frequency to the cell mean.
  std::map<int, std::pair<double, std::pair<double, int>>> cells;
  for (const LabeledSample& s : samples) {
    const int cell = static_cast<int>(s.true_posterior[0] * 20);
    auto& [psum, freq] = cells[cell];
    psum += s.true_posterior[0];
    freq.first += s.label == 0 ? 1.0 : 0.0;
    freq.second += 1;
  }
  int checked = 0;
  for (auto& [cell, acc] : cells) {
    const int count = acc.second.second;
    if (count < 2000) continue;
    const double p = acc.first / count;
    const double f = acc.second.first / count;
    const double se = std::sqrt(std::max(p * (1 - p), 1e-6) / count);
    CHECK(std::fabs(f - p) < 4 * se);
    ++checked;
  }
  CHECK(checked >= 3);
}

TEST_CASE("posterior is a valid simplex point everywhere") {
  auto task = CovariateShiftTask::gaussian_shift(5);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x = {rng.normal(0, 3), rng.normal(0, 3)};
    auto p = task.posterior(x);
    CHECK(p[0] >= 0.0);
    CHECK(p[1] >= 0.0);
    CHECK(std::fabs(p[0] + p[1] - 1.0) < 1e-12);
  }
}

TEST_CASE("worked example: level-set posterior equals one half at s=0.75") {
  const AnalyticExample1D ex = AnalyticExample1D::symmetric();
  CHECK(std::fabs(level_set_posterior(0.75, Domain::kSource, ex) - 0.5) < 1e-9);
  CHECK(std::fabs(level_set_posterior(0.75, Domain::kTarget, ex) - 0.5) < 1e-9);
  CHECK(level_set_posterior(1.0, Domain::kSource, ex) == doctest::Approx(1.0));
  // closed form 1 - sqrt(1 - s) for the even posterior
  CHECK(level_set_posterior(0.99, Domain::kSource, ex) == doctest::Approx(0.9).epsilon(1e-9));
  CHECK_THROWS_AS((void)level_set_posterior(1.2, Domain::kSource, ex),
                  std::invalid_argument);
}

TEST_CASE("symmetric example satisfies the consistency condition everywhere") {
  const AnalyticExample1D ex = AnalyticExample1D::symmetric();
  for (int i = 1; i <= 1000; ++i) {
    const double s = 0.75 + 0.25 * i / 1000.0;
    const double gap = std::fabs(level_set_posterior(s, Domain::kSource, ex) -
                                 level_set_posterior(s, Domain::kTarget, ex));
    CHECK(gap < 1e-12);
  }
}

TEST_CASE("asymmetric control breaks the condition but not at the peak") {
  CHECK(asymmetric_example_oracle(1.0, Domain::kSource) == doctest::Approx(0.5));
  CHECK(asymmetric_example_oracle(1.0, Domain::kTarget) == doctest::Approx(0.5));
  const double gap = std::fabs(asymmetric_example_oracle(0.75, Domain::kSource) -
                               asymmetric_example_oracle(0.75, Domain::kTarget));
  CHECK(gap > 0.01);
  // population loss over the attainable window is bounded away from zero
  CHECK(population_ecl(AnalyticExample1D::asymmetric(), -1.0, 1.0, 20001) > 0.0);
  CHECK(population_ecl(AnalyticExample1D::symmetric(), -6.0, 6.0, 20001) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("level-set expectation matches a narrow-band quadrature oracle") {
  // Independent check of the conditional weights (incl. the Jacobian factor):
  // E[q | stat in (v - d, v + d)] computed by direct quadrature over x.
  const AnalyticExample1D ex = AnalyticExample1D::asymmetric();
  for (Statistic stat : {Statistic::kCanonical, Statistic::kTopLabel, Statistic::kClassWise2}) {
    const double v = stat == Statistic::kClassWise2 ? 0.2 : 0.86;
    const double band = 1e-4;
    for (Domain d : {Domain::kSource, Domain::kTarget}) {
      double num = 0.0, den = 0.0;
      const int nodes = 2000001;
      const double lo = -6.0, hi = 6.0, h = (hi - lo) / (nodes - 1);
      for (int i = 0; i < nodes; ++i) {
        const double x = lo + h * i;
        const double s1 = ex.score(x);
        double value, q;
        if (stat == Statistic::kCanonical) {
          value = s1;
          q = ex.posterior1(x);
        } else if (stat == Statistic::kClassWise2) {
          value = 1.0 - s1;
          q = 1.0 - ex.posterior1(x);
        } else {
          value = std::max(s1, 1.0 - s1);
          q = s1 >= 0.5 ? ex.posterior1(x) : 1.0 - ex.posterior1(x);
        }
        if (std::fabs(value - v) > band) continue;
        const double w = ex.density(x, d);
        num += w * q;
        den += w;
      }
      REQUIRE(den > 0.0);
      const double expected = level_set_expectation(ex, stat, v, d);
      CHECK(num / den == doctest::Approx(expected).epsilon(2e-3));
    }
  }
}
