#pragma once

#include <cstdint>
#include <vector>

#include "ecl/simdata.hpp"

namespace ecl::sim {

// Binary 1-D instance with closed-form score map and posterior:
//   score      S1(x)    = 1 - 0.25 x^2
//   posterior  P(Y1|x)  = 1 - 0.5|x|   (symmetric)  or  logistic(x) (control)
//   densities  N(-0.5, 1) source, N(+0.5, 1) target
// The symmetric posterior is even in x, so conditioning on any score level
// set gives identical posterior expectations in both domains; the logistic
// control breaks that symmetry.
struct AnalyticExample1D {
  enum class PosteriorKind { kSymmetric, kLogistic };

  PosteriorKind posterior_kind = PosteriorKind::kSymmetric;
  double source_mean = -0.5;
  double target_mean = 0.5;

  double score(double x) const { return 1.0 - 0.25 * x * x; }
  double posterior1(double x) const;
  double density(double x, Domain d) const;

  static AnalyticExample1D symmetric() { return {}; }
  static AnalyticExample1D asymmetric() {
    AnalyticExample1D e;
    e.posterior_kind = PosteriorKind::kLogistic;
    return e;
  }
};

// Statistic whose level sets the consistency condition conditions on.
enum class Statistic {
  kCanonical,   // the full score S1 (K=2: determines the vector)
  kTopLabel,    // max(S1, 1-S1) with the matching correctness posterior
  kClassWise1,  // coordinate S1
  kClassWise2,  // coordinate S2 = 1-S1
};

// One preimage point of a statistic value with the conditioned quantity.
struct LevelPoint {
  double x;
  double quantity;  // posterior of the event the statistic calibrates
};

std::vector<LevelPoint> level_set(const AnalyticExample1D& ex, Statistic stat, double value);

// E_d[quantity | statistic = value], weights proportional to density over the
// level set (with the change-of-variables Jacobian, which cancels for the
// two-point sets). Throws when value is not an attainable valid score.
double level_set_expectation(const AnalyticExample1D& ex, Statistic stat,
                             double value, Domain d);

// Spec'd canonical-oracle entry points.
double level_set_posterior(double s1, Domain d, const AnalyticExample1D& ex);
double asymmetric_example_oracle(double s1, Domain d);

// Population ECL for the canonical statistic by composite trapezoid over
// x in [x_lo, x_hi]: integral of p_t(x) * |E_s - E_t| at s = score(x).
double population_ecl(const AnalyticExample1D& ex, double x_lo, double x_hi,
                      int nodes = 100000);

// Population value of the B-bin hard estimator: per-bin conditional means by
// quadrature, target-mass weights, fixed equal-width score bins on
// [score(x_hi), 1]. This is what the sample estimator converges to.
struct BinnedPopulationEcl {
  double value = 0.0;
  double s_lo = 0.0;
  double s_hi = 1.0;
  std::vector<double> target_mass;  // normalized w_j
  std::vector<double> mean_source;
  std::vector<double> mean_target;
};

BinnedPopulationEcl binned_population_ecl(const AnalyticExample1D& ex, int bins,
                                          double x_lo, double x_hi,
                                          int nodes = 100000);

// Score/observation draws for Monte Carlo estimation of the canonical ECL:
// x ~ domain density, s = score(x), observation = Bernoulli(posterior1(x)).
struct ScoredDraw {
  double score;
  double observation;
};

std::vector<ScoredDraw> draw_scored(const AnalyticExample1D& ex, Domain d, int n, Rng& rng);

}  // namespace ecl::sim
