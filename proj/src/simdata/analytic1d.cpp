#include "ecl/analytic1d.hpp"

#include <cmath>
#include <stdexcept>

namespace ecl::sim {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_pdf(double x, double mean) {
  const double t = x - mean;
  return kInvSqrt2Pi * std::exp(-0.5 * t * t);
}
}  // namespace

double AnalyticExample1D::posterior1(double x) const {
  if (posterior_kind == PosteriorKind::kSymmetric) {
    const double p = 1.0 - 0.5 * std::fabs(x);
    return p < 0.0 ? 0.0 : p;
  }
  return 1.0 / (1.0 + std::exp(-x));
}

double AnalyticExample1D::density(double x, Domain d) const {
  return normal_pdf(x, d == Domain::kSource ? source_mean : target_mean);
}

std::vector<LevelPoint> level_set(const AnalyticExample1D& ex, Statistic stat,
                                  double value) {
  auto s1_points = [&](double s1) {
    // score(x) = s1  <=>  x = +-2*sqrt(1-s1)
    const double a = 2.0 * std::sqrt(std::max(0.0, 1.0 - s1));
    return a == 0.0 ? std::vector<double>{0.0} : std::vector<double>{-a, a};
  };

  std::vector<LevelPoint> pts;
  switch (stat) {
    case Statistic::kCanonical:
    case Statistic::kClassWise1:
      if (value > 1.0)
        throw std::invalid_argument("level_set: score above the attainable maximum");
      for (double x : s1_points(value)) pts.push_back({x, ex.posterior1(x)});
      break;
    case Statistic::kClassWise2:
      // S2 = value <=> S1 = 1-value; the conditioned event is Y2 = 1.
      if (1.0 - value > 1.0)
        throw std::invalid_argument("level_set: score above the attainable maximum");
      for (double x : s1_points(1.0 - value)) pts.push_back({x, 1.0 - ex.posterior1(x)});
      break;
    case Statistic::kTopLabel: {
      if (value < 0.5 || value > 1.0)
        throw std::invalid_argument("level_set: top-label score outside [0.5,1]");
      // Predicted class 1 where S1 >= 0.5 (|x| <= sqrt(2)), class 2 outside.
      for (double x : s1_points(value)) pts.push_back({x, ex.posterior1(x)});
      for (double x : s1_points(1.0 - value)) {
        if (std::fabs(x) * std::fabs(x) < 2.0) continue;  // class-1 region; wrong branch
        pts.push_back({x, 1.0 - ex.posterior1(x)});
      }
      break;
    }
  }
  return pts;
}

double level_set_expectation(const AnalyticExample1D& ex, Statistic stat,
                             double value, Domain d) {
  const std::vector<LevelPoint> pts = level_set(ex, stat, value);
  // Weight p_d(x)/|d stat/dx|; the Jacobian |x|/2 is shared within a +-x pair
  // but differs between the top-label branches. At the fold point x = 0 the
  // Jacobian vanishes and the score density diverges, so that preimage
  // carries all the conditional mass.
  double num = 0.0;
  double den = 0.0;
  for (const LevelPoint& p : pts) {
    if (p.x == 0.0) return p.quantity;
    const double w = ex.density(p.x, d) / (0.5 * std::fabs(p.x));
    num += w * p.quantity;
    den += w;
  }
  return num / den;
}

double level_set_posterior(double s1, Domain d, const AnalyticExample1D& ex) {
  // Valid probability scores only: s1 in [0,1] <=> |x| <= 2.
  if (s1 < 0.0 || s1 > 1.0)
    throw std::invalid_argument("level_set_posterior: score outside attainable range [0,1]");
  return level_set_expectation(ex, Statistic::kCanonical, s1, d);
}

double asymmetric_example_oracle(double s1, Domain d) {
  return level_set_posterior(s1, d, AnalyticExample1D::asymmetric());
}

double population_ecl(const AnalyticExample1D& ex, double x_lo, double x_hi, int nodes) {
  const double h = (x_hi - x_lo) / (nodes - 1);
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double x = x_lo + h * i;
    const double s = ex.score(x);
    const double gap = std::fabs(level_set_expectation(ex, Statistic::kCanonical, s,
                                                       Domain::kSource) -
                                 level_set_expectation(ex, Statistic::kCanonical, s,
                                                       Domain::kTarget));
    const double f = ex.density(x, Domain::kTarget) * gap;
    acc += (i == 0 || i == nodes - 1) ? 0.5 * f : f;
  }
  return acc * h;
}

BinnedPopulationEcl binned_population_ecl(const AnalyticExample1D& ex, int bins,
                                          double x_lo, double x_hi, int nodes) {
  BinnedPopulationEcl out;
  const double abs_hi = std::max(std::fabs(x_lo), std::fabs(x_hi));
  out.s_lo = ex.score(abs_hi);
  out.s_hi = 1.0;
  out.target_mass.assign(bins, 0.0);
  out.mean_source.assign(bins, 0.0);
  out.mean_target.assign(bins, 0.0);

  std::vector<double> mass_s(bins, 0.0), mass_t(bins, 0.0);
  std::vector<double> num_s(bins, 0.0), num_t(bins, 0.0);
  const double h = (x_hi - x_lo) / (nodes - 1);
  const double width = (out.s_hi - out.s_lo) / bins;
  for (int i = 0; i < nodes; ++i) {
    const double x = x_lo + h * i;
    const double s = ex.score(x);
    int j = static_cast<int>((s - out.s_lo) / width);
    j = std::max(0, std::min(bins - 1, j));
    const double trap = (i == 0 || i == nodes - 1) ? 0.5 * h : h;
    const double q = ex.posterior1(x);
    const double ws = trap * ex.density(x, Domain::kSource);
    const double wt = trap * ex.density(x, Domain::kTarget);
    mass_s[j] += ws;
    mass_t[j] += wt;
    num_s[j] += ws * q;
    num_t[j] += wt * q;
  }

  double total_t = 0.0;
  for (int j = 0; j < bins; ++j) total_t += mass_t[j];
  for (int j = 0; j < bins; ++j) {
    if (mass_t[j] <= 0.0 || mass_s[j] <= 0.0) continue;
    out.target_mass[j] = mass_t[j] / total_t;
    out.mean_source[j] = num_s[j] / mass_s[j];
    out.mean_target[j] = num_t[j] / mass_t[j];
    out.value += out.target_mass[j] * std::fabs(out.mean_source[j] - out.mean_target[j]);
  }
  return out;
}

std::vector<ScoredDraw> draw_scored(const AnalyticExample1D& ex, Domain d, int n, Rng& rng) {
  const double mean = d == Domain::kSource ? ex.source_mean : ex.target_mean;
  std::vector<ScoredDraw> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(mean, 1.0);
    const double y1 = rng.uniform() < ex.posterior1(x) ? 1.0 : 0.0;
    out.push_back({ex.score(x), y1});
  }
  return out;
}

}  // namespace ecl::sim
