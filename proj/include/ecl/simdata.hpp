#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecl/matrix.hpp"
#include "ecl/rng.hpp"

namespace ecl::sim {

enum class Domain { kSource, kTarget };

struct LabeledSample {
  std::vector<double> x;
  int label = 0;  // class index; one-hot on demand
  Domain domain = Domain::kSource;
  std::vector<double> true_posterior;
};

// Source and target share the labeling function; only the covariate law
// differs. The 2-D boundary is P(Y1=1|x) = logistic(s*(x2 - sin(1.5*x1))),
// a nonlinear curve crossing both supports; the steepness s controls the
// label noise (swappable via config).
struct CovariateShiftTask {
  enum class Kind { kGaussian, kUniform };

  Kind kind = Kind::kGaussian;
  int dimension = 2;
  int classes = 2;
  std::uint64_t seed = 0;

  // Gaussian: per-domain mean and shared diagonal covariance.
  std::vector<double> source_mean{0.0, 0.0};
  std::vector<double> target_mean{2.0, 2.0};
  std::vector<double> cov_diag{5.0, 5.0};

  // Uniform: per-domain axis-aligned boxes.
  std::vector<double> source_lo{-2.5, -2.5};
  std::vector<double> source_hi{2.5, 2.5};
  std::vector<double> target_lo{-1.5, -1.5};
  std::vector<double> target_hi{3.5, 3.5};

  double boundary_scale = 2.0;

  std::vector<double> posterior(const std::vector<double>& x) const;

  static CovariateShiftTask gaussian_shift(std::uint64_t seed);
  static CovariateShiftTask uniform_shift(std::uint64_t seed);
};

// n source followed by n target samples; labels by inverse-CDF draw against
// the shared posterior, one RNG substream per domain.
std::vector<LabeledSample> sample_task(const CovariateShiftTask& task, int n_per_domain);

std::vector<LabeledSample> sample_gaussian_shift(int n_per_domain, std::uint64_t seed);
std::vector<LabeledSample> sample_uniform_shift(int n_per_domain, std::uint64_t seed);

// Batch views as matrices: X is [n,d], Y one-hot [n,K].
Matrix covariates(const std::vector<LabeledSample>& samples, Domain d);
Matrix one_hot_labels(const std::vector<LabeledSample>& samples, Domain d, int classes);
std::vector<int> labels(const std::vector<LabeledSample>& samples, Domain d);

}  // namespace ecl::sim
