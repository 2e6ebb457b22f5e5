#include "ecl/simdata.hpp"

#include <cmath>
#include <stdexcept>

namespace ecl::sim {

std::vector<double> CovariateShiftTask::posterior(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != dimension)
    throw std::invalid_argument("posterior: covariate dimension mismatch");
  const double z = boundary_scale * (x[1] - std::sin(1.5 * x[0]));
  const double p1 = 1.0 / (1.0 + std::exp(-z));
  return {p1, 1.0 - p1};
}

CovariateShiftTask CovariateShiftTask::gaussian_shift(std::uint64_t seed) {
  CovariateShiftTask t;
  t.kind = Kind::kGaussian;
  t.seed = seed;
  return t;
}

CovariateShiftTask CovariateShiftTask::uniform_shift(std::uint64_t seed) {
  CovariateShiftTask t;
  t.kind = Kind::kUniform;
  t.seed = seed;
  return t;
}

namespace {

std::vector<double> draw_covariate(const CovariateShiftTask& task, Domain d, Rng& rng) {
  std::vector<double> x(task.dimension);
  if (task.kind == CovariateShiftTask::Kind::kGaussian) {
    const std::vector<double>& mean =
        d == Domain::kSource ? task.source_mean : task.target_mean;
    for (int i = 0; i < task.dimension; ++i)
      x[i] = rng.normal(mean[i], std::sqrt(task.cov_diag[i]));
  } else {
    const std::vector<double>& lo = d == Domain::kSource ? task.source_lo : task.target_lo;
    const std::vector<double>& hi = d == Domain::kSource ? task.source_hi : task.target_hi;
    for (int i = 0; i < task.dimension; ++i) x[i] = rng.uniform(lo[i], hi[i]);
  }
  return x;
}

int draw_label(const std::vector<double>& posterior, Rng& rng) {
  // Inverse-CDF draw over the categorical posterior.
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t k = 0; k < posterior.size(); ++k) {
    cum += posterior[k];
    if (u < cum) return static_cast<int>(k);
  }
  return static_cast<int>(posterior.size()) - 1;
}

}  // namespace

std::vector<LabeledSample> sample_task(const CovariateShiftTask& task, int n_per_domain) {
  if (n_per_domain < 1) throw std::invalid_argument("sample_task: n_per_domain must be >= 1");
  Rng base(task.seed);
  std::vector<LabeledSample> out;
  out.reserve(2 * static_cast<std::size_t>(n_per_domain));
  for (Domain d : {Domain::kSource, Domain::kTarget}) {
    Rng rng = base.substream(d == Domain::kSource ? 1 : 2);
    for (int i = 0; i < n_per_domain; ++i) {
      LabeledSample s;
      s.domain = d;
      s.x = draw_covariate(task, d, rng);
      s.true_posterior = task.posterior(s.x);
      s.label = draw_label(s.true_posterior, rng);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<LabeledSample> sample_gaussian_shift(int n_per_domain, std::uint64_t seed) {
  return sample_task(CovariateShiftTask::gaussian_shift(seed), n_per_domain);
}

std::vector<LabeledSample> sample_uniform_shift(int n_per_domain, std::uint64_t seed) {
  return sample_task(CovariateShiftTask::uniform_shift(seed), n_per_domain);
}

Matrix covariates(const std::vector<LabeledSample>& samples, Domain d) {
  int n = 0;
  int dim = 0;
  for (const LabeledSample& s : samples)
    if (s.domain == d) {
      ++n;
      dim = static_cast<int>(s.x.size());
    }
  Matrix out(n, dim);
  int r = 0;
  for (const LabeledSample& s : samples)
    if (s.domain == d) {
      for (int j = 0; j < dim; ++j) out.at(r, j) = s.x[j];
      ++r;
    }
  return out;
}

Matrix one_hot_labels(const std::vector<LabeledSample>& samples, Domain d, int classes) {
  int n = 0;
  for (const LabeledSample& s : samples)
    if (s.domain == d) ++n;
  Matrix out(n, classes);
  int r = 0;
  for (const LabeledSample& s : samples)
    if (s.domain == d) out.at(r++, s.label) = 1.0;
  return out;
}

std::vector<int> labels(const std::vector<LabeledSample>& samples, Domain d) {
  std::vector<int> out;
  for (const LabeledSample& s : samples)
    if (s.domain == d) out.push_back(s.label);
  return out;
}

}  // namespace ecl::sim
