#pragma once

#include <vector>

#include "ecl/anchors.hpp"
#include "ecl/matrix.hpp"
#include "ecl/tape.hpp"

namespace ecl::loss {

// ---------------------------------------------------------------------------
// Differentiable losses (tape nodes)
// ---------------------------------------------------------------------------

// Mean negative log-likelihood of simplex rows against one-hot targets.
ad::NodeRef cross_entropy(ad::Tape& tape, ad::NodeRef scores, const Matrix& one_hot);

// Mean binary cross-entropy of probabilities in (0,1) against 0/1 targets.
ad::NodeRef binary_cross_entropy(ad::Tape& tape, ad::NodeRef prob, const Matrix& targets);

// Temperature-softmax of negative squared anchor distances; rows sum to 1.
ad::NodeRef soft_assign(ad::Tape& tape, ad::NodeRef points, const AnchorGrid& grid);

// Soft bin statistics for one source/target pair of assignment matrices.
struct BinStatsNodes {
  ad::NodeRef count_s;  // [B,1] soft counts
  ad::NodeRef count_t;
  ad::NodeRef mean_s;   // [B,width] stabilized weighted means
  ad::NodeRef mean_t;
  ad::NodeRef weights;  // [B,1] target proportions, sums to 1
};
BinStatsNodes bin_stats(ad::Tape& tape, ad::NodeRef omega_s, ad::NodeRef omega_t,
                        ad::NodeRef p_s, ad::NodeRef p_t, const AnchorGrid& grid);

// Differentiable expectation-consistency loss. stat_* carries the binned
// statistic ([n,K] canonical, [n,1] scalar paradigms); p_* the posterior
// observations with matching width. Gradient flows through both the
// assignments and the posteriors.
ad::NodeRef ecl_soft(ad::Tape& tape, ad::NodeRef stat_s, ad::NodeRef stat_t,
                     ad::NodeRef p_s, ad::NodeRef p_t, const AnchorGrid& grid);

// Softened ECE: target-proportion-weighted |mean confidence - mean
// correctness| over soft bins of the scalar confidence.
ad::NodeRef soft_ece(ad::Tape& tape, ad::NodeRef confidence, const Matrix& correctness,
                     const AnchorGrid& grid);

// ---------------------------------------------------------------------------
// Hard-binned estimator
// ---------------------------------------------------------------------------

struct EclHardResult {
  double value = 0.0;
  int skipped_bins = 0;           // target-occupied bins with empty source level set
  double skipped_target_mass = 0.0;
};

// Scalar statistic, equal-width bins on [lo,hi] (left-closed, last closed).
EclHardResult ecl_hard_scalar(const std::vector<double>& stat_s,
                              const std::vector<double>& obs_s,
                              const std::vector<double>& stat_t,
                              const std::vector<double>& obs_t, int bins,
                              double lo = 0.0, double hi = 1.0);

// Canonical statistic, nearest-anchor cells of a canonical grid.
EclHardResult ecl_hard_canonical(const Matrix& stat_s, const Matrix& obs_s,
                                 const Matrix& stat_t, const Matrix& obs_t,
                                 const AnchorGrid& grid);

// Class-wise: per-class scalar binning of S_k against obs column k, summed
// over classes with target-proportion weights.
EclHardResult ecl_hard_classwise(const Matrix& stat_s, const Matrix& obs_s,
                                 const Matrix& stat_t, const Matrix& obs_t, int bins);

// ---------------------------------------------------------------------------
// Proximal machinery and loss weighting
// ---------------------------------------------------------------------------

// Proximal map of threshold*||.||: scales v toward zero, clamping at zero.
std::vector<double> shrink(const std::vector<double>& v, double threshold);

struct ProxPair {
  std::vector<double> u_s;
  std::vector<double> u_t;
};

// Alternating shrink updates for one bin's auxiliary pair; m_*/n_* are the
// bin's weighted sums and soft counts, w the bin weight. n_s, n_t > 0.
ProxPair prox_bin_update(const std::vector<double>& u_s, const std::vector<double>& u_t,
                         const std::vector<double>& m_s, double n_s,
                         const std::vector<double>& m_t, double n_t, double w,
                         int n_prox);

// lambda = (ce_sum / ecl_sum)^gamma, capped; ecl_sum = 0 returns the cap.
double adaptive_lambda(double running_ce_sum, double running_ecl_sum, double gamma,
                       double cap);

}  // namespace ecl::loss
