#pragma once

#include <vector>

#include "ecl/losses.hpp"

namespace ecl::loss {

// Cached per-bin auxiliary pairs, EMA-smoothed across iterations. One ledger
// per statistic: canonical/top-label keep one, class-wise keeps one per class.
struct BinLedger {
  Matrix u_s;  // [B,width], zero-initialized
  Matrix u_t;
  double alpha_ema = 0.1;
  int n_prox = 3;

  static BinLedger init(int bins, int width, double alpha_ema = 0.1, int n_prox = 3);
};

struct MinibatchStep {
  ad::NodeRef loss = -1;   // quadratic auxiliary-anchored loss on the tape
  bool skipped = false;    // empty batch or no target soft mass
  std::vector<double> bin_weights;  // w_j recomputed from this batch
  Matrix u_tilde_s;        // detached proximal outputs fed to the loss
  Matrix u_tilde_t;
};

// One step of the auxiliary-variable mini-batch loss: soft-assign both
// batches, run the alternating proximal updates per bin from the cached
// ledger values, EMA the ledger, and emit
//   sum_j sum_i omega_ij^d * ||u~_j^d - p_i||^2
// over both domains with the u~ detached. Bins whose soft count underflows
// to zero in either domain are left untouched and excluded from the loss.
MinibatchStep ecl_minibatch_step(ad::Tape& tape, ad::NodeRef stat_s, ad::NodeRef stat_t,
                                 ad::NodeRef p_s, ad::NodeRef p_t,
                                 const AnchorGrid& grid, BinLedger& ledger);

}  // namespace ecl::loss
