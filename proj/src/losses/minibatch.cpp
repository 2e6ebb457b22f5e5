#include "ecl/minibatch.hpp"

#include <cmath>
#include <stdexcept>

namespace ecl::loss {

using ad::NodeRef;
using ad::Tape;

BinLedger BinLedger::init(int bins, int width, double alpha_ema, int n_prox) {
  BinLedger led;
  led.u_s = Matrix::zeros(bins, width);
  led.u_t = Matrix::zeros(bins, width);
  led.alpha_ema = alpha_ema;
  led.n_prox = n_prox;
  return led;
}

MinibatchStep ecl_minibatch_step(Tape& tape, NodeRef stat_s, NodeRef stat_t,
                                 NodeRef p_s, NodeRef p_t, const AnchorGrid& grid,
                                 BinLedger& ledger) {
  MinibatchStep out;
  const int bins = grid.bins();
  const int width = tape.value(p_s).cols;
  if (ledger.u_s.rows != bins || ledger.u_s.cols != width)
    throw std::invalid_argument("ecl_minibatch_step: ledger shape mismatch");
  if (tape.value(stat_s).rows == 0 || tape.value(stat_t).rows == 0) {
    out.skipped = true;
    return out;
  }

  NodeRef omega_s = soft_assign(tape, stat_s, grid);
  NodeRef omega_t = soft_assign(tape, stat_t, grid);

  // Batch statistics as plain values for the proximal inner loop.
  const Matrix& os = tape.value(omega_s);
  const Matrix& ot = tape.value(omega_t);
  const Matrix& ps = tape.value(p_s);
  const Matrix& pt = tape.value(p_t);

  std::vector<double> n_s(bins, 0.0), n_t(bins, 0.0);
  Matrix m_s(bins, width), m_t(bins, width);
  for (int i = 0; i < os.rows; ++i)
    for (int j = 0; j < bins; ++j) {
      n_s[j] += os.at(i, j);
      for (int c = 0; c < width; ++c) m_s.at(j, c) += os.at(i, j) * ps.at(i, c);
    }
  for (int i = 0; i < ot.rows; ++i)
    for (int j = 0; j < bins; ++j) {
      n_t[j] += ot.at(i, j);
      for (int c = 0; c < width; ++c) m_t.at(j, c) += ot.at(i, j) * pt.at(i, c);
    }

  double total_t = 0.0;
  for (int j = 0; j < bins; ++j) total_t += n_t[j];
  if (total_t <= 0.0) {
    out.skipped = true;
    return out;
  }

  out.bin_weights.assign(bins, 0.0);
  std::vector<char> active(bins, 0);
  Matrix u_tilde_s(bins, width), u_tilde_t(bins, width);
  for (int j = 0; j < bins; ++j) {
    out.bin_weights[j] = n_t[j] / total_t;
    if (n_s[j] <= 0.0 || n_t[j] <= 0.0) continue;  // underflowed bin
    active[j] = 1;

    std::vector<double> us(width), ut(width), ms(width), mt(width);
    for (int c = 0; c < width; ++c) {
      us[c] = ledger.u_s.at(j, c);
      ut[c] = ledger.u_t.at(j, c);
      ms[c] = m_s.at(j, c);
      mt[c] = m_t.at(j, c);
    }
    const ProxPair prox = prox_bin_update(us, ut, ms, n_s[j], mt, n_t[j],
                                          out.bin_weights[j], ledger.n_prox);
    for (int c = 0; c < width; ++c) {
      u_tilde_s.at(j, c) = prox.u_s[c];
      u_tilde_t.at(j, c) = prox.u_t[c];
      ledger.u_s.at(j, c) =
          (1.0 - ledger.alpha_ema) * ledger.u_s.at(j, c) + ledger.alpha_ema * prox.u_s[c];
      ledger.u_t.at(j, c) =
          (1.0 - ledger.alpha_ema) * ledger.u_t.at(j, c) + ledger.alpha_ema * prox.u_t[c];
    }
  }

  // Quadratic loss against the detached auxiliaries; omega and p carry the
  // gradient. Inactive bins are masked out.
  NodeRef anchors_s = tape.leaf(u_tilde_s);
  NodeRef anchors_t = tape.leaf(u_tilde_t);
  NodeRef term_s = tape.mul(omega_s, tape.pair_sqdist(p_s, anchors_s));
  NodeRef term_t = tape.mul(omega_t, tape.pair_sqdist(p_t, anchors_t));

  bool any_inactive = false;
  for (int j = 0; j < bins; ++j)
    if (!active[j]) any_inactive = true;
  if (any_inactive) {
    Matrix mask_s(os.rows, bins), mask_t(ot.rows, bins);
    for (int j = 0; j < bins; ++j) {
      const double m = active[j] ? 1.0 : 0.0;
      for (int i = 0; i < os.rows; ++i) mask_s.at(i, j) = m;
      for (int i = 0; i < ot.rows; ++i) mask_t.at(i, j) = m;
    }
    term_s = tape.mul(term_s, tape.leaf(mask_s));
    term_t = tape.mul(term_t, tape.leaf(mask_t));
  }

  out.loss = tape.add(tape.sum(term_s), tape.sum(term_t));
  out.u_tilde_s = u_tilde_s;
  out.u_tilde_t = u_tilde_t;
  return out;
}

}  // namespace ecl::loss
