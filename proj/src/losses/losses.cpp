#include "ecl/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace ecl::loss {

using ad::NodeRef;
using ad::Tape;

NodeRef cross_entropy(Tape& tape, NodeRef scores, const Matrix& one_hot) {
  const Matrix& s = tape.value(scores);
  if (!s.same_shape(one_hot))
    throw std::invalid_argument("cross_entropy: scores/targets shape mismatch");
  if (s.rows == 0) throw std::invalid_argument("cross_entropy: empty batch");
  NodeRef y = tape.leaf(one_hot);
  NodeRef picked = tape.mul(tape.log(scores), y);
  return tape.affine(tape.mean(picked), -static_cast<double>(s.cols), 0.0);
}

NodeRef binary_cross_entropy(Tape& tape, NodeRef prob, const Matrix& targets) {
  const Matrix& p = tape.value(prob);
  if (!p.same_shape(targets))
    throw std::invalid_argument("binary_cross_entropy: shape mismatch");
  if (p.rows == 0) throw std::invalid_argument("binary_cross_entropy: empty batch");
  NodeRef y = tape.leaf(targets);
  NodeRef pos = tape.mul(y, tape.log(prob));
  NodeRef neg = tape.mul(tape.affine(y, -1.0, 1.0), tape.log(tape.affine(prob, -1.0, 1.0)));
  return tape.affine(tape.mean(tape.add(pos, neg)), -1.0, 0.0);
}

NodeRef soft_assign(Tape& tape, NodeRef points, const AnchorGrid& grid) {
  if (grid.tau <= 0.0) throw std::invalid_argument("soft_assign: tau must be > 0");
  const Matrix& pts = tape.value(points);
  if (pts.cols != grid.width())
    throw std::invalid_argument("soft_assign: point width does not match grid paradigm");
  NodeRef anchors = tape.leaf(grid.anchors);
  NodeRef d2 = tape.pair_sqdist(points, anchors);
  return tape.row_softmax(tape.affine(d2, -1.0 / grid.tau, 0.0));
}

namespace {

// [B,1] column of soft counts: omega^T * ones.
NodeRef soft_counts(Tape& tape, NodeRef omega) {
  NodeRef ones = tape.leaf(Matrix::full(tape.value(omega).rows, 1, 1.0));
  return tape.matmul(tape.transpose(omega), ones);
}

// Stabilized weighted means: (omega^T p) / (counts + eps), row-scaled.
NodeRef soft_means(Tape& tape, NodeRef omega, NodeRef p, NodeRef counts, double eps) {
  NodeRef raw = tape.matmul(tape.transpose(omega), p);
  NodeRef denom = tape.affine(counts, 1.0, eps);
  NodeRef ones = tape.leaf(Matrix::full(tape.value(counts).rows, 1, 1.0));
  return tape.scale_rows(raw, tape.div(ones, denom));
}

NodeRef target_weights(Tape& tape, NodeRef counts_t) {
  return tape.mul_scalar(counts_t, tape.pow_const(tape.sum(counts_t), -1.0));
}

}  // namespace

BinStatsNodes bin_stats(Tape& tape, NodeRef omega_s, NodeRef omega_t, NodeRef p_s,
                        NodeRef p_t, const AnchorGrid& grid) {
  BinStatsNodes out;
  out.count_s = soft_counts(tape, omega_s);
  out.count_t = soft_counts(tape, omega_t);
  double mass = 0.0;
  for (double v : tape.value(out.count_t).data) mass += v;
  if (mass <= 0.0) throw std::invalid_argument("bin_stats: no target mass");
  out.mean_s = soft_means(tape, omega_s, p_s, out.count_s, grid.epsilon);
  out.mean_t = soft_means(tape, omega_t, p_t, out.count_t, grid.epsilon);
  out.weights = target_weights(tape, out.count_t);
  return out;
}

NodeRef ecl_soft(Tape& tape, NodeRef stat_s, NodeRef stat_t, NodeRef p_s, NodeRef p_t,
                 const AnchorGrid& grid) {
  if (tape.value(stat_s).rows == 0 || tape.value(stat_t).rows == 0)
    throw std::invalid_argument("ecl_soft: empty batch");
  NodeRef omega_s = soft_assign(tape, stat_s, grid);
  NodeRef omega_t = soft_assign(tape, stat_t, grid);
  BinStatsNodes stats = bin_stats(tape, omega_s, omega_t, p_s, p_t, grid);
  NodeRef gap = tape.row_norm(tape.sub(stats.mean_s, stats.mean_t));
  return tape.sum(tape.mul(stats.weights, gap));
}

NodeRef soft_ece(Tape& tape, NodeRef confidence, const Matrix& correctness,
                 const AnchorGrid& grid) {
  const Matrix& c = tape.value(confidence);
  if (c.rows == 0) throw std::invalid_argument("soft_ece: empty batch");
  if (c.cols != 1 || !c.same_shape(correctness))
    throw std::invalid_argument("soft_ece: confidence/correctness must be [n,1]");
  NodeRef omega = soft_assign(tape, confidence, grid);
  NodeRef counts = soft_counts(tape, omega);
  NodeRef mean_conf = soft_means(tape, omega, confidence, counts, grid.epsilon);
  NodeRef mean_corr = soft_means(tape, omega, tape.leaf(correctness), counts, grid.epsilon);
  NodeRef w = target_weights(tape, counts);
  return tape.sum(tape.mul(w, tape.abs(tape.sub(mean_conf, mean_corr))));
}

// ---------------------------------------------------------------------------
// Hard estimator
// ---------------------------------------------------------------------------

namespace {

int hard_bin(double v, int bins, double lo, double hi) {
  // Left-closed right-open intervals, last bin closed.
  if (v >= hi) return bins - 1;
  int j = static_cast<int>((v - lo) / (hi - lo) * bins);
  return j < 0 ? 0 : (j >= bins ? bins - 1 : j);
}

struct Accumulator {
  std::vector<double> sum;
  std::vector<int> count;
  Accumulator(int bins, int width) : sum(static_cast<std::size_t>(bins) * width, 0.0), count(bins, 0) {}
};

EclHardResult reduce_bins(const Accumulator& s, const Accumulator& t, int bins,
                          int width, int n_target_total) {
  EclHardResult out;
  for (int j = 0; j < bins; ++j) {
    if (t.count[j] == 0) continue;
    const double wj = static_cast<double>(t.count[j]) / n_target_total;
    if (s.count[j] == 0) {
      ++out.skipped_bins;
      out.skipped_target_mass += wj;
      continue;
    }
    double gap_sq = 0.0;
    for (int c = 0; c < width; ++c) {
      const double es = s.sum[static_cast<std::size_t>(j) * width + c] / s.count[j];
      const double et = t.sum[static_cast<std::size_t>(j) * width + c] / t.count[j];
      gap_sq += (es - et) * (es - et);
    }
    out.value += wj * std::sqrt(gap_sq);
  }
  return out;
}

}  // namespace

EclHardResult ecl_hard_scalar(const std::vector<double>& stat_s,
                              const std::vector<double>& obs_s,
                              const std::vector<double>& stat_t,
                              const std::vector<double>& obs_t, int bins, double lo,
                              double hi) {
  if (stat_t.empty()) throw std::invalid_argument("ecl_hard: no target samples");
  if (stat_s.size() != obs_s.size() || stat_t.size() != obs_t.size())
    throw std::invalid_argument("ecl_hard: statistic/observation length mismatch");
  Accumulator s(bins, 1), t(bins, 1);
  for (std::size_t i = 0; i < stat_s.size(); ++i) {
    const int j = hard_bin(stat_s[i], bins, lo, hi);
    s.sum[j] += obs_s[i];
    ++s.count[j];
  }
  for (std::size_t i = 0; i < stat_t.size(); ++i) {
    const int j = hard_bin(stat_t[i], bins, lo, hi);
    t.sum[j] += obs_t[i];
    ++t.count[j];
  }
  return reduce_bins(s, t, bins, 1, static_cast<int>(stat_t.size()));
}

EclHardResult ecl_hard_canonical(const Matrix& stat_s, const Matrix& obs_s,
                                 const Matrix& stat_t, const Matrix& obs_t,
                                 const AnchorGrid& grid) {
  if (stat_t.rows == 0) throw std::invalid_argument("ecl_hard: no target samples");
  if (grid.paradigm != Paradigm::kCanonical)
    throw std::invalid_argument("ecl_hard_canonical: grid is not canonical");
  const int bins = grid.bins();
  const int width = obs_s.cols;
  Accumulator s(bins, width), t(bins, width);
  for (int i = 0; i < stat_s.rows; ++i) {
    const int j = nearest_anchor(grid, stat_s.row(i));
    for (int c = 0; c < width; ++c) s.sum[static_cast<std::size_t>(j) * width + c] += obs_s.at(i, c);
    ++s.count[j];
  }
  for (int i = 0; i < stat_t.rows; ++i) {
    const int j = nearest_anchor(grid, stat_t.row(i));
    for (int c = 0; c < width; ++c) t.sum[static_cast<std::size_t>(j) * width + c] += obs_t.at(i, c);
    ++t.count[j];
  }
  return reduce_bins(s, t, bins, width, stat_t.rows);
}

EclHardResult ecl_hard_classwise(const Matrix& stat_s, const Matrix& obs_s,
                                 const Matrix& stat_t, const Matrix& obs_t, int bins) {
  if (stat_t.rows == 0) throw std::invalid_argument("ecl_hard: no target samples");
  EclHardResult out;
  for (int k = 0; k < stat_s.cols; ++k) {
    Accumulator s(bins, 1), t(bins, 1);
    for (int i = 0; i < stat_s.rows; ++i) {
      const int j = hard_bin(stat_s.at(i, k), bins, 0.0, 1.0);
      s.sum[j] += obs_s.at(i, k);
      ++s.count[j];
    }
    for (int i = 0; i < stat_t.rows; ++i) {
      const int j = hard_bin(stat_t.at(i, k), bins, 0.0, 1.0);
      t.sum[j] += obs_t.at(i, k);
      ++t.count[j];
    }
    const EclHardResult part = reduce_bins(s, t, bins, 1, stat_t.rows);
    out.value += part.value;
    out.skipped_bins += part.skipped_bins;
    out.skipped_target_mass += part.skipped_target_mass;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Proximal machinery
// ---------------------------------------------------------------------------

std::vector<double> shrink(const std::vector<double>& v, double threshold) {
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  std::vector<double> out(v.size(), 0.0);
  if (norm <= threshold || norm == 0.0) return out;
  const double scale = 1.0 - threshold / norm;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale * v[i];
  return out;
}

ProxPair prox_bin_update(const std::vector<double>& u_s, const std::vector<double>& u_t,
                         const std::vector<double>& m_s, double n_s,
                         const std::vector<double>& m_t, double n_t, double w,
                         int n_prox) {
  if (n_s <= 0.0 || n_t <= 0.0)
    throw std::invalid_argument("prox_bin_update: soft counts must be positive");
  const std::size_t width = u_s.size();
  ProxPair out{u_s, u_t};
  std::vector<double> v(width);
  for (int it = 0; it < n_prox; ++it) {
    const double tau_s = w / (2.0 * n_s);
    for (std::size_t c = 0; c < width; ++c) v[c] = m_s[c] / n_s - out.u_t[c];
    const std::vector<double> sh_s = shrink(v, tau_s);
    for (std::size_t c = 0; c < width; ++c) out.u_s[c] = out.u_t[c] + sh_s[c];

    const double tau_t = w / (2.0 * n_t);
    for (std::size_t c = 0; c < width; ++c) v[c] = m_t[c] / n_t - out.u_s[c];
    const std::vector<double> sh_t = shrink(v, tau_t);
    for (std::size_t c = 0; c < width; ++c) out.u_t[c] = out.u_s[c] + sh_t[c];
  }
  return out;
}

double adaptive_lambda(double running_ce_sum, double running_ecl_sum, double gamma,
                       double cap) {
  if (running_ecl_sum <= 0.0) return cap;
  const double lambda = std::pow(running_ce_sum / running_ecl_sum, gamma);
  return std::min(lambda, cap);
}

}  // namespace ecl::loss
