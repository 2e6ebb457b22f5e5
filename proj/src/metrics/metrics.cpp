#include "ecl/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace ecl::metrics {

namespace {

int interval_bin(double v, int bins) {
  if (v >= 1.0) return bins - 1;
  const int j = static_cast<int>(v * bins);
  return j < 0 ? 0 : (j >= bins ? bins - 1 : j);
}

}  // namespace

double ece_toplabel(const std::vector<double>& confidence,
                    const std::vector<double>& correctness, int bins) {
  if (confidence.empty()) throw std::invalid_argument("ece_toplabel: empty input");
  if (confidence.size() != correctness.size())
    throw std::invalid_argument("ece_toplabel: length mismatch");
  std::vector<double> conf_sum(bins, 0.0), corr_sum(bins, 0.0);
  std::vector<int> count(bins, 0);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const int j = interval_bin(confidence[i], bins);
    conf_sum[j] += confidence[i];
    corr_sum[j] += correctness[i];
    ++count[j];
  }
  const double n = static_cast<double>(confidence.size());
  double ece = 0.0;
  for (int j = 0; j < bins; ++j) {
    if (count[j] == 0) continue;
    ece += (count[j] / n) * std::fabs(conf_sum[j] / count[j] - corr_sum[j] / count[j]);
  }
  return ece;
}

double cwece(const Matrix& scores, const Matrix& one_hot, int bins) {
  if (scores.rows == 0) throw std::invalid_argument("cwece: empty input");
  if (!scores.same_shape(one_hot)) throw std::invalid_argument("cwece: shape mismatch");
  const double n = scores.rows;
  double total = 0.0;
  for (int k = 0; k < scores.cols; ++k) {
    std::vector<double> score_sum(bins, 0.0), label_sum(bins, 0.0);
    std::vector<int> count(bins, 0);
    for (int i = 0; i < scores.rows; ++i) {
      const int j = interval_bin(scores.at(i, k), bins);
      score_sum[j] += scores.at(i, k);
      label_sum[j] += one_hot.at(i, k);
      ++count[j];
    }
    for (int j = 0; j < bins; ++j) {
      if (count[j] == 0) continue;
      total += (count[j] / n) * std::fabs(score_sum[j] / count[j] - label_sum[j] / count[j]);
    }
  }
  return total / scores.cols;
}

double canonical_ce_binned(const Matrix& scores, const Matrix& one_hot,
                           const loss::AnchorGrid& grid) {
  if (scores.rows == 0) throw std::invalid_argument("canonical_ce_binned: empty input");
  if (!scores.same_shape(one_hot))
    throw std::invalid_argument("canonical_ce_binned: shape mismatch");
  const int cells = grid.bins();
  const int k = scores.cols;
  std::vector<double> s_sum(static_cast<std::size_t>(cells) * k, 0.0);
  std::vector<double> y_sum(static_cast<std::size_t>(cells) * k, 0.0);
  std::vector<int> count(cells, 0);
  for (int i = 0; i < scores.rows; ++i) {
    const int j = loss::nearest_anchor(grid, scores.row(i));
    for (int c = 0; c < k; ++c) {
      s_sum[static_cast<std::size_t>(j) * k + c] += scores.at(i, c);
      y_sum[static_cast<std::size_t>(j) * k + c] += one_hot.at(i, c);
    }
    ++count[j];
  }
  const double n = scores.rows;
  double total = 0.0;
  for (int j = 0; j < cells; ++j) {
    if (count[j] == 0) continue;
    double gap_sq = 0.0;
    for (int c = 0; c < k; ++c) {
      const double d = (s_sum[static_cast<std::size_t>(j) * k + c] -
                        y_sum[static_cast<std::size_t>(j) * k + c]) /
                       count[j];
      gap_sq += d * d;
    }
    total += (count[j] / n) * std::sqrt(gap_sq);
  }
  return total / std::sqrt(2.0);
}

ReliabilityTable reliability_toplabel(const std::vector<double>& confidence,
                                      const std::vector<double>& correctness, int bins) {
  ReliabilityTable table;
  table.paradigm = Paradigm::kTopLabel;
  table.sample_count = static_cast<int>(confidence.size());
  std::vector<double> conf_sum(bins, 0.0), corr_sum(bins, 0.0);
  std::vector<int> count(bins, 0);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const int j = interval_bin(confidence[i], bins);
    conf_sum[j] += confidence[i];
    corr_sum[j] += correctness[i];
    ++count[j];
  }
  for (int j = 0; j < bins; ++j) {
    ReliabilityBin b;
    b.bin_id = j;
    b.lo = static_cast<double>(j) / bins;
    b.hi = static_cast<double>(j + 1) / bins;
    b.count = count[j];
    if (count[j] > 0) {
      b.mean_confidence = conf_sum[j] / count[j];
      b.empirical_frequency = corr_sum[j] / count[j];
      b.gap = std::fabs(b.mean_confidence - b.empirical_frequency);
    }
    table.bins.push_back(b);
  }
  return table;
}

ReliabilityTable reliability_classwise(const Matrix& scores, const Matrix& one_hot,
                                       int bins) {
  ReliabilityTable table;
  table.paradigm = Paradigm::kClassWise;
  table.sample_count = scores.rows;
  for (int k = 0; k < scores.cols; ++k) {
    std::vector<double> s_sum(bins, 0.0), y_sum(bins, 0.0);
    std::vector<int> count(bins, 0);
    for (int i = 0; i < scores.rows; ++i) {
      const int j = interval_bin(scores.at(i, k), bins);
      s_sum[j] += scores.at(i, k);
      y_sum[j] += one_hot.at(i, k);
      ++count[j];
    }
    for (int j = 0; j < bins; ++j) {
      ReliabilityBin b;
      b.bin_id = j;
      b.class_index = k;
      b.lo = static_cast<double>(j) / bins;
      b.hi = static_cast<double>(j + 1) / bins;
      b.count = count[j];
      if (count[j] > 0) {
        b.mean_confidence = s_sum[j] / count[j];
        b.empirical_frequency = y_sum[j] / count[j];
        b.gap = std::fabs(b.mean_confidence - b.empirical_frequency);
      }
      table.bins.push_back(b);
    }
  }
  return table;
}

ReliabilityTable reliability_canonical(const Matrix& scores, const Matrix& one_hot,
                                       const loss::AnchorGrid& grid) {
  ReliabilityTable table;
  table.paradigm = Paradigm::kCanonical;
  table.sample_count = scores.rows;
  table.anchors = grid.anchors;
  const int cells = grid.bins();
  const int k = scores.cols;
  std::vector<double> s_sum(static_cast<std::size_t>(cells) * k, 0.0);
  std::vector<double> y_sum(static_cast<std::size_t>(cells) * k, 0.0);
  std::vector<int> count(cells, 0);
  for (int i = 0; i < scores.rows; ++i) {
    const int j = loss::nearest_anchor(grid, scores.row(i));
    for (int c = 0; c < k; ++c) {
      s_sum[static_cast<std::size_t>(j) * k + c] += scores.at(i, c);
      y_sum[static_cast<std::size_t>(j) * k + c] += one_hot.at(i, c);
    }
    ++count[j];
  }
  for (int j = 0; j < cells; ++j) {
    ReliabilityBin b;
    b.bin_id = j;
    b.count = count[j];
    if (count[j] > 0) {
      double gap_sq = 0.0;
      double conf = 0.0, freq = 0.0;
      for (int c = 0; c < k; ++c) {
        const double sc = s_sum[static_cast<std::size_t>(j) * k + c] / count[j];
        const double yc = y_sum[static_cast<std::size_t>(j) * k + c] / count[j];
        gap_sq += (sc - yc) * (sc - yc);
        conf = std::max(conf, sc);
        freq = std::max(freq, yc);
      }
      b.mean_confidence = conf;
      b.empirical_frequency = freq;
      b.gap = std::sqrt(gap_sq) / std::sqrt(2.0);
    }
    table.bins.push_back(b);
  }
  return table;
}

AccuracyDelta accuracy_and_delta(const std::vector<int>& predictions,
                                 const std::vector<int>& labels,
                                 double baseline_accuracy) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("accuracy_and_delta: length mismatch");
  int hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  AccuracyDelta out;
  out.accuracy = predictions.empty() ? 0.0 : static_cast<double>(hits) / predictions.size();
  out.delta = out.accuracy - baseline_accuracy;
  return out;
}

std::vector<double> max_confidence(const Matrix& scores) {
  std::vector<double> out(scores.rows);
  for (int i = 0; i < scores.rows; ++i) out[i] = scores.at(i, argmax_row(scores, i));
  return out;
}

std::vector<int> predicted_class(const Matrix& scores) {
  std::vector<int> out(scores.rows);
  for (int i = 0; i < scores.rows; ++i) out[i] = argmax_row(scores, i);
  return out;
}

std::vector<double> correctness01(const Matrix& scores, const std::vector<int>& labels) {
  std::vector<double> out(scores.rows);
  for (int i = 0; i < scores.rows; ++i)
    out[i] = argmax_row(scores, i) == labels[i] ? 1.0 : 0.0;
  return out;
}

}  // namespace ecl::metrics
