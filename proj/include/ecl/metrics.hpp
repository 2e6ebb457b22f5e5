#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecl/anchors.hpp"
#include "ecl/matrix.hpp"
#include "ecl/paradigm.hpp"

namespace ecl::metrics {

// One reliability-diagram row. Scalar paradigms fill the interval bounds;
// canonical fills the anchor index (coordinates live in the table). The
// class_index is -1 except for class-wise rows.
struct ReliabilityBin {
  int bin_id = 0;
  int class_index = -1;
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  double mean_confidence = 0.0;
  double empirical_frequency = 0.0;
  double gap = 0.0;
};

struct ReliabilityTable {
  Paradigm paradigm = Paradigm::kTopLabel;
  int sample_count = 0;
  std::vector<ReliabilityBin> bins;
  Matrix anchors;  // canonical cell coordinates, empty otherwise
};

// Classic binned ECE over [0,1]: bins are left-closed right-open, last closed.
double ece_toplabel(const std::vector<double>& confidence,
                    const std::vector<double>& correctness, int bins = 15);

// Unweighted mean over classes of the per-class binned |mean score - freq|.
double cwece(const Matrix& scores, const Matrix& one_hot, int bins = 15);

// Nearest-anchor partition of the simplex; per-cell ||mean S - mean y||_2
// weighted by cell mass, normalized by the simplex diameter sqrt(2).
double canonical_ce_binned(const Matrix& scores, const Matrix& one_hot,
                           const loss::AnchorGrid& grid);

ReliabilityTable reliability_toplabel(const std::vector<double>& confidence,
                                      const std::vector<double>& correctness,
                                      int bins = 15);
ReliabilityTable reliability_classwise(const Matrix& scores, const Matrix& one_hot,
                                       int bins = 15);
ReliabilityTable reliability_canonical(const Matrix& scores, const Matrix& one_hot,
                                       const loss::AnchorGrid& grid);

struct AccuracyDelta {
  double accuracy = 0.0;
  double delta = 0.0;  // accuracy - baseline
};
AccuracyDelta accuracy_and_delta(const std::vector<int>& predictions,
                                 const std::vector<int>& labels,
                                 double baseline_accuracy);

// Confidence/correctness extraction from score rows.
std::vector<double> max_confidence(const Matrix& scores);
std::vector<int> predicted_class(const Matrix& scores);
std::vector<double> correctness01(const Matrix& scores, const std::vector<int>& labels);

struct CalibrationReport {
  int schema_version = 1;
  std::string arm;
  double ece = 0.0;
  double cwece = 0.0;
  double canonical_ce = 0.0;
  double accuracy = 0.0;
  double delta_acc = 0.0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config_echo;
  ReliabilityTable top_label;
  ReliabilityTable class_wise;
  ReliabilityTable canonical;
};

// report_io.cpp
void write_reliability_csv(const std::string& path, const ReliabilityTable& table);
std::string reliability_json(const ReliabilityTable& table);
std::string report_json(const CalibrationReport& report);
void write_report_json(const std::string& path, const CalibrationReport& report);
void write_reliability_svg(const std::string& path, const ReliabilityTable& top_label);

}  // namespace ecl::metrics
