#pragma once

#include "ecl/matrix.hpp"
#include "ecl/paradigm.hpp"

namespace ecl::loss {

// Soft-binning anchors. Scalar paradigms use a_j = (2j-1)/(2B) on (0,1);
// canonical uses the regular lattice on the simplex with per-axis resolution
// m, giving B = C(m+K-1, K-1) cells (m = 14: B = 15 for K = 2, 120 for K = 3).
struct AnchorGrid {
  Paradigm paradigm = Paradigm::kTopLabel;
  Matrix anchors;          // [B,K] canonical, [B,1] scalar
  double tau = 0.0;        // assignment temperature
  double epsilon = 1e-8;   // stabilizer in the soft bin means

  int bins() const { return anchors.rows; }
  int width() const { return anchors.cols; }

  // tau <= 0 requests the default (min inter-anchor squared distance).
  static AnchorGrid scalar_grid(Paradigm paradigm, int bins, double tau = 0.0,
                                double epsilon = 1e-8);
  static AnchorGrid canonical(int classes, int resolution = 14, double tau = 0.0,
                              double epsilon = 1e-8);
};

long simplex_lattice_size(int classes, int resolution);

// Index of the anchor nearest to a point (hard binning for canonical cells).
int nearest_anchor(const AnchorGrid& grid, const double* point);

}  // namespace ecl::loss
