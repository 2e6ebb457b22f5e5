#include "ecl/anchors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ecl::loss {

long simplex_lattice_size(int classes, int resolution) {
  // C(resolution + classes - 1, classes - 1)
  long v = 1;
  for (int i = 1; i <= classes - 1; ++i)
    v = v * (resolution + i) / i;
  return v;
}

namespace {

void enumerate_lattice(int classes, int resolution, std::vector<int>& partial,
                       int remaining, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(partial.size()) == classes - 1) {
    partial.push_back(remaining);
    out.push_back(partial);
    partial.pop_back();
    return;
  }
  for (int i = 0; i <= remaining; ++i) {
    partial.push_back(i);
    enumerate_lattice(classes, resolution, partial, remaining - i, out);
    partial.pop_back();
  }
}

double min_sqdist(const Matrix& anchors) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < anchors.rows; ++i)
    for (int j = i + 1; j < anchors.rows; ++j) {
      double d = 0.0;
      for (int c = 0; c < anchors.cols; ++c) {
        const double t = anchors.at(i, c) - anchors.at(j, c);
        d += t * t;
      }
      best = std::min(best, d);
    }
  return best;
}

}  // namespace

AnchorGrid AnchorGrid::scalar_grid(Paradigm paradigm, int bins, double tau, double epsilon) {
  if (bins < 1) throw std::invalid_argument("scalar_grid: bins must be >= 1");
  if (paradigm == Paradigm::kCanonical)
    throw std::invalid_argument("scalar_grid: canonical paradigm needs simplex anchors");
  AnchorGrid g;
  g.paradigm = paradigm;
  g.anchors = Matrix(bins, 1);
  for (int j = 0; j < bins; ++j) g.anchors.data[j] = (2.0 * j + 1.0) / (2.0 * bins);
  g.tau = tau > 0.0 ? tau : (bins > 1 ? min_sqdist(g.anchors) : 1.0);
  g.epsilon = epsilon;
  return g;
}

AnchorGrid AnchorGrid::canonical(int classes, int resolution, double tau, double epsilon) {
  if (classes < 2) throw std::invalid_argument("canonical grid: need K >= 2");
  if (resolution < 1) throw std::invalid_argument("canonical grid: resolution must be >= 1");
  std::vector<std::vector<int>> cells;
  std::vector<int> partial;
  enumerate_lattice(classes, resolution, partial, resolution, cells);
  AnchorGrid g;
  g.paradigm = Paradigm::kCanonical;
  g.anchors = Matrix(static_cast<int>(cells.size()), classes);
  for (int i = 0; i < g.anchors.rows; ++i)
    for (int c = 0; c < classes; ++c)
      g.anchors.at(i, c) = static_cast<double>(cells[i][c]) / resolution;
  g.tau = tau > 0.0 ? tau : min_sqdist(g.anchors);
  g.epsilon = epsilon;
  return g;
}

int nearest_anchor(const AnchorGrid& grid, const double* point) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < grid.anchors.rows; ++j) {
    double d = 0.0;
    for (int c = 0; c < grid.anchors.cols; ++c) {
      const double t = point[c] - grid.anchors.at(j, c);
      d += t * t;
    }
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace ecl::loss
