#pragma once

// Test-support oracle: global minimizer of one bin's auxiliary objective
//   G(u_s, u_t) = w ||u_s - u_t|| + sum omega ||u_s - p||^2 + sum omega ||u_t - p||^2
// by stationary-point candidates refined with Nelder-Mead. Independent of the
// proximal implementation it checks.

#include <cmath>
#include <utility>
#include <vector>

namespace ecl::testsupport {

// G_j from the auxiliary objective, for the proximal oracle.
double g_objective(const std::vector<double>& us, const std::vector<double>& ut,
                   const std::vector<double>& ms, double ns,
                   const std::vector<double>& mt, double nt, double w) {
  // sum_i omega ||u - p||^2 = n||u||^2 - 2 u.m + const; constants dropped.
  double norm = 0, qs = 0, qt = 0;
  for (std::size_t c = 0; c < us.size(); ++c) {
    norm += (us[c] - ut[c]) * (us[c] - ut[c]);
    qs += ns * us[c] * us[c] - 2.0 * us[c] * ms[c];
    qt += nt * ut[c] * ut[c] - 2.0 * ut[c] * mt[c];
  }
  return w * std::sqrt(norm) + qs + qt;
}

// Derivative-free descent for the proximal oracle: Nelder-Mead over the
// stacked (u_s, u_t) plus the two stationary-point candidates.
std::pair<std::vector<double>, std::vector<double>> brute_force_min(
    const std::vector<double>& ms, double ns, const std::vector<double>& mt, double nt,
    double w) {
  const std::size_t k = ms.size();
  auto eval = [&](const std::vector<double>& z) {
    std::vector<double> us(z.begin(), z.begin() + k), ut(z.begin() + k, z.end());
    return g_objective(us, ut, ms, ns, mt, nt, w);
  };

  // Candidate 1: independent means with the norm coupling along their gap.
  std::vector<double> mu_s(k), mu_t(k);
  for (std::size_t c = 0; c < k; ++c) {
    mu_s[c] = ms[c] / ns;
    mu_t[c] = mt[c] / nt;
  }
  double gap = 0;
  for (std::size_t c = 0; c < k; ++c) gap += (mu_s[c] - mu_t[c]) * (mu_s[c] - mu_t[c]);
  gap = std::sqrt(gap);
  std::vector<double> best;
  if (gap > 0) {
    const double shrink_amount = 0.5 * w * (1.0 / ns + 1.0 / nt);
    if (gap > shrink_amount) {
      best.resize(2 * k);
      for (std::size_t c = 0; c < k; ++c) {
        const double dir = (mu_s[c] - mu_t[c]) / gap;
        best[c] = mu_s[c] - 0.5 * (w / ns) * dir;
        best[k + c] = mu_t[c] + 0.5 * (w / nt) * dir;
      }
    }
  }
  // Candidate 2: tied point at the count-weighted mean.
  std::vector<double> tied(2 * k);
  for (std::size_t c = 0; c < k; ++c)
    tied[c] = tied[k + c] = (ms[c] + mt[c]) / (ns + nt);
  if (best.empty() || eval(tied) < eval(best)) best = tied;

  // Nelder-Mead refinement from the best candidate.
  const std::size_t dim = 2 * k;
  std::vector<std::vector<double>> simplex(dim + 1, best);
  for (std::size_t i = 0; i < dim; ++i) simplex[i + 1][i] += 0.05;
  std::vector<double> val(dim + 1);
  for (std::size_t i = 0; i <= dim; ++i) val[i] = eval(simplex[i]);
  for (int iter = 0; iter < 4000; ++iter) {
    std::size_t hi = 0, lo = 0;
    for (std::size_t i = 1; i <= dim; ++i) {
      if (val[i] > val[hi]) hi = i;
      if (val[i] < val[lo]) lo = i;
    }
    if (val[hi] - val[lo] < 1e-16) break;
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i = 0; i <= dim; ++i)
      if (i != hi)
        for (std::size_t c = 0; c < dim; ++c) centroid[c] += simplex[i][c] / dim;
    std::vector<double> refl(dim);
    for (std::size_t c = 0; c < dim; ++c) refl[c] = 2 * centroid[c] - simplex[hi][c];
    const double fr = eval(refl);
    if (fr < val[lo]) {
      std::vector<double> exp_(dim);
      for (std::size_t c = 0; c < dim; ++c) exp_[c] = 3 * centroid[c] - 2 * simplex[hi][c];
      const double fe = eval(exp_);
      simplex[hi] = fe < fr ? exp_ : refl;
      val[hi] = std::min(fe, fr);
    } else if (fr < val[hi]) {
      simplex[hi] = refl;
      val[hi] = fr;
    } else {
      std::vector<double> con(dim);
      for (std::size_t c = 0; c < dim; ++c) con[c] = 0.5 * (centroid[c] + simplex[hi][c]);
      const double fc = eval(con);
      if (fc < val[hi]) {
        simplex[hi] = con;
        val[hi] = fc;
      } else {
        for (std::size_t i = 0; i <= dim; ++i) {
          if (i == lo) continue;
          for (std::size_t c = 0; c < dim; ++c)
            simplex[i][c] = 0.5 * (simplex[i][c] + simplex[lo][c]);
          val[i] = eval(simplex[i]);
        }
      }
    }
  }
  std::size_t lo = 0;
  for (std::size_t i = 1; i <= dim; ++i)
    if (val[i] < val[lo]) lo = i;
  return {{simplex[lo].begin(), simplex[lo].begin() + k},
          {simplex[lo].begin() + k, simplex[lo].end()}};
}

}  // namespace ecl::testsupport
