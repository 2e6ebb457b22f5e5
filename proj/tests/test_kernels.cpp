#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ecl/kernels.hpp"

using namespace ecl::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(gen);
  return v;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace

TEST_CASE("matmul matches naive reference") {
  std::mt19937_64 gen(1);
  const std::size_t m = 7, k = 13, n = 9;
  const auto a = random_vec(m * k, gen);
  const auto b = random_vec(k * n, gen);
  std::vector<double> naive(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) naive[i * n + j] += a[i * k + p] * b[p * n + j];

  std::vector<double> got(m * n);
  scalar_table().matmul_nn(a.data(), b.data(), got.data(), m, k, n);
  CHECK(rel_diff(got, naive) < 1e-14);

  std::vector<double> at(k * m), bt(n * k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  scalar_table().matmul_tn(at.data(), b.data(), got.data(), m, k, n);
  CHECK(rel_diff(got, naive) < 1e-14);
  scalar_table().matmul_nt(a.data(), bt.data(), got.data(), m, k, n);
  CHECK(rel_diff(got, naive) < 1e-14);
}

TEST_CASE("avx2 kernels match the scalar reference") {
  if (!avx2_available()) {
    MESSAGE("AVX2 unavailable; equivalence test skipped");
    return;
  }
  const KernelTable& s = scalar_table();
  const KernelTable& v = *avx2_table();
  std::mt19937_64 gen(2);

  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 33);
    const std::size_t m = dim(gen), k = dim(gen), n = dim(gen);
    const auto a = random_vec(m * k, gen);
    const auto b = random_vec(k * n, gen);
    std::vector<double> cs(m * n), cv(m * n);

    s.matmul_nn(a.data(), b.data(), cs.data(), m, k, n);
    v.matmul_nn(a.data(), b.data(), cv.data(), m, k, n);
    CHECK(rel_diff(cv, cs) < 1e-13);

    std::vector<double> at(k * m), bt(n * k);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
    s.matmul_tn(at.data(), b.data(), cs.data(), m, k, n);
    v.matmul_tn(at.data(), b.data(), cv.data(), m, k, n);
    CHECK(rel_diff(cv, cs) < 1e-13);
    s.matmul_nt(a.data(), bt.data(), cs.data(), m, k, n);
    v.matmul_nt(a.data(), bt.data(), cv.data(), m, k, n);
    CHECK(rel_diff(cv, cs) < 1e-13);

    const std::size_t len = m * k;
    const auto x = random_vec(len, gen);
    const auto y = random_vec(len, gen);
    std::vector<double> os(len), ov(len);
    s.add(x.data(), y.data(), os.data(), len);
    v.add(x.data(), y.data(), ov.data(), len);
    CHECK(os == ov);
    s.sub(x.data(), y.data(), os.data(), len);
    v.sub(x.data(), y.data(), ov.data(), len);
    CHECK(os == ov);
    s.mul(x.data(), y.data(), os.data(), len);
    v.mul(x.data(), y.data(), ov.data(), len);
    CHECK(os == ov);
    s.div(x.data(), y.data(), os.data(), len);
    v.div(x.data(), y.data(), ov.data(), len);
    CHECK(os == ov);

    os = y;
    ov = y;
    s.axpy(0.37, x.data(), os.data(), len);
    v.axpy(0.37, x.data(), ov.data(), len);
    CHECK(rel_diff(ov, os) < 1e-14);
    s.affine(1.7, -0.3, x.data(), os.data(), len);
    v.affine(1.7, -0.3, x.data(), ov.data(), len);
    CHECK(rel_diff(ov, os) < 1e-14);

    const double dref = s.dot(x.data(), y.data(), len);
    CHECK(std::fabs(dref - v.dot(x.data(), y.data(), len)) < 1e-12 * (1.0 + std::fabs(dref)));
    CHECK(std::fabs(s.sum(x.data(), len) - v.sum(x.data(), len)) < 1e-12 * len);
    CHECK(std::fabs(s.sumsq(x.data(), len) - v.sumsq(x.data(), len)) <
          1e-12 * (1.0 + s.sumsq(x.data(), len)));

    s.relu(x.data(), os.data(), len);
    v.relu(x.data(), ov.data(), len);
    CHECK(os == ov);
    os = y;
    ov = y;
    s.relu_backward(x.data(), y.data(), os.data(), len);
    v.relu_backward(x.data(), y.data(), ov.data(), len);
    CHECK(os == ov);

    const std::size_t bn = dim(gen);
    const auto anchors = random_vec(bn * k, gen);
    std::vector<double> ds(m * bn), dv(m * bn);
    s.pair_sqdist(a.data(), anchors.data(), ds.data(), m, bn, k);
    v.pair_sqdist(a.data(), anchors.data(), dv.data(), m, bn, k);
    CHECK(rel_diff(dv, ds) < 1e-13);
  }
}

TEST_CASE("active table resolves to a known implementation") {
  const KernelTable& t = active();
  const bool is_scalar = &t == &scalar_table();
  const bool is_avx2 = avx2_available() && &t == avx2_table();
  CHECK((is_scalar || is_avx2));
}
