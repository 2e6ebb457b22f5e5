#include "ecl/kernels.hpp"

#if defined(ECL_HAVE_AVX2)

#include <immintrin.h>

// AVX2/FMA kernels, 4-wide double lanes. Results may differ from the scalar
// reference in the last bits (FMA contraction, vectorized reduction order);
// the equivalence tests hold them to a relative tolerance.

namespace ecl::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void matmul_nn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(ai[p]);
      const double* bp = b + p * n;
      std::size_t j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(ci + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), cv);
        _mm256_storeu_pd(ci + j, cv);
      }
      for (; j < n; ++j) ci[j] += ai[p] * bp[j];
    }
  }
}

void matmul_tn_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const __m256d av = _mm256_set1_pd(ap[i]);
      double* ci = c + i * n;
      std::size_t j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(ci + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), cv);
        _mm256_storeu_pd(ci + j, cv);
      }
      for (; j < n; ++j) ci[j] += ap[i] * bp[j];
    }
  }
}

void matmul_nt_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t k4 = k & ~std::size_t(3);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      __m256d acc = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p < k4; p += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p),
                              acc);
      double tail = 0.0;
      for (; p < k; ++p) tail += ai[p] * bj[p];
      ci[j] = hsum(acc) + tail;
    }
  }
}

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void div_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_div_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] / b[i];
}

void axpy_avx2(double alpha, const double* x, double* out, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d ov = _mm256_loadu_pd(out + i);
    ov = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), ov);
    _mm256_storeu_pd(out + i, ov);
  }
  for (; i < n; ++i) out[i] += alpha * x[i];
}

void affine_avx2(double alpha, double beta, const double* x, double* out,
                 std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  const __m256d bv = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), bv));
  for (; i < n; ++i) out[i] = alpha * x[i] + beta;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return hsum(acc) + tail;
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i];
  return hsum(acc) + tail;
}

double sumsq_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * a[i];
  return hsum(acc) + tail;
}

void relu_avx2(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(const double* x, const double* g, double* out,
                        std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gv = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), gv));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) out[i] += g[i];
}

void pair_sqdist_avx2(const double* x, const double* a, double* d,
                      std::size_t n, std::size_t b, std::size_t k) {
  const std::size_t k4 = k & ~std::size_t(3);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x + i * k;
    double* di = d + i * b;
    for (std::size_t j = 0; j < b; ++j) {
      const double* aj = a + j * k;
      __m256d acc = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p < k4; p += 4) {
        const __m256d t =
            _mm256_sub_pd(_mm256_loadu_pd(xi + p), _mm256_loadu_pd(aj + p));
        acc = _mm256_fmadd_pd(t, t, acc);
      }
      double tail = 0.0;
      for (; p < k; ++p) {
        const double t = xi[p] - aj[p];
        tail += t * t;
      }
      di[j] = hsum(acc) + tail;
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table = {
      "avx2",
      matmul_nn_avx2,
      matmul_tn_avx2,
      matmul_nt_avx2,
      add_avx2,
      sub_avx2,
      mul_avx2,
      div_avx2,
      axpy_avx2,
      affine_avx2,
      dot_avx2,
      sum_avx2,
      sumsq_avx2,
      relu_avx2,
      relu_backward_avx2,
      pair_sqdist_avx2,
  };
  return &table;
}

}  // namespace ecl::kernels

#endif  // ECL_HAVE_AVX2
