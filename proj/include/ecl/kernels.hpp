#pragma once

#include <cstddef>
#include <string>

// Dense double-precision kernels behind the autodiff engine and the
// soft-binning losses. Every kernel has a scalar reference implementation
// and, on x86-64, an AVX2 variant. The active table is resolved once per
// process: ECL_KERNELS=scalar|avx2 overrides CPU detection.

namespace ecl::kernels {

struct KernelTable {
  const char* name;

  // C[m,n] = A[m,k] * B[k,n]; C must not alias A or B.
  void (*matmul_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
  // C[m,n] = A^T[m,k] * B[k,n] with A stored [k,m].
  void (*matmul_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
  // C[m,n] = A[m,k] * B^T[k,n] with B stored [n,k].
  void (*matmul_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*div)(const double* a, const double* b, double* out, std::size_t n);

  // out[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* out, std::size_t n);
  // out[i] = alpha * x[i] + beta
  void (*affine)(double alpha, double beta, const double* x, double* out,
                 std::size_t n);

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*sumsq)(const double* a, std::size_t n);

  void (*relu)(const double* x, double* out, std::size_t n);
  // out[i] += g[i] where x[i] > 0
  void (*relu_backward)(const double* x, const double* g, double* out,
                        std::size_t n);

  // D[i,j] = squared L2 distance between row i of X [n,k] and row j of A [b,k].
  void (*pair_sqdist)(const double* x, const double* a, double* d,
                      std::size_t n, std::size_t b, std::size_t k);
};

// Table resolved at first use; stable for the process lifetime.
const KernelTable& active();

const KernelTable& scalar_table();
bool avx2_available();           // compiled in AND supported by this CPU
const KernelTable* avx2_table(); // nullptr when unavailable

}  // namespace ecl::kernels
