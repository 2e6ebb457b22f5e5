#include "ecl/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace ecl::kernels {

#if !defined(ECL_HAVE_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif

bool avx2_available() {
#if defined(ECL_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& resolve() {
  const char* env = std::getenv("ECL_KERNELS");
  if (env != nullptr && std::strlen(env) > 0) {
    if (std::strcmp(env, "scalar") == 0) return scalar_table();
    if (std::strcmp(env, "avx2") == 0) {
      if (!avx2_available())
        throw std::runtime_error("ECL_KERNELS=avx2 requested but AVX2 is unavailable");
      return *avx2_table();
    }
    if (std::strcmp(env, "auto") != 0)
      throw std::runtime_error(std::string("unknown ECL_KERNELS value: ") + env);
  }
  return avx2_available() ? *avx2_table() : scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = resolve();
  return table;
}

}  // namespace ecl::kernels
