#include <cstdlib>
#include <string_view>

#include "duetsep/simd/kernels.hpp"

namespace duetsep::simd {

const KernelTable& kernels() {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    const char* env = std::getenv("DUETSEP_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelTable* avx2 = avx2_kernels()) return *avx2;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace duetsep::simd
