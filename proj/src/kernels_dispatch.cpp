#include <cstdlib>
#include <cstring>

#include "fdrmix/kernels.hpp"

namespace fdrmix::kernels {
namespace {

const KernelTable* pick() {
    const char* env = std::getenv("FDRMIX_KERNELS");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_kernels();
#if defined(FDRMIX_HAVE_AVX2)
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return &avx2_kernels();
#endif
#if defined(FDRMIX_HAVE_NEON)
        if (std::strcmp(env, "neon") == 0) return &neon_kernels();
#endif
        if (std::strcmp(env, "auto") != 0) return &scalar_kernels();
    }
#if defined(FDRMIX_HAVE_AVX2)
    if (avx2_supported()) return &avx2_kernels();
#endif
#if defined(FDRMIX_HAVE_NEON)
    return &neon_kernels();
#else
    return &scalar_kernels();
#endif
}

} // namespace

const KernelTable& active_kernels() {
    static const KernelTable* table = pick();
    return *table;
}

std::vector<const KernelTable*> available_kernels() {
    std::vector<const KernelTable*> v;
    v.push_back(&scalar_kernels());
#if defined(FDRMIX_HAVE_AVX2)
    if (avx2_supported()) v.push_back(&avx2_kernels());
#endif
#if defined(FDRMIX_HAVE_NEON)
    v.push_back(&neon_kernels());
#endif
    return v;
}

} // namespace fdrmix::kernels
