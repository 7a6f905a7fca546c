#include <immintrin.h>

#include "simd_common.hpp"

namespace fdrmix::kernels {
namespace {

struct VecAvx2 {
    __m256d v;
    static constexpr int width = 4;

    static VecAvx2 load(const double* p) { return {_mm256_loadu_pd(p)}; }
    static VecAvx2 bc(double x) { return {_mm256_set1_pd(x)}; }
    void store(double* p) const { _mm256_storeu_pd(p, v); }

    friend VecAvx2 operator+(VecAvx2 a, VecAvx2 b) { return {_mm256_add_pd(a.v, b.v)}; }
    friend VecAvx2 operator-(VecAvx2 a, VecAvx2 b) { return {_mm256_sub_pd(a.v, b.v)}; }
    friend VecAvx2 operator*(VecAvx2 a, VecAvx2 b) { return {_mm256_mul_pd(a.v, b.v)}; }
    friend VecAvx2 operator/(VecAvx2 a, VecAvx2 b) { return {_mm256_div_pd(a.v, b.v)}; }

    static VecAvx2 fma(VecAvx2 a, VecAvx2 b, VecAvx2 c) {
        return {_mm256_fmadd_pd(a.v, b.v, c.v)};
    }

    VecAvx2 neg() const { return {_mm256_xor_pd(v, _mm256_set1_pd(-0.0))}; }
    VecAvx2 abs() const { return {_mm256_andnot_pd(_mm256_set1_pd(-0.0), v)}; }
    VecAvx2 min(VecAvx2 b) const { return {_mm256_min_pd(v, b.v)}; }
    VecAvx2 max(VecAvx2 b) const { return {_mm256_max_pd(v, b.v)}; }

    static VecAvx2 round_nearest(VecAvx2 a) {
        return {_mm256_round_pd(a.v, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC)};
    }

    VecAvx2 lt(VecAvx2 b) const { return {_mm256_cmp_pd(v, b.v, _CMP_LT_OQ)}; }
    VecAvx2 le(VecAvx2 b) const { return {_mm256_cmp_pd(v, b.v, _CMP_LE_OQ)}; }
    VecAvx2 ge(VecAvx2 b) const { return {_mm256_cmp_pd(v, b.v, _CMP_GE_OQ)}; }

    static VecAvx2 blend(VecAvx2 mask, VecAvx2 a, VecAvx2 b) {
        return {_mm256_blendv_pd(b.v, a.v, mask.v)};
    }
    static bool any(VecAvx2 mask) { return _mm256_movemask_pd(mask.v) != 0; }
    static int mask_bits(VecAvx2 mask) { return _mm256_movemask_pd(mask.v); }

    // 2^n for integral-valued n in [-1022, 1024]
    static VecAvx2 pow2i(VecAvx2 n) {
        const __m128i i32 = _mm256_cvtpd_epi32(n.v);
        __m256i i64 = _mm256_cvtepi32_epi64(i32);
        i64 = _mm256_add_epi64(i64, _mm256_set1_epi64x(1023));
        i64 = _mm256_slli_epi64(i64, 52);
        return {_mm256_castsi256_pd(i64)};
    }

    double reduce_add() const {
        double b[4];
        store(b);
        return ((b[0] + b[1]) + b[2]) + b[3];
    }
};

const KernelTable kAvx2Table = {
    "avx2",
    simd::exp_batch<VecAvx2>,
    simd::norm_pdf_batch<VecAvx2>,
    simd::plc_conv_batch<VecAvx2>,
    simd::weighted_sums<VecAvx2>,
    simd::weighted_sq_dev<VecAvx2>,
};

} // namespace

bool avx2_supported() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const KernelTable& avx2_kernels() { return kAvx2Table; }

} // namespace fdrmix::kernels
