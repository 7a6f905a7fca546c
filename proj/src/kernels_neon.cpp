#include <arm_neon.h>

#include "simd_common.hpp"

namespace fdrmix::kernels {
namespace {

struct VecNeon {
    float64x2_t v;
    static constexpr int width = 2;

    static VecNeon load(const double* p) { return {vld1q_f64(p)}; }
    static VecNeon bc(double x) { return {vdupq_n_f64(x)}; }
    void store(double* p) const { vst1q_f64(p, v); }

    friend VecNeon operator+(VecNeon a, VecNeon b) { return {vaddq_f64(a.v, b.v)}; }
    friend VecNeon operator-(VecNeon a, VecNeon b) { return {vsubq_f64(a.v, b.v)}; }
    friend VecNeon operator*(VecNeon a, VecNeon b) { return {vmulq_f64(a.v, b.v)}; }
    friend VecNeon operator/(VecNeon a, VecNeon b) { return {vdivq_f64(a.v, b.v)}; }

    static VecNeon fma(VecNeon a, VecNeon b, VecNeon c) { return {vfmaq_f64(c.v, a.v, b.v)}; }

    VecNeon neg() const { return {vnegq_f64(v)}; }
    VecNeon abs() const { return {vabsq_f64(v)}; }
    VecNeon min(VecNeon b) const { return {vminq_f64(v, b.v)}; }
    VecNeon max(VecNeon b) const { return {vmaxq_f64(v, b.v)}; }

    static VecNeon round_nearest(VecNeon a) { return {vrndnq_f64(a.v)}; }

    VecNeon lt(VecNeon b) const { return {vreinterpretq_f64_u64(vcltq_f64(v, b.v))}; }
    VecNeon le(VecNeon b) const { return {vreinterpretq_f64_u64(vcleq_f64(v, b.v))}; }
    VecNeon ge(VecNeon b) const { return {vreinterpretq_f64_u64(vcgeq_f64(v, b.v))}; }

    static VecNeon blend(VecNeon mask, VecNeon a, VecNeon b) {
        return {vbslq_f64(vreinterpretq_u64_f64(mask.v), a.v, b.v)};
    }
    static bool any(VecNeon mask) { return mask_bits(mask) != 0; }
    static int mask_bits(VecNeon mask) {
        const uint64x2_t m = vreinterpretq_u64_f64(mask.v);
        return (vgetq_lane_u64(m, 0) ? 1 : 0) | (vgetq_lane_u64(m, 1) ? 2 : 0);
    }

    static VecNeon pow2i(VecNeon n) {
        int64x2_t i = vcvtnq_s64_f64(n.v);
        i = vaddq_s64(i, vdupq_n_s64(1023));
        i = vshlq_n_s64(i, 52);
        return {vreinterpretq_f64_s64(i)};
    }

    double reduce_add() const {
        return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1);
    }
};

const KernelTable kNeonTable = {
    "neon",
    simd::exp_batch<VecNeon>,
    simd::norm_pdf_batch<VecNeon>,
    simd::plc_conv_batch<VecNeon>,
    simd::weighted_sums<VecNeon>,
    simd::weighted_sq_dev<VecNeon>,
};

} // namespace

const KernelTable& neon_kernels() { return kNeonTable; }

} // namespace fdrmix::kernels
