// Shared bodies for the SIMD kernel variants. Included only by the per-ISA
// translation units (kernels_avx2.cpp, kernels_neon.cpp), which supply a
// vector wrapper type V with the operations used below. The polynomial
// constants are Chebyshev fits in mapped variables; max relative fit error
// is ~4e-14, verified against std::erfc by the kernel equivalence tests.
#pragma once

#include <cmath>
#include <cstddef>

#include "fdrmix/kernels.hpp"
#include "fdrmix/normal.hpp"

namespace fdrmix::kernels::simd {

// erf(x)/x as a polynomial in t = 2x^2 - 1, x in [0, 1]
constexpr double kErfPolyA[13] = {
    9.65468738669865378e-01, -1.40536089022714417e-01, 1.98524966890696354e-02,
    -2.28548556115195679e-03, 2.17517155199634555e-04, -1.75371694104858752e-05,
    1.22338610993657843e-06, -7.51157469255833029e-08, 4.10934127295506373e-09,
    -2.03481791606733139e-10, 1.49853469075813433e-11, -3.91204591302328154e-13,
    -1.96258922129966325e-12,
};

// erfcx(1/u) for u in [1/27.5, 0.22], t mapped linearly to [-1, 1]
constexpr double kErfcxB1[13] = {
    7.17387997576165309e-02, 5.05757675585234850e-02, -8.45308969951812572e-04,
    -1.71349994914326951e-04, 1.46942529258622358e-05, 1.02340527930495452e-06,
    -2.95090467186429335e-07, 7.83074250357895384e-09, 5.49600725270233938e-09,
    -8.17551508985136904e-10, -4.75033028420042422e-11, 2.93281673819476418e-11,
    -2.60565120183527083e-12,
};

// erfcx(1/u) for u in [0.22, 1], t mapped linearly to [-1, 1]
constexpr double kErfcxB2[21] = {
    3.00179800624253368e-01, 1.51119077654536832e-01, -2.65157822587483126e-02,
    2.50686997887632690e-03, 6.24747699917134274e-04, -4.60643056520309918e-04,
    1.61783607855823624e-04, -3.52116360308873532e-05, 6.65771927641083094e-07,
    4.00722241402369970e-06, -2.50635995660235208e-06, 1.00816993559390714e-06,
    -2.83830592335052456e-07, 3.11589514787103735e-08, 2.39479764556617009e-08,
    -1.70606214951174141e-08, 8.41269246985210907e-09, -6.95251624221445276e-09,
    2.83641600540279302e-09, 8.95162543230198279e-10, -6.70123702748595960e-10,
};

constexpr double kExpInvFact[14] = {
    1.0,
    1.0,
    0.5,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
    1.0 / 6227020800.0,
};

template <class V, int N>
inline V horner(const double (&c)[N], V t) {
    V p = V::bc(c[N - 1]);
    for (int k = N - 2; k >= 0; --k) p = V::fma(p, t, V::bc(c[k]));
    return p;
}

template <class V>
inline V vexp(V x) {
    const V xc = x.max(V::bc(-745.0)).min(V::bc(709.0));
    const V n = V::round_nearest(xc * V::bc(1.44269504088896340736));
    // fdlibm hi/lo split of ln 2
    V r = V::fma(n, V::bc(-6.93147180369123816490e-01), xc);
    r = V::fma(n, V::bc(-1.90821492927058770002e-10), r);
    const V p = horner(kExpInvFact, r);
    V res = p * V::pow2i(n);
    res = V::blend(x.lt(V::bc(-708.0)), V::bc(0.0), res);
    return res;
}

template <class V>
inline V verfc(V x) {
    const V ax = x.abs();
    const V s = ax * ax;

    // |x| <= 1: erfc = 1 - x*PA(2x^2-1)
    const V tA = V::fma(s, V::bc(2.0), V::bc(-1.0));
    const V resA = V::fma((ax * horner(kErfPolyA, tA)).neg(), V::bc(1.0), V::bc(1.0));

    // |x| > 1: erfc = exp(-x^2) * erfcx, erfcx by branch polynomial in 1/x
    const V u = V::bc(1.0) / ax.max(V::bc(1e-300));
    constexpr double b1lo = 1.0 / 27.5, b1hi = 0.22;
    const V t1 = V::fma(u, V::bc(2.0 / (b1hi - b1lo)), V::bc(-(b1hi + b1lo) / (b1hi - b1lo)));
    const V t2 = V::fma(u, V::bc(2.0 / 0.78), V::bc(-1.22 / 0.78));
    const V pB = V::blend(u.lt(V::bc(0.22)), horner(kErfcxB1, t1), horner(kErfcxB2, t2));
    const V e = V::fma(ax, ax, s.neg()); // rounding error of s = x*x
    const V em = vexp(s.neg()) * (V::bc(1.0) - e);
    const V resB = em * pB;

    V res = V::blend(ax.le(V::bc(1.0)), resA, resB);
    res = V::blend(x.lt(V::bc(0.0)), V::bc(2.0) - res, res);
    return res;
}

template <class V>
inline void exp_batch(const double* x, std::size_t n, double* out) {
    constexpr int W = V::width;
    std::size_t i = 0;
    for (; i + W <= n; i += W) vexp(V::load(x + i)).store(out + i);
    if (i < n) {
        double bx[W] = {0}, bo[W];
        for (std::size_t j = i; j < n; ++j) bx[j - i] = x[j];
        vexp(V::load(bx)).store(bo);
        for (std::size_t j = i; j < n; ++j) out[j] = bo[j - i];
    }
}

template <class V>
inline void norm_pdf_batch(const double* z, std::size_t n, double mu, double sigma,
                           double* out) {
    constexpr int W = V::width;
    const double inv = 1.0 / sigma;
    const V vmu = V::bc(mu), vinv = V::bc(inv);
    const V vscale = V::bc(kInvSqrt2Pi * inv);
    auto block = [&](V vz) {
        const V u = (vz - vmu) * vinv;
        return vscale * vexp(u * u * V::bc(-0.5));
    };
    std::size_t i = 0;
    for (; i + W <= n; i += W) block(V::load(z + i)).store(out + i);
    if (i < n) {
        double bz[W] = {0}, bo[W];
        for (std::size_t j = i; j < n; ++j) bz[j - i] = z[j];
        block(V::load(bz)).store(bo);
        for (std::size_t j = i; j < n; ++j) out[j] = bo[j - i];
    }
}

template <class V>
inline void plc_conv_batch(const double* t, std::size_t n, const PlcPieces& pc, double a,
                           double* out) {
    constexpr int W = V::width;
    const double inv_a = 1.0 / a;
    const double a2 = a * a;

    auto block = [&](V vt) {
        V acc = V::bc(0.0);
        for (std::size_t k = 0; k < pc.count; ++k) {
            const double beta = pc.beta[k];
            const double ba2 = beta * a2;
            const V vg = V::fma(V::bc(beta), vt, V::bc(pc.alpha[k] + 0.5 * beta * ba2));
            const V alo = (V::bc(pc.lo[k] - ba2) - vt) * V::bc(inv_a);
            const V ahi = (V::bc(pc.hi[k] - ba2) - vt) * V::bc(inv_a);
            const V pos = (alo + ahi).ge(V::bc(0.0));
            const V uu = V::blend(pos, alo, ahi.neg()) * V::bc(kInvSqrt2);
            const V vv = V::blend(pos, ahi, alo.neg()) * V::bc(kInvSqrt2);
            const V dif = V::bc(0.5) * (verfc(uu) - verfc(vv));
            V term = vexp(vg) * dif;
            const V over = vg.ge(V::bc(690.0));
            if (V::any(over)) {
                double gs[W], los[W], his[W], tm[W];
                vg.store(gs);
                alo.store(los);
                ahi.store(his);
                term.store(tm);
                const int bits = V::mask_bits(over);
                for (int lane = 0; lane < W; ++lane) {
                    if (bits & (1 << lane)) {
                        tm[lane] = std::exp(gs[lane] + log_norm_cdf_diff(los[lane], his[lane]));
                    }
                }
                term = V::load(tm);
            }
            acc = acc + term;
        }
        return acc;
    };

    std::size_t i = 0;
    for (; i + W <= n; i += W) block(V::load(t + i)).store(out + i);
    if (i < n) {
        double bt[W] = {0}, bo[W];
        for (std::size_t j = i; j < n; ++j) bt[j - i] = t[j];
        block(V::load(bt)).store(bo);
        for (std::size_t j = i; j < n; ++j) out[j] = bo[j - i];
    }
}

template <class V>
inline void weighted_sums(const double* z, const double* w, std::size_t n, double* sums) {
    constexpr int W = V::width;
    V accw = V::bc(0.0), accwz = V::bc(0.0);
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        const V vw = V::load(w + i);
        accw = accw + vw;
        accwz = V::fma(vw, V::load(z + i), accwz);
    }
    double sw = accw.reduce_add();
    double swz = accwz.reduce_add();
    for (; i < n; ++i) {
        sw += w[i];
        swz += w[i] * z[i];
    }
    sums[0] = sw;
    sums[1] = swz;
}

template <class V>
inline double weighted_sq_dev(const double* z, const double* w, std::size_t n, double center) {
    constexpr int W = V::width;
    const V vc = V::bc(center);
    V acc = V::bc(0.0);
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        const V d = V::load(z + i) - vc;
        acc = V::fma(V::load(w + i) * d, d, acc);
    }
    double s = acc.reduce_add();
    for (; i < n; ++i) {
        const double d = z[i] - center;
        s += w[i] * d * d;
    }
    return s;
}

} // namespace fdrmix::kernels::simd
