#include "fdrmix/exp_dd.hpp"

#include <algorithm>
#include <cmath>

namespace fdrmix {
namespace {

constexpr int kMaxNodes = 8;
constexpr double kClusterGap = 1e-6; // switch to the Taylor branch below this spread

double sinhc(double t) {
    if (std::fabs(t) < 1e-4) {
        const double t2 = t * t;
        return 1.0 + t2 / 6.0 * (1.0 + t2 / 20.0);
    }
    return std::sinh(t) / t;
}

// inv_fact[k] = 1/k!
constexpr double kInvFact[16] = {
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
    1.0 / 87178291200.0,
    1.0 / 1307674368000.0,
};

// Taylor branch for m+1 clustered nodes:
//   dd = e^mu * sum_k h_k(delta) / (k+m)!
// with mu the node mean, so h_1 = 0; truncation after h_3 leaves
// O(spread^4) relative error.
double dd_series(const double* xs, int count) {
    const int m = count - 1;
    double mu = 0.0;
    for (int i = 0; i < count; ++i) mu += xs[i];
    mu /= count;
    double p2 = 0.0, p3 = 0.0;
    for (int i = 0; i < count; ++i) {
        const double d = xs[i] - mu;
        p2 += d * d;
        p3 += d * d * d;
    }
    const double h2 = 0.5 * p2;
    const double h3 = p3 / 3.0;
    return std::exp(mu) * (kInvFact[m] + h2 * kInvFact[m + 2] + h3 * kInvFact[m + 3]);
}

} // namespace

double exp_dd2(double a, double b) {
    const double h = 0.5 * (b - a);
    if (std::fabs(h) < 300.0) return std::exp(0.5 * (a + b)) * sinhc(h);
    // wide spread: the midpoint form would underflow*overflow to NaN
    const double hi = std::max(a, b), lo = std::min(a, b);
    return std::exp(hi) * (-std::expm1(lo - hi)) / (hi - lo);
}

double exp_dd(const double* nodes, int n) {
    if (n == 1) return std::exp(nodes[0]);
    if (n == 2) return exp_dd2(nodes[0], nodes[1]);

    double xs[kMaxNodes];
    std::copy(nodes, nodes + n, xs);
    std::sort(xs, xs + n);

    // Triangular tableau; each cell falls back to Taylor when its node span
    // is too tight for the difference quotient.
    double tab[kMaxNodes][kMaxNodes];
    for (int i = 0; i + 1 < n; ++i) tab[1][i] = exp_dd2(xs[i], xs[i + 1]);
    for (int k = 2; k < n; ++k) {
        for (int i = 0; i + k < n; ++i) {
            const double gap = xs[i + k] - xs[i];
            if (gap < kClusterGap) {
                tab[k][i] = dd_series(xs + i, k + 1);
            } else {
                tab[k][i] = (tab[k - 1][i + 1] - tab[k - 1][i]) / gap;
            }
        }
    }
    return tab[n - 1][0];
}

SegExp seg_exp_all(double a, double b) {
    SegExp r;
    {
        r.val = exp_dd2(a, b);
    }
    {
        const double n3a[3] = {a, a, b};
        const double n3b[3] = {a, b, b};
        r.da = exp_dd(n3a, 3);
        r.db = exp_dd(n3b, 3);
    }
    {
        const double n4aa[4] = {a, a, a, b};
        const double n4ab[4] = {a, a, b, b};
        const double n4bb[4] = {a, b, b, b};
        r.daa = 2.0 * exp_dd(n4aa, 4);
        r.dab = exp_dd(n4ab, 4);
        r.dbb = 2.0 * exp_dd(n4bb, 4);
    }
    return r;
}

} // namespace fdrmix
