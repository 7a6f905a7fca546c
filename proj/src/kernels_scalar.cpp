#include <cmath>
#include <cstddef>

#include "fdrmix/kernels.hpp"
#include "fdrmix/normal.hpp"

namespace fdrmix::kernels {
namespace {

void exp_batch_scalar(const double* x, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void norm_pdf_batch_scalar(const double* z, std::size_t n, double mu, double sigma,
                           double* out) {
    const double inv = 1.0 / sigma;
    const double scale = kInvSqrt2Pi * inv;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (z[i] - mu) * inv;
        out[i] = scale * std::exp(-0.5 * u * u);
    }
}

void plc_conv_batch_scalar(const double* t, std::size_t n, const PlcPieces& p, double a,
                           double* out) {
    const double inv_a = 1.0 / a;
    const double a2 = a * a;
    for (std::size_t i = 0; i < n; ++i) {
        const double ti = t[i];
        double acc = 0.0;
        for (std::size_t k = 0; k < p.count; ++k) {
            const double ba2 = p.beta[k] * a2;
            const double g = p.alpha[k] + p.beta[k] * ti + 0.5 * p.beta[k] * ba2;
            const double alo = (p.lo[k] - ti - ba2) * inv_a;
            const double ahi = (p.hi[k] - ti - ba2) * inv_a;
            if (g < 690.0) {
                acc += std::exp(g) * norm_cdf_diff(alo, ahi);
            } else {
                // Steep piece: keep the product in log space.
                acc += std::exp(g + log_norm_cdf_diff(alo, ahi));
            }
        }
        out[i] = acc;
    }
}

void weighted_sums_scalar(const double* z, const double* w, std::size_t n, double* sums) {
    double sw = 0.0, swz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        swz += w[i] * z[i];
    }
    sums[0] = sw;
    sums[1] = swz;
}

double weighted_sq_dev_scalar(const double* z, const double* w, std::size_t n,
                              double center) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = z[i] - center;
        acc += w[i] * d * d;
    }
    return acc;
}

const KernelTable kScalarTable = {
    "scalar",
    exp_batch_scalar,
    norm_pdf_batch_scalar,
    plc_conv_batch_scalar,
    weighted_sums_scalar,
    weighted_sq_dev_scalar,
};

} // namespace

const KernelTable& scalar_kernels() { return kScalarTable; }

} // namespace fdrmix::kernels
