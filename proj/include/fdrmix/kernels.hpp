#pragma once

#include <cstddef>
#include <vector>

namespace fdrmix::kernels {

/// Piece table for a piecewise log-linear density, struct-of-arrays.
/// Piece k has log-density alpha[k] + beta[k]*z on [lo[k], hi[k]].
struct PlcPieces {
    const double* alpha;
    const double* beta;
    const double* lo;
    const double* hi;
    std::size_t count;
};

/// One ISA variant of the batch kernels. All variants compute the same
/// quantities; SIMD variants may differ from scalar by rounding only and are
/// equivalence-tested against it.
struct KernelTable {
    const char* name;

    /// out[i] = exp(x[i])
    void (*exp_batch)(const double* x, std::size_t n, double* out);

    /// out[i] = phi((z[i]-mu)/sigma)/sigma
    void (*norm_pdf_batch)(const double* z, std::size_t n, double mu, double sigma,
                           double* out);

    /// Gaussian-smoothed piecewise log-linear density, bandwidth a > 0:
    /// out[i] = sum_k exp(alpha_k + beta_k t_i + beta_k^2 a^2/2)
    ///            * [Phi((hi_k - t_i - beta_k a^2)/a) - Phi((lo_k - t_i - beta_k a^2)/a)]
    void (*plc_conv_batch)(const double* t, std::size_t n, const PlcPieces& pieces, double a,
                           double* out);

    /// sums[0] = sum w_i, sums[1] = sum w_i z_i
    void (*weighted_sums)(const double* z, const double* w, std::size_t n, double* sums);

    /// returns sum w_i (z_i - center)^2
    double (*weighted_sq_dev)(const double* z, const double* w, std::size_t n, double center);
};

const KernelTable& scalar_kernels();

#if defined(FDRMIX_HAVE_AVX2)
bool avx2_supported();
const KernelTable& avx2_kernels();
#endif
#if defined(FDRMIX_HAVE_NEON)
const KernelTable& neon_kernels();
#endif

/// Kernel set in use. Picked once per process: FDRMIX_KERNELS=scalar|avx2|neon
/// overrides, otherwise the widest ISA this CPU supports.
const KernelTable& active_kernels();

/// Every variant compiled into this binary and runnable on this CPU
/// (scalar first). Used by the equivalence tests.
std::vector<const KernelTable*> available_kernels();

} // namespace fdrmix::kernels
