#include "fdrmix/normal.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fdrmix/errors.hpp"

namespace fdrmix {

double norm_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double norm_pdf(double x, double mu, double sigma) {
    const double u = (x - mu) / sigma;
    return kInvSqrt2Pi / sigma * std::exp(-0.5 * u * u);
}

double norm_logpdf(double x, double mu, double sigma) {
    const double u = (x - mu) / sigma;
    return -0.5 * u * u - std::log(sigma) - kLogSqrt2Pi;
}

double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

double log_norm_cdf(double x) {
    if (x > -36.0) {
        return std::log(0.5 * std::erfc(-x * kInvSqrt2));
    }
    // Asymptotic expansion of the lower tail: Phi(x) ~ phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - ...)
    const double x2 = x * x;
    const double corr = std::log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
    return -0.5 * x2 - std::log(-x) - kLogSqrt2Pi + corr;
}

double norm_cdf_diff(double lo, double hi) {
    if (lo + hi >= 0.0) {
        return 0.5 * (std::erfc(lo * kInvSqrt2) - std::erfc(hi * kInvSqrt2));
    }
    return 0.5 * (std::erfc(-hi * kInvSqrt2) - std::erfc(-lo * kInvSqrt2));
}

double log_norm_cdf_diff(double lo, double hi) {
    // Phi(hi) - Phi(lo) = Q(lo) - Q(hi) with Q the upper tail; pick the side
    // whose larger term is the tail value, not 1-minus-tail.
    double la, lb; // log of larger and smaller term
    if (lo + hi >= 0.0) {
        la = log_norm_cdf(-lo);
        lb = log_norm_cdf(-hi);
    } else {
        la = log_norm_cdf(hi);
        lb = log_norm_cdf(lo);
    }
    const double d = lb - la;
    return la + ((d < -700.0) ? 0.0 : std::log1p(-std::exp(d)));
}

double norm_quantile(double p) {
    if (!(p > 0.0) || !(p < 1.0)) {
        throw invalid_input_error("norm_quantile: p must lie strictly in (0,1), got " +
                                  std::to_string(p));
    }
    const bool upper = p > 0.5;
    const double r = upper ? 1.0 - p : p; // r in (0, 0.5]

    double z;
    if (r > 0.05) {
        // Central start; Halley repairs the rest.
        const double q = r - 0.5;
        z = q * 2.50662827463100050; // sqrt(2*pi)
        z += z * z * z * 0.27;
    } else {
        // Tail start from -2 log r = z^2 + 2 log z + log(2*pi), solved by fixed point.
        const double l = -2.0 * std::log(r);
        z = std::sqrt(l);
        for (int i = 0; i < 4; ++i) {
            z = std::sqrt(l - 2.0 * std::log(z) - 1.8378770664093454836);
        }
        z = -z;
    }

    // Halley iterations on Phi(z) - r = 0.
    for (int i = 0; i < 4; ++i) {
        const double err = norm_cdf(z) - r;
        const double u = err / norm_pdf(z);
        z -= u / (1.0 + 0.5 * u * z);
    }
    return upper ? -z : z;
}

std::vector<double> probit_transform(std::span<const double> p_values) {
    std::vector<double> z;
    z.reserve(p_values.size());
    for (std::size_t i = 0; i < p_values.size(); ++i) {
        const double p = p_values[i];
        if (!std::isfinite(p) || !(p > 0.0) || !(p < 1.0)) {
            throw invalid_input_error("probit_transform: p-value at index " + std::to_string(i) +
                                      " is outside (0,1): " + std::to_string(p));
        }
        // Phi^{-1}(1-p) = -Phi^{-1}(p); the right-hand form keeps small p accurate.
        z.push_back(-norm_quantile(p));
    }
    return z;
}

} // namespace fdrmix
