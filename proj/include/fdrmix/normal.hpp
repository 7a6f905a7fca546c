#pragma once

#include <span>
#include <vector>

namespace fdrmix {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727418;
inline constexpr double kInvSqrt2 = 0.7071067811865475244;

double norm_pdf(double x);
double norm_pdf(double x, double mu, double sigma);
double norm_logpdf(double x, double mu, double sigma);

/// Standard normal CDF, accurate in both tails (erfc-based).
double norm_cdf(double x);

/// log Phi(x), usable down to x ~ -1e6 without underflow.
double log_norm_cdf(double x);

/// Phi(hi) - Phi(lo) for hi >= lo, computed on the side that avoids
/// cancellation of the leading 1.
double norm_cdf_diff(double lo, double hi);

/// log(Phi(hi) - Phi(lo)), stable when both arguments sit in one tail.
double log_norm_cdf_diff(double lo, double hi);

/// Inverse standard normal CDF. Relative error below 1e-14 over
/// p in [1e-300, 1 - 1e-16]; p outside (0,1) throws invalid_input_error.
double norm_quantile(double p);

/// z_i = Phi^{-1}(1 - p_i). Every p must lie strictly in (0,1);
/// a violation reports the offending index.
std::vector<double> probit_transform(std::span<const double> p_values);

} // namespace fdrmix
