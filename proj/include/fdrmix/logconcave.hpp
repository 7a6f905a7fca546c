#pragma once

#include <span>
#include <string>
#include <vector>

#include "fdrmix/errors.hpp"

namespace fdrmix {

/// Sorted, deduplicated weighted observations. Duplicates are merged by
/// summing weights; weights below 1e-12 of the maximum are dropped; the
/// remainder is renormalized to sum to one.
class WeightedSample1D {
public:
    static WeightedSample1D from_points(std::span<const double> z, std::span<const double> w);
    static WeightedSample1D equal_weights(std::span<const double> z);

    const std::vector<double>& points() const { return z_; }
    const std::vector<double>& weights() const { return w_; }
    std::size_t size() const { return z_.size(); }

    double mean() const;
    /// Weight-normalized second central moment.
    double variance() const;

private:
    WeightedSample1D() = default;
    std::vector<double> z_, w_;
};

/// Unbiased (N-1 denominator) variance of equally weighted observations.
double sample_variance_unbiased(std::span<const double> z);

/// Log-concave density with piecewise linear log-density: knots t_1 < ... < t_m,
/// log-density values at the knots, zero outside [t_1, t_m]. Knot-to-knot
/// slopes are non-increasing for a valid fit.
struct PiecewiseLogLinearDensity {
    std::vector<double> knots;
    std::vector<double> log_values;

    double support_lo() const { return knots.front(); }
    double support_hi() const { return knots.back(); }

    double log_pdf(double z) const; // -inf outside the support
    double pdf(double z) const;
    double cdf(double z) const;
    double integral() const; // closed form per piece
    double mean() const;
    double variance() const;
};

class mle_non_convergence_error : public non_convergence_error {
public:
    mle_non_convergence_error(const std::string& msg, PiecewiseLogLinearDensity best)
        : non_convergence_error(msg), best_iterate(std::move(best)) {}

    PiecewiseLogLinearDensity best_iterate;
};

/// Weighted log-concave maximum likelihood: maximizes sum_i w_i phi(z_i) over
/// concave phi with integral(exp phi) = 1. Active-set solver over candidate
/// knots; first-order optimality residual driven below tol.
PiecewiseLogLinearDensity logconcave_mle(const WeightedSample1D& sample, double tol = 1e-10,
                                         int max_iterations = 500);

inline double mle_variance(const PiecewiseLogLinearDensity& f) { return f.variance(); }

struct BandwidthChoice {
    double value;
    bool clipped; // sample variance fell below the MLE variance numerically
};

/// a = sqrt(max(sample_variance - mle_variance, 0)).
BandwidthChoice select_bandwidth(double sample_variance, double mle_variance);

/// Log-concave MLE convolved with a N(0, a^2) kernel. a = 0 degenerates to
/// the base density.
class SmoothedLogConcave {
public:
    SmoothedLogConcave() = default;
    SmoothedLogConcave(PiecewiseLogLinearDensity base, double bandwidth);

    const PiecewiseLogLinearDensity& base() const { return base_; }
    double bandwidth() const { return a_; }

    double pdf(double t) const;
    void pdf_batch(std::span<const double> t, std::span<double> out) const;
    double cdf(double t) const;
    double mean() const;
    double variance() const; // base variance + a^2

private:
    PiecewiseLogLinearDensity base_;
    double a_ = 0.0;
    // per-piece log-density alpha + beta*z on [lo, hi]
    std::vector<double> alpha_, beta_, lo_, hi_;
};

SmoothedLogConcave smooth(const PiecewiseLogLinearDensity& f, double a);

inline double smoothed_pdf(const SmoothedLogConcave& g, double t) { return g.pdf(t); }

} // namespace fdrmix
