#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fdrmix/logconcave.hpp"

namespace fdrmix {

struct EmConfig {
    int max_iterations = 200;
    double rel_tol = 1e-6; // on relative observed-data log-likelihood change
    std::uint64_t init_seed = 0;
    bool refit_bandwidth_each_iter = true; // false pins the bandwidth at 0
    bool return_best = true;               // best log-likelihood iterate vs last
    double mle_tol = 1e-10;
    int mle_max_iterations = 500;
};

struct EmIteration {
    double log_likelihood;
    double p0;
    double mu;
    double tau2;
    double bandwidth;
};

struct EmTrace {
    std::vector<EmIteration> iterations;
    bool converged = false;
    int iteration_count = 0;
    bool init_fallback = false;
    int mle_failures = 0;    // M-step solver cap hits (best iterate used)
    int likelihood_dips = 0; // decreases of the observed log-likelihood
};

/// Fitted two-component mixture: p0 * N(mu, tau2) + (1 - p0) * smoothed
/// log-concave alternative.
struct MixtureModel1D {
    double p0;
    double mu;
    double tau2;
    SmoothedLogConcave alternative;

    /// Posterior null probability per observation; identical to the local
    /// false discovery rate.
    std::vector<double> posterior_null(std::span<const double> z) const;
    double log_likelihood(std::span<const double> z) const;
};

struct GaussianInit {
    double p0;
    double mu;
    double tau2;
    double mean_null;
    double mean_alt;
    std::vector<double> gamma; // null-component responsibilities
    bool fallback = false;
};

/// Two-component Gaussian mixture EM (50 iterations, k-means++-style start);
/// the component whose mean is nearer the sample median is the null.
GaussianInit init_gaussian_mixture(std::span<const double> z, std::uint64_t seed);

std::vector<double> e_step(const MixtureModel1D& model, std::span<const double> z);

struct MStepResult {
    double p0;
    double mu;
    double tau2;
    SmoothedLogConcave f1;
    double bandwidth;
    bool bandwidth_clipped;
    int mle_failures;
};

MStepResult m_step(std::span<const double> z, std::span<const double> gamma,
                   const EmConfig& cfg = {});

std::pair<MixtureModel1D, EmTrace> em_fit(std::span<const double> z, const EmConfig& cfg = {});

/// em_fit continuing from caller-supplied initial responsibilities.
std::pair<MixtureModel1D, EmTrace> em_fit_from(std::span<const double> z,
                                               std::span<const double> gamma0,
                                               const EmConfig& cfg = {});

double fdr_eval(const MixtureModel1D& model, double z);
std::vector<double> fdr_eval(const MixtureModel1D& model, std::span<const double> z);

/// decision[i] = (fdr[i] <= cutoff), cutoff in (0,1).
std::vector<bool> threshold_decisions(std::span<const double> fdrs, double cutoff);

} // namespace fdrmix
