#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "fdrmix/mixture.hpp"
#include "fdrmix/tent2d.hpp"

namespace fdrmix {

/// Bivariate mixture: p0 * N(mu, cov) + (1 - p0) * smoothed tent density.
struct MixtureModel2D {
    double p0;
    Vec2 mu;
    Mat2 cov;
    SmoothedTent2D alternative;

    std::vector<double> posterior_null(std::span<const Vec2> z) const;
    double log_likelihood(std::span<const Vec2> z) const;
};

struct GaussianInit2D {
    double p0;
    Vec2 mu;
    Mat2 cov;
    Vec2 mean_alt;
    std::vector<double> gamma;
    bool fallback = false;
};

GaussianInit2D init_gaussian_mixture_2d(std::span<const Vec2> z, std::uint64_t seed);

std::vector<double> e_step_2d(const MixtureModel2D& model, std::span<const Vec2> z);

/// Warm-start store for the tent poles, keyed by point coordinates.
using TentWarmStart = std::map<std::pair<double, double>, double>;

struct MStepResult2D {
    double p0;
    Vec2 mu;
    Mat2 cov;
    SmoothedTent2D f1;
    Mat2 bandwidth;
    int mle_failures;
};

MStepResult2D m_step_2d(std::span<const Vec2> z, std::span<const double> gamma,
                        const EmConfig& cfg = {}, TentWarmStart* warm = nullptr);

std::pair<MixtureModel2D, EmTrace> em_fit_2d(std::span<const Vec2> z,
                                             const EmConfig& cfg = {});

double fdr_eval_2d(const MixtureModel2D& model, Vec2 z);
std::vector<double> fdr_eval_2d(const MixtureModel2D& model, std::span<const Vec2> z);

} // namespace fdrmix
