#include "fdrmix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fdrmix/normal.hpp"
#include "fdrmix/rng.hpp"

namespace fdrmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double quantile_sorted(const std::vector<double>& s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= s.size()) return s.back();
    const double frac = pos - static_cast<double>(i);
    return s[i] * (1.0 - frac) + s[i + 1] * frac;
}

void check_finite(std::span<const double> z, const char* who) {
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i])) {
            throw invalid_input_error(std::string(who) + ": non-finite z at index " +
                                      std::to_string(i));
        }
    }
}

// gamma_i = p0 f0 / (p0 f0 + (1-p0) f1), evaluated in log space. Shared by
// the E-step and fdr evaluation so the two are the same formula.
std::vector<double> posterior_from(const double p0, const double mu, const double tau2,
                                   const SmoothedLogConcave& alt, std::span<const double> z) {
    const double sigma = std::sqrt(tau2);
    const double lp0 = std::log(p0);
    const double lp1 = std::log1p(-p0);
    std::vector<double> f1(z.size());
    alt.pdf_batch(z, f1);
    std::vector<double> g(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double lg0 = lp0 + norm_logpdf(z[i], mu, sigma);
        if (f1[i] <= 0.0) {
            g[i] = 1.0;
            continue;
        }
        const double lg1 = lp1 + std::log(f1[i]);
        const double m = std::max(lg0, lg1);
        const double e0 = std::exp(lg0 - m);
        g[i] = e0 / (e0 + std::exp(lg1 - m));
    }
    return g;
}

} // namespace

std::vector<double> MixtureModel1D::posterior_null(std::span<const double> z) const {
    check_finite(z, "posterior_null");
    return posterior_from(p0, mu, tau2, alternative, z);
}

double MixtureModel1D::log_likelihood(std::span<const double> z) const {
    const double sigma = std::sqrt(tau2);
    const double lp0 = std::log(p0);
    const double lp1 = std::log1p(-p0);
    std::vector<double> f1(z.size());
    alternative.pdf_batch(z, f1);
    double ll = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double lg0 = lp0 + norm_logpdf(z[i], mu, sigma);
        if (f1[i] <= 0.0) {
            ll += lg0;
            continue;
        }
        const double lg1 = lp1 + std::log(f1[i]);
        const double m = std::max(lg0, lg1);
        ll += m + std::log(std::exp(lg0 - m) + std::exp(lg1 - m));
    }
    return ll;
}

namespace {

struct Gmm2 {
    double pi1, m1, v1, m2, v2;
    double loglik;
    bool degenerate;
};

// EM for a two-component Gaussian mixture from the given centers and common
// start variance, run to likelihood stationarity. With anchor_null the first
// component's mean and variance stay fixed at (c1, v0), central-matching
// style; only its weight and the second component move.
Gmm2 fit_gmm2(std::span<const double> z, double c1, double c2, double v0,
              std::vector<double>& r, bool anchor_null = false) {
    const std::size_t n = z.size();
    Gmm2 g{0.5, c1, v0, c2, v0, -kInf, false};
    if (!(c2 != c1) || !(v0 > 0.0)) {
        g.degenerate = true;
        return g;
    }
    double m1 = c1, m2 = c2, v1 = v0, v2 = v0, pi1 = 0.5;

    double ll = -kInf;
    for (int it = 0; it < 2000; ++it) {
        const double prev_ll = ll;
        double sw = 0;
        ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l1 = std::log(pi1) + norm_logpdf(z[i], m1, std::sqrt(v1));
            const double l2 = std::log1p(-pi1) + norm_logpdf(z[i], m2, std::sqrt(v2));
            const double mx = std::max(l1, l2);
            const double e1 = std::exp(l1 - mx);
            const double e2 = std::exp(l2 - mx);
            r[i] = e1 / (e1 + e2);
            sw += r[i];
            ll += mx + std::log(e1 + e2);
        }
        if (sw < 2.0 || sw > static_cast<double>(n) - 2.0) {
            g.degenerate = true;
            return g;
        }
        double nm1 = 0, nm2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            nm1 += r[i] * z[i];
            nm2 += (1.0 - r[i]) * z[i];
        }
        nm1 /= sw;
        nm2 /= (static_cast<double>(n) - sw);
        double nv1 = 0, nv2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            nv1 += r[i] * (z[i] - nm1) * (z[i] - nm1);
            nv2 += (1.0 - r[i]) * (z[i] - nm2) * (z[i] - nm2);
        }
        nv1 /= sw;
        nv2 /= (static_cast<double>(n) - sw);
        if (!anchor_null) {
            m1 = nm1;
            v1 = nv1;
        }
        m2 = nm2;
        v2 = nv2;
        pi1 = sw / static_cast<double>(n);
        if (v1 < 1e-10 || v2 < 1e-10) {
            g.degenerate = true;
            return g;
        }
        if (it > 0 && std::fabs(ll - prev_ll) < 1e-10 * (1.0 + std::fabs(prev_ll))) break;
    }
    g = {pi1, m1, v1, m2, v2, ll, false};
    return g;
}

} // namespace

GaussianInit init_gaussian_mixture(std::span<const double> z, std::uint64_t seed) {
    if (z.size() < 10) {
        throw invalid_input_error("init_gaussian_mixture: need at least 10 observations");
    }
    check_finite(z, "init_gaussian_mixture");
    const std::size_t n = z.size();

    std::vector<double> sorted(z.begin(), z.end());
    std::sort(sorted.begin(), sorted.end());
    const double median = quantile_sorted(sorted, 0.5);
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double v0 = std::max((iqr / 1.349) * (iqr / 1.349), 1e-12);

    // Primary solution is deterministic and central-matching style: the null
    // component is anchored at (median, IQR-based variance) and only the
    // alternative component and the mixing weight are fitted. A free GMM from
    // the same start and randomly seeded k-means++-style restarts serve as
    // fallbacks; picking free restarts by raw likelihood is unstable under
    // skewed alternatives (the winner may split the bulk).
    std::vector<double> r(n);
    Gmm2 best = fit_gmm2(z, median, quantile_sorted(sorted, 0.95), v0, r, true);
    if (best.degenerate) {
        best = fit_gmm2(z, median, quantile_sorted(sorted, 0.95), v0, r, false);
    }
    if (best.degenerate) {
        Rng rng(seed);
        for (int s = 0; s < 8 && best.degenerate; ++s) {
            const double c1 = z[static_cast<std::size_t>(rng.uniform() * static_cast<double>(n))];
            double total = 0.0;
            std::vector<double> d2(n);
            for (std::size_t i = 0; i < n; ++i) {
                d2[i] = (z[i] - c1) * (z[i] - c1);
                total += d2[i];
            }
            double c2 = c1;
            if (total > 0.0) {
                double u = rng.uniform() * total;
                for (std::size_t i = 0; i < n; ++i) {
                    u -= d2[i];
                    if (u <= 0.0) {
                        c2 = z[i];
                        break;
                    }
                }
            }
            best = fit_gmm2(z, c1, c2, v0, r);
        }
    }

    GaussianInit out;
    if (best.degenerate) {
        const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
        out.fallback = true;
        out.p0 = 0.9;
        out.mu = median;
        out.tau2 = std::max((iqr / 1.349) * (iqr / 1.349), 1e-6);
        out.mean_null = median;
        out.mean_alt = median + iqr;
        out.gamma.assign(n, 0.9);
        return out;
    }

    const bool comp1_null = std::fabs(best.m1 - median) <= std::fabs(best.m2 - median);
    out.p0 = comp1_null ? best.pi1 : 1.0 - best.pi1;
    out.mu = comp1_null ? best.m1 : best.m2;
    out.tau2 = comp1_null ? best.v1 : best.v2;
    out.mean_null = out.mu;
    out.mean_alt = comp1_null ? best.m2 : best.m1;
    out.fallback = false;
    // responsibilities of the winning solution, null component first
    out.gamma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double l1 =
            std::log(best.pi1) + norm_logpdf(z[i], best.m1, std::sqrt(best.v1));
        const double l2 =
            std::log1p(-best.pi1) + norm_logpdf(z[i], best.m2, std::sqrt(best.v2));
        const double mx = std::max(l1, l2);
        const double e1 = std::exp(l1 - mx);
        const double g = e1 / (e1 + std::exp(l2 - mx));
        out.gamma[i] = comp1_null ? g : 1.0 - g;
    }
    return out;
}

std::vector<double> e_step(const MixtureModel1D& model, std::span<const double> z) {
    return model.posterior_null(z);
}

MStepResult m_step(std::span<const double> z, std::span<const double> gamma,
                   const EmConfig& cfg) {
    if (z.size() != gamma.size()) {
        throw invalid_input_error("m_step: z/gamma size mismatch");
    }
    const std::size_t n = z.size();
    double sg = 0.0;
    for (double g : gamma) {
        if (!(g >= 0.0 && g <= 1.0)) {
            throw invalid_input_error("m_step: responsibility outside [0,1]");
        }
        sg += g;
    }
    const double s1g = static_cast<double>(n) - sg;
    if (sg < 1.0) {
        throw posterior_collapse_error(posterior_collapse_error::Side::null_side,
                                       "m_step: null responsibilities collapsed");
    }
    if (s1g < 1.0) {
        throw posterior_collapse_error(posterior_collapse_error::Side::alternative_side,
                                       "m_step: alternative responsibilities collapsed");
    }

    MStepResult r;
    r.p0 = sg / static_cast<double>(n);
    double swz = 0.0;
    for (std::size_t i = 0; i < n; ++i) swz += gamma[i] * z[i];
    r.mu = swz / sg;
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += gamma[i] * (z[i] - r.mu) * (z[i] - r.mu);
    r.tau2 = std::max(sq / sg, 1e-12);

    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = (1.0 - gamma[i]) / s1g;
    WeightedSample1D alt = [&] {
        try {
            return WeightedSample1D::from_points(z, u);
        } catch (const degenerate_sample_error& e) {
            throw posterior_collapse_error(posterior_collapse_error::Side::alternative_side,
                                           std::string("m_step: ") + e.what());
        }
    }();

    r.mle_failures = 0;
    PiecewiseLogLinearDensity f = [&] {
        try {
            return logconcave_mle(alt, cfg.mle_tol, cfg.mle_max_iterations);
        } catch (const mle_non_convergence_error& e) {
            r.mle_failures = 1;
            return e.best_iterate;
        }
    }();

    r.bandwidth = 0.0;
    r.bandwidth_clipped = false;
    if (cfg.refit_bandwidth_each_iter) {
        const BandwidthChoice bc = select_bandwidth(alt.variance(), f.variance());
        r.bandwidth = bc.value;
        r.bandwidth_clipped = bc.clipped;
    }
    r.f1 = smooth(f, r.bandwidth);
    return r;
}

namespace {

std::pair<MixtureModel1D, EmTrace> em_loop(std::span<const double> z, std::vector<double> gamma,
                                           const EmConfig& cfg, bool init_fallback) {
    EmTrace trace;
    trace.init_fallback = init_fallback;

    MixtureModel1D best{};
    double best_ll = -kInf;
    double prev_ll = -kInf;

    for (int it = 0; it < cfg.max_iterations; ++it) {
        const MStepResult ms = m_step(z, gamma, cfg);
        trace.mle_failures += ms.mle_failures;

        MixtureModel1D model{ms.p0, ms.mu, ms.tau2, ms.f1};
        const double ll = model.log_likelihood(z);
        trace.iterations.push_back({ll, ms.p0, ms.mu, ms.tau2, ms.bandwidth});
        trace.iteration_count = it + 1;

        if (!cfg.return_best || ll > best_ll) {
            best_ll = ll;
            best = model;
        }
        if (it > 0) {
            if (ll < prev_ll - 1e-12 * (1.0 + std::fabs(prev_ll))) ++trace.likelihood_dips;
            const double rel = std::fabs(ll - prev_ll) / (std::fabs(prev_ll) + 1.0);
            if (rel < cfg.rel_tol) {
                trace.converged = true;
                break;
            }
        }
        prev_ll = ll;
        gamma = model.posterior_null(z);
    }
    return {best, trace};
}

} // namespace

std::pair<MixtureModel1D, EmTrace> em_fit(std::span<const double> z, const EmConfig& cfg) {
    if (z.size() < 10) throw invalid_input_error("em_fit: need at least 10 observations");
    check_finite(z, "em_fit");
    GaussianInit init = init_gaussian_mixture(z, cfg.init_seed);
    return em_loop(z, std::move(init.gamma), cfg, init.fallback);
}

std::pair<MixtureModel1D, EmTrace> em_fit_from(std::span<const double> z,
                                               std::span<const double> gamma0,
                                               const EmConfig& cfg) {
    if (z.size() < 10) throw invalid_input_error("em_fit_from: need at least 10 observations");
    check_finite(z, "em_fit_from");
    return em_loop(z, std::vector<double>(gamma0.begin(), gamma0.end()), cfg, false);
}

double fdr_eval(const MixtureModel1D& model, double z) {
    return model.posterior_null(std::span<const double>(&z, 1)).front();
}

std::vector<double> fdr_eval(const MixtureModel1D& model, std::span<const double> z) {
    return model.posterior_null(z);
}

std::vector<bool> threshold_decisions(std::span<const double> fdrs, double cutoff) {
    if (!(cutoff > 0.0 && cutoff < 1.0)) {
        throw invalid_input_error("threshold_decisions: cutoff must lie in (0,1)");
    }
    std::vector<bool> d(fdrs.size());
    for (std::size_t i = 0; i < fdrs.size(); ++i) d[i] = fdrs[i] <= cutoff;
    return d;
}

} // namespace fdrmix
