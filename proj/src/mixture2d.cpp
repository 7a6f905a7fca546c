#include "fdrmix/mixture2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fdrmix/normal.hpp"

namespace fdrmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double quantile_of(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= v.size()) return v.back();
    const double frac = pos - static_cast<double>(i);
    return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

void check_finite(std::span<const Vec2> z, const char* who) {
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i].x) || !std::isfinite(z[i].y)) {
            throw invalid_input_error(std::string(who) + ": non-finite z at index " +
                                      std::to_string(i));
        }
    }
}

struct NormParams2 {
    Vec2 mu;
    double ixx, ixy, iyy; // precision
    double lognorm;
};

NormParams2 prep_norm(Vec2 mu, const Mat2& c) {
    const double det = c.det();
    NormParams2 p;
    p.mu = mu;
    p.ixx = c.yy / det;
    p.ixy = -c.xy / det;
    p.iyy = c.xx / det;
    p.lognorm = -std::log(2.0 * M_PI) - 0.5 * std::log(det);
    return p;
}

double logpdf2(const NormParams2& p, Vec2 z) {
    const Vec2 d = z - p.mu;
    return p.lognorm - 0.5 * (p.ixx * d.x * d.x + 2.0 * p.ixy * d.x * d.y + p.iyy * d.y * d.y);
}

Mat2 spd_floor(Mat2 c) {
    const auto ev = c.eigenvalues();
    const double floor = std::max(1e-10, 1e-10 * ev[0]);
    if (ev[1] >= floor) return c;
    // shift both eigenvalues up
    const double shift = floor - ev[1];
    c.xx += shift;
    c.yy += shift;
    return c;
}

} // namespace

std::vector<double> MixtureModel2D::posterior_null(std::span<const Vec2> z) const {
    check_finite(z, "posterior_null_2d");
    const NormParams2 np = prep_norm(mu, cov);
    const double lp0 = std::log(p0);
    const double lp1 = std::log1p(-p0);
    std::vector<double> f1(z.size());
    alternative.pdf_batch(z, f1);
    std::vector<double> g(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double lg0 = lp0 + logpdf2(np, z[i]);
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

double MixtureModel2D::log_likelihood(std::span<const Vec2> z) const {
    const NormParams2 np = prep_norm(mu, cov);
    const double lp0 = std::log(p0);
    const double lp1 = std::log1p(-p0);
    std::vector<double> f1(z.size());
    alternative.pdf_batch(z, f1);
    double ll = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double lg0 = lp0 + logpdf2(np, z[i]);
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

GaussianInit2D init_gaussian_mixture_2d(std::span<const Vec2> z, std::uint64_t seed) {
    if (z.size() < 10) {
        throw invalid_input_error("init_gaussian_mixture_2d: need at least 10 observations");
    }
    check_finite(z, "init_gaussian_mixture_2d");
    const std::size_t n = z.size();
    (void)seed; // deterministic anchored start; seed kept for interface parity

    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = z[i].x;
        ys[i] = z[i].y;
    }
    const Vec2 median{quantile_of(xs, 0.5), quantile_of(ys, 0.5)};
    const double vx = std::pow((quantile_of(xs, 0.75) - quantile_of(xs, 0.25)) / 1.349, 2);
    const double vy = std::pow((quantile_of(ys, 0.75) - quantile_of(ys, 0.25)) / 1.349, 2);
    const Mat2 null_cov = spd_floor({std::max(vx, 1e-12), 0.0, std::max(vy, 1e-12)});

    // anchored mixture EM: null pinned, alternative and weight free
    double pi1 = 0.9;
    Vec2 m2{quantile_of(xs, 0.95), quantile_of(ys, 0.95)};
    Mat2 c2 = null_cov;
    std::vector<double> r(n);
    const NormParams2 np0 = prep_norm(median, null_cov);
    bool degenerate = false;
    double prev_ll = -kInf;
    for (int it = 0; it < 2000; ++it) {
        const NormParams2 np2 = prep_norm(m2, c2);
        double sw = 0.0, ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l1 = std::log(pi1) + logpdf2(np0, z[i]);
            const double l2 = std::log1p(-pi1) + logpdf2(np2, z[i]);
            const double mx = std::max(l1, l2);
            const double e1 = std::exp(l1 - mx), e2 = std::exp(l2 - mx);
            r[i] = e1 / (e1 + e2);
            sw += r[i];
            ll += mx + std::log(e1 + e2);
        }
        if (sw < 2.0 || sw > static_cast<double>(n) - 2.0) {
            degenerate = true;
            break;
        }
        Vec2 nm{0, 0};
        for (std::size_t i = 0; i < n; ++i) nm = nm + (1.0 - r[i]) * z[i];
        nm = (1.0 / (static_cast<double>(n) - sw)) * nm;
        Mat2 nc{};
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 d = z[i] - nm;
            const double wi = 1.0 - r[i];
            nc.xx += wi * d.x * d.x;
            nc.xy += wi * d.x * d.y;
            nc.yy += wi * d.y * d.y;
        }
        const double inv = 1.0 / (static_cast<double>(n) - sw);
        nc.xx *= inv;
        nc.xy *= inv;
        nc.yy *= inv;
        m2 = nm;
        c2 = spd_floor(nc);
        pi1 = sw / static_cast<double>(n);
        if (it > 0 && std::fabs(ll - prev_ll) < 1e-10 * (1.0 + std::fabs(prev_ll))) break;
        prev_ll = ll;
    }

    GaussianInit2D out;
    if (degenerate) {
        out.fallback = true;
        out.p0 = 0.9;
        out.mu = median;
        out.cov = null_cov;
        out.mean_alt = m2;
        out.gamma.assign(n, 0.9);
        return out;
    }
    out.fallback = false;
    out.p0 = pi1;
    out.mu = median;
    out.cov = null_cov;
    out.mean_alt = m2;
    out.gamma = r;
    return out;
}

std::vector<double> e_step_2d(const MixtureModel2D& model, std::span<const Vec2> z) {
    return model.posterior_null(z);
}

MStepResult2D m_step_2d(std::span<const Vec2> z, std::span<const double> gamma,
                        const EmConfig& cfg, TentWarmStart* warm) {
    if (z.size() != gamma.size()) {
        throw invalid_input_error("m_step_2d: z/gamma size mismatch");
    }
    const std::size_t n = z.size();
    double sg = 0.0;
    for (double g : gamma) {
        if (!(g >= 0.0 && g <= 1.0)) {
            throw invalid_input_error("m_step_2d: responsibility outside [0,1]");
        }
        sg += g;
    }
    const double s1g = static_cast<double>(n) - sg;
    if (sg < 1.0) {
        throw posterior_collapse_error(posterior_collapse_error::Side::null_side,
                                       "m_step_2d: null responsibilities collapsed");
    }
    if (s1g < 1.0) {
        throw posterior_collapse_error(posterior_collapse_error::Side::alternative_side,
                                       "m_step_2d: alternative responsibilities collapsed");
    }

    MStepResult2D r;
    r.p0 = sg / static_cast<double>(n);
    Vec2 mu{0, 0};
    for (std::size_t i = 0; i < n; ++i) mu = mu + gamma[i] * z[i];
    mu = (1.0 / sg) * mu;
    Mat2 cov{};
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 d = z[i] - mu;
        cov.xx += gamma[i] * d.x * d.x;
        cov.xy += gamma[i] * d.x * d.y;
        cov.yy += gamma[i] * d.y * d.y;
    }
    cov.xx /= sg;
    cov.xy /= sg;
    cov.yy /= sg;
    r.mu = mu;
    r.cov = spd_floor(cov);

    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = (1.0 - gamma[i]) / s1g;
    WeightedSample2D alt = [&] {
        try {
            return WeightedSample2D::from_points(z, u);
        } catch (const degenerate_sample_error& e) {
            throw posterior_collapse_error(posterior_collapse_error::Side::alternative_side,
                                           std::string("m_step_2d: ") + e.what());
        }
    }();

    std::vector<double> warm_v;
    const std::vector<double>* warm_ptr = nullptr;
    if (warm != nullptr && !warm->empty()) {
        warm_v.resize(alt.size());
        bool complete = true;
        double lo = kInf;
        for (const auto& [k, val] : *warm) lo = std::min(lo, val);
        for (std::size_t i = 0; i < alt.size(); ++i) {
            const auto it = warm->find({alt.points()[i].x, alt.points()[i].y});
            if (it == warm->end()) {
                warm_v[i] = lo; // fresh point enters low
                complete = false;
            } else {
                warm_v[i] = it->second;
            }
        }
        (void)complete;
        warm_ptr = &warm_v;
    }

    r.mle_failures = 0;
    TentFitDiagnostics diag;
    TentDensity2D f = [&] {
        try {
            return logconcave_mle_2d(alt, 1e-7, cfg.mle_max_iterations * 4, warm_ptr, &diag);
        } catch (const tent_non_convergence_error& e) {
            r.mle_failures = 1;
            return e.best_iterate;
        }
    }();
    if (warm != nullptr && !diag.pole_values.empty()) {
        warm->clear();
        for (std::size_t i = 0; i < alt.size(); ++i) {
            (*warm)[{alt.points()[i].x, alt.points()[i].y}] = diag.pole_values[i];
        }
    }

    r.bandwidth = Mat2{};
    if (cfg.refit_bandwidth_each_iter) {
        r.bandwidth = select_bandwidth_2d(alt.covariance(), f.covariance());
    }
    r.f1 = smooth_2d(std::move(f), r.bandwidth);
    return r;
}

std::pair<MixtureModel2D, EmTrace> em_fit_2d(std::span<const Vec2> z, const EmConfig& cfg) {
    if (z.size() < 10) throw invalid_input_error("em_fit_2d: need at least 10 observations");
    check_finite(z, "em_fit_2d");

    GaussianInit2D init = init_gaussian_mixture_2d(z, cfg.init_seed);
    std::vector<double> gamma = std::move(init.gamma);

    EmTrace trace;
    trace.init_fallback = init.fallback;
    MixtureModel2D best{};
    double best_ll = -kInf;
    double prev_ll = -kInf;
    TentWarmStart warm;

    for (int it = 0; it < cfg.max_iterations; ++it) {
        MStepResult2D ms = m_step_2d(z, gamma, cfg, &warm);
        trace.mle_failures += ms.mle_failures;

        MixtureModel2D model{ms.p0, ms.mu, ms.cov, std::move(ms.f1)};
        const double ll = model.log_likelihood(z);
        const double bw_scalar = 0.5 * ms.bandwidth.trace();
        trace.iterations.push_back({ll, ms.p0, ms.mu.x, ms.cov.trace(), bw_scalar});
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

double fdr_eval_2d(const MixtureModel2D& model, Vec2 z) {
    return model.posterior_null(std::span<const Vec2>(&z, 1)).front();
}

std::vector<double> fdr_eval_2d(const MixtureModel2D& model, std::span<const Vec2> z) {
    return model.posterior_null(z);
}

} // namespace fdrmix
