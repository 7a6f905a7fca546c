#include "fdrmix/scenarios.hpp"

#include <cmath>

#include "fdrmix/errors.hpp"
#include "fdrmix/normal.hpp"
#include "fdrmix/quadrature.hpp"
#include "fdrmix/rng.hpp"

namespace fdrmix {

namespace {

double gamma_logpdf(double x, double shape, double scale) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) -
           shape * std::log(scale);
}

double gamma_pdf(double x, double shape, double scale) {
    return x <= 0.0 ? 0.0 : std::exp(gamma_logpdf(x, shape, scale));
}

// integration window for the gamma convolution
double gamma_upper() { return kGammaShape * kGammaScale + 12.0 * std::sqrt(kGammaShape) * kGammaScale; }

double binorm_pdf(double z1, double z2, double m1, double m2, double v1, double v2,
                  double cov) {
    const double det = v1 * v2 - cov * cov;
    const double d1 = z1 - m1, d2 = z2 - m2;
    const double q = (v2 * d1 * d1 - 2.0 * cov * d1 * d2 + v1 * d2 * d2) / det;
    return std::exp(-0.5 * q) / (2.0 * M_PI * std::sqrt(det));
}

} // namespace

Scenario Scenario::from_id(const std::string& id) {
    Scenario sc;
    sc.id = id;
    if (id.size() != 2 || (id[0] != 'U' && id[0] != 'B') || id[1] < '1' || id[1] > '6') {
        throw invalid_input_error("unknown scenario id: " + id);
    }
    sc.dimension = id[0] == 'U' ? 1 : 2;
    const int row = id[1] - '1'; // 0..5
    sc.p0 = (row % 3 == 0) ? 0.95 : (row % 3 == 1 ? 0.90 : 0.80);
    sc.alt = row < 3 ? AltFamily::normal : AltFamily::gamma;
    return sc;
}

std::vector<std::string> Scenario::all_ids() {
    return {"U1", "U2", "U3", "U4", "U5", "U6", "B1", "B2", "B3", "B4", "B5", "B6"};
}

LabeledSample generate(const Scenario& sc, int n, std::uint64_t seed) {
    if (n < 1) throw invalid_input_error("generate: n must be positive");
    LabeledSample s;
    s.scenario_id = sc.id;
    s.dimension = sc.dimension;
    s.seed = seed;
    s.z1.reserve(static_cast<std::size_t>(n));
    s.is_null.reserve(static_cast<std::size_t>(n));
    Rng rng(seed);

    const double jitter_sd = std::sqrt(kNullJitterVar);
    if (sc.dimension == 1) {
        for (int i = 0; i < n; ++i) {
            const bool null = rng.bernoulli(sc.p0);
            double z = rng.normal(); // the N(0,1) base of every convolution
            if (null) {
                z += jitter_sd * rng.normal();
            } else if (sc.alt == Scenario::AltFamily::normal) {
                z += kAltNormalMean + std::sqrt(kAltNormalVar) * rng.normal();
            } else {
                z += rng.gamma(kGammaShape, kGammaScale);
            }
            s.z1.push_back(z);
            s.is_null.push_back(null ? 1 : 0);
        }
        return s;
    }

    s.z2.reserve(static_cast<std::size_t>(n));
    const double chol21 = kBivCorr;
    const double chol22 = std::sqrt(1.0 - kBivCorr * kBivCorr);
    for (int i = 0; i < n; ++i) {
        const bool null = rng.bernoulli(sc.p0);
        const double e1 = rng.normal(), e2 = rng.normal();
        double z1 = e1;
        double z2 = chol21 * e1 + chol22 * e2;
        if (null) {
            z1 += jitter_sd * rng.normal();
            z2 += jitter_sd * rng.normal();
        } else if (sc.alt == Scenario::AltFamily::normal) {
            z1 += kAltNormalMean + std::sqrt(kAltNormalVar) * rng.normal();
            z2 += kAltNormalMean + std::sqrt(kAltNormalVar) * rng.normal();
        } else {
            z1 += rng.gamma(kGammaShape, kGammaScale);
            z2 += rng.gamma(kGammaShape, kGammaScale);
        }
        s.z1.push_back(z1);
        s.z2.push_back(z2);
        s.is_null.push_back(null ? 1 : 0);
    }
    return s;
}

double true_density(const Scenario& sc, Component c, double z) {
    if (!std::isfinite(z)) throw invalid_input_error("true_density: non-finite z");
    auto null_pdf = [&] { return norm_pdf(z, 0.0, std::sqrt(1.0 + kNullJitterVar)); };
    auto alt_pdf = [&] {
        if (sc.alt == Scenario::AltFamily::normal) {
            return norm_pdf(z, kAltNormalMean, std::sqrt(1.0 + kAltNormalVar));
        }
        return integrate_gk(
            [&](double d) { return norm_pdf(z - d) * gamma_pdf(d, kGammaShape, kGammaScale); },
            0.0, gamma_upper(), 1e-10);
    };
    switch (c) {
        case Component::null_part:
            return null_pdf();
        case Component::alternative:
            return alt_pdf();
        case Component::marginal:
            return sc.p0 * null_pdf() + (1.0 - sc.p0) * alt_pdf();
    }
    return 0.0;
}

double true_density_2d(const Scenario& sc, Component c, double z1, double z2) {
    if (!std::isfinite(z1) || !std::isfinite(z2)) {
        throw invalid_input_error("true_density_2d: non-finite z");
    }
    const double j = kNullJitterVar;
    auto null_pdf = [&] {
        return binorm_pdf(z1, z2, 0.0, 0.0, 1.0 + j, 1.0 + j, kBivCorr);
    };
    auto alt_pdf = [&] {
        if (sc.alt == Scenario::AltFamily::normal) {
            return binorm_pdf(z1, z2, kAltNormalMean, kAltNormalMean, 1.0 + kAltNormalVar,
                              1.0 + kAltNormalVar, kBivCorr);
        }
        // correlated normal base handled inside the 2-D quadrature over the
        // independent gamma pair
        const double hi = gamma_upper();
        return integrate_gk(
            [&](double v1) {
                const double g1 = gamma_pdf(v1, kGammaShape, kGammaScale);
                if (g1 == 0.0) return 0.0;
                return g1 * integrate_gk(
                                [&](double v2) {
                                    return binorm_pdf(z1 - v1, z2 - v2, 0.0, 0.0, 1.0, 1.0,
                                                      kBivCorr) *
                                           gamma_pdf(v2, kGammaShape, kGammaScale);
                                },
                                0.0, hi, 1e-11);
            },
            0.0, hi, 1e-9);
    };
    switch (c) {
        case Component::null_part:
            return null_pdf();
        case Component::alternative:
            return alt_pdf();
        case Component::marginal:
            return sc.p0 * null_pdf() + (1.0 - sc.p0) * alt_pdf();
    }
    return 0.0;
}

double true_fdr(const Scenario& sc, double z) {
    const double f0 = sc.p0 * true_density(sc, Component::null_part, z);
    const double f1 = (1.0 - sc.p0) * true_density(sc, Component::alternative, z);
    if (f0 == 0.0 && f1 == 0.0) return 1.0;
    return f0 / (f0 + f1);
}

std::vector<double> true_fdr(const Scenario& sc, const std::vector<double>& z) {
    std::vector<double> out;
    out.reserve(z.size());
    for (double v : z) out.push_back(true_fdr(sc, v));
    return out;
}

double true_fdr_2d(const Scenario& sc, double z1, double z2) {
    const double f0 = sc.p0 * true_density_2d(sc, Component::null_part, z1, z2);
    const double f1 = (1.0 - sc.p0) * true_density_2d(sc, Component::alternative, z1, z2);
    if (f0 == 0.0 && f1 == 0.0) return 1.0;
    return f0 / (f0 + f1);
}

} // namespace fdrmix
