#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fdrmix {

/// Generative scenario: z = p0 * null + (1-p0) * alternative, where both
/// components are convolutions. Univariate rows U1-U6, bivariate B1-B6.
/// Null: N(0,1)*N(0,1e-6). Alternatives: N(0,1)*N(3.5,0.5) or
/// N(0,1)*Gamma(shape 12, scale 0.25); bivariate analogues use a correlated
/// normal base (correlation 0.3) and iid gamma coordinates.
struct Scenario {
    enum class AltFamily { normal, gamma };

    std::string id;
    int dimension = 1;
    double p0 = 0.95;
    AltFamily alt = AltFamily::normal;

    static Scenario from_id(const std::string& id);
    static std::vector<std::string> all_ids();
};

inline constexpr double kNullJitterVar = 1e-6;
inline constexpr double kAltNormalMean = 3.5;
inline constexpr double kAltNormalVar = 0.5;
inline constexpr double kGammaShape = 12.0;
inline constexpr double kGammaScale = 0.25;
inline constexpr double kBivCorr = 0.3;

struct LabeledSample {
    std::string scenario_id;
    int dimension = 1;
    std::uint64_t seed = 0;
    std::vector<double> z1;
    std::vector<double> z2;           // empty when dimension == 1
    std::vector<std::uint8_t> is_null; // 1 = drawn from the null component
};

LabeledSample generate(const Scenario& sc, int n, std::uint64_t seed);

enum class Component { null_part, alternative, marginal };

/// Exact/quadrature density of a scenario component at z (univariate).
double true_density(const Scenario& sc, Component c, double z);
/// Bivariate version.
double true_density_2d(const Scenario& sc, Component c, double z1, double z2);

double true_fdr(const Scenario& sc, double z);
std::vector<double> true_fdr(const Scenario& sc, const std::vector<double>& z);
double true_fdr_2d(const Scenario& sc, double z1, double z2);

} // namespace fdrmix
