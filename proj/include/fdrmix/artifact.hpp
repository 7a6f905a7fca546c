#pragma once

#include <optional>
#include <string>

#include "fdrmix/mixture.hpp"
#include "fdrmix/mixture2d.hpp"

namespace fdrmix {

struct FitMeta {
    int iterations = 0;
    bool converged = false;
    double log_likelihood = 0.0;
    bool init_fallback = false;
    int mle_failures = 0;
    int likelihood_dips = 0;
};

/// Serialized fit: the mixture model plus fit metadata, format_version 1.
/// JSON numbers round-trip exactly, so reloaded models reproduce fdr values
/// bit-for-bit.
struct FitArtifact {
    int dim = 1;
    std::optional<MixtureModel1D> model1;
    std::optional<MixtureModel2D> model2;
    FitMeta meta;

    std::string to_json() const;
    static FitArtifact from_json(const std::string& text); // parse_error on bad input

    void save(const std::string& path) const; // io_error
    static FitArtifact load(const std::string& path);
};

} // namespace fdrmix
