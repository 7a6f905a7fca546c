#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdrmix/mixture.hpp"
#include "fdrmix/scenarios.hpp"

namespace fdrmix {

/// Per-run record of a Monte Carlo benchmark.
struct RunMetrics {
    int run_index = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure;
    double p0_hat = 0.0;
    double rmse = 0.0;
    int em_iterations = 0;
    bool em_converged = false;
    std::vector<double> fdr_at; // empirical FDR per threshold
    std::vector<double> fnr_at; // empirical FNR per threshold
};

struct Aggregate {
    double mean = 0.0;
    double se = 0.0; // sd / sqrt(runs)
};

struct MetricsReport {
    std::string scenario_id;
    int n = 0;
    int m = 0;
    std::uint64_t master_seed = 0;
    std::vector<double> thresholds;
    std::vector<RunMetrics> runs;
    int failure_count = 0;
    Aggregate p0;
    Aggregate rmse;
    std::vector<Aggregate> fdr;
    std::vector<Aggregate> fnr;

    std::string to_json() const;
    /// Flat CSV: one row per run per threshold.
    std::string to_csv() const;
};

/// RMSE restricted to indices with true fdr <= 0.5.
double rmse_restricted(std::span<const double> est_fdr, std::span<const double> true_fdr);

/// (FDR, FNR) against ground-truth labels; zero-denominator cases are 0.
std::pair<double, double> empirical_fdr_fnr(std::span<const std::uint8_t> declared,
                                            std::span<const std::uint8_t> is_null);

inline const std::vector<double>& default_thresholds() {
    static const std::vector<double> t = {0.05, 0.10, 0.15, 0.20, 0.25};
    return t;
}

/// M independent runs (generate -> em_fit -> fdr -> metrics) with per-run
/// seeds derived from master_seed. Runs execute on a worker pool capped by
/// max_workers (0 = hardware concurrency, overridable by FDRMIX_THREADS);
/// results are identical for any worker count. More than 10% failed runs
/// raises benchmark_integrity_error.
MetricsReport run_benchmark(const Scenario& sc, int n, int m,
                            std::span<const double> thresholds, std::uint64_t master_seed,
                            int max_workers = 0, const EmConfig& base_cfg = {});

} // namespace fdrmix
