#include "fdrmix/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "fdrmix/mixture2d.hpp"
#include "fdrmix/rng.hpp"

#include <json.hpp>

namespace fdrmix {

double rmse_restricted(std::span<const double> est_fdr, std::span<const double> true_fdr) {
    if (est_fdr.size() != true_fdr.size()) {
        throw invalid_input_error("rmse_restricted: length mismatch");
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < est_fdr.size(); ++i) {
        if (true_fdr[i] <= 0.5) {
            const double d = est_fdr[i] - true_fdr[i];
            acc += d * d;
            ++count;
        }
    }
    if (count == 0) {
        throw undefined_metric_error("rmse_restricted: no index with true fdr <= 0.5");
    }
    return std::sqrt(acc / static_cast<double>(count));
}

std::pair<double, double> empirical_fdr_fnr(std::span<const std::uint8_t> declared,
                                            std::span<const std::uint8_t> is_null) {
    if (declared.size() != is_null.size()) {
        throw invalid_input_error("empirical_fdr_fnr: length mismatch");
    }
    std::size_t n_decl = 0, n_decl_null = 0, n_held = 0, n_held_alt = 0;
    for (std::size_t i = 0; i < declared.size(); ++i) {
        if (declared[i]) {
            ++n_decl;
            if (is_null[i]) ++n_decl_null;
        } else {
            ++n_held;
            if (!is_null[i]) ++n_held_alt;
        }
    }
    const double fdr = n_decl == 0 ? 0.0
                                   : static_cast<double>(n_decl_null) / static_cast<double>(n_decl);
    const double fnr = n_held == 0 ? 0.0
                                   : static_cast<double>(n_held_alt) / static_cast<double>(n_held);
    return {fdr, fnr};
}

namespace {

Aggregate aggregate_of(const std::vector<double>& xs) {
    Aggregate a;
    if (xs.empty()) return a;
    for (double x : xs) a.mean += x;
    a.mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    const double var = ss / static_cast<double>(xs.size());
    a.se = std::sqrt(var / static_cast<double>(xs.size()));
    return a;
}

RunMetrics one_run(const Scenario& sc, int n, int run_index, std::uint64_t master_seed,
                   std::span<const double> thresholds, const EmConfig& base_cfg) {
    RunMetrics rm;
    rm.run_index = run_index;
    rm.seed = derive_seed(master_seed, static_cast<std::uint64_t>(run_index));
    try {
        const LabeledSample s = generate(sc, n, rm.seed);
        EmConfig cfg = base_cfg;
        cfg.init_seed = derive_seed(rm.seed, 1);

        std::vector<double> est;
        if (sc.dimension == 1) {
            auto [model, trace] = em_fit(s.z1, cfg);
            rm.p0_hat = model.p0;
            rm.em_iterations = trace.iteration_count;
            rm.em_converged = trace.converged;
            est = fdr_eval(model, s.z1);
        } else {
            std::vector<Vec2> z(s.z1.size());
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = {s.z1[i], s.z2[i]};
            auto [model, trace] = em_fit_2d(z, cfg);
            rm.p0_hat = model.p0;
            rm.em_iterations = trace.iteration_count;
            rm.em_converged = trace.converged;
            est = fdr_eval_2d(model, z);
        }

        std::vector<double> tf(est.size());
        for (std::size_t i = 0; i < est.size(); ++i) {
            tf[i] = sc.dimension == 1 ? true_fdr(sc, s.z1[i])
                                      : true_fdr_2d(sc, s.z1[i], s.z2[i]);
        }
        rm.rmse = rmse_restricted(est, tf);

        rm.fdr_at.reserve(thresholds.size());
        rm.fnr_at.reserve(thresholds.size());
        std::vector<std::uint8_t> decl(est.size());
        for (double th : thresholds) {
            for (std::size_t i = 0; i < est.size(); ++i) decl[i] = est[i] <= th ? 1 : 0;
            const auto [efdr, efnr] = empirical_fdr_fnr(decl, s.is_null);
            rm.fdr_at.push_back(efdr);
            rm.fnr_at.push_back(efnr);
        }
    } catch (const std::exception& e) {
        rm.failed = true;
        rm.failure = e.what();
    }
    return rm;
}

int worker_count(int requested, int m) {
    int w = requested;
    if (w <= 0) {
        w = static_cast<int>(std::thread::hardware_concurrency());
        if (w <= 0) w = 1;
    }
    if (const char* env = std::getenv("FDRMIX_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) w = std::min(w, cap);
    }
    return std::max(1, std::min(w, m));
}

} // namespace

MetricsReport run_benchmark(const Scenario& sc, int n, int m,
                            std::span<const double> thresholds, std::uint64_t master_seed,
                            int max_workers, const EmConfig& base_cfg) {
    if (m < 1) throw invalid_input_error("run_benchmark: m must be >= 1");
    if (n < 10) throw invalid_input_error("run_benchmark: n must be >= 10");
    for (double th : thresholds) {
        if (!(th > 0.0 && th < 1.0)) {
            throw invalid_input_error("run_benchmark: thresholds must lie in (0,1)");
        }
    }

    MetricsReport rep;
    rep.scenario_id = sc.id;
    rep.n = n;
    rep.m = m;
    rep.master_seed = master_seed;
    rep.thresholds.assign(thresholds.begin(), thresholds.end());
    rep.runs.resize(static_cast<std::size_t>(m));

    const int workers = worker_count(max_workers, m);
    std::atomic<int> next{0};
    auto work = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= m) return;
            rep.runs[static_cast<std::size_t>(r)] =
                one_run(sc, n, r, master_seed, thresholds, base_cfg);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    std::vector<double> p0s, rmses;
    std::vector<std::vector<double>> fdrs(thresholds.size()), fnrs(thresholds.size());
    for (const RunMetrics& rm : rep.runs) {
        if (rm.failed) {
            ++rep.failure_count;
            continue;
        }
        p0s.push_back(rm.p0_hat);
        rmses.push_back(rm.rmse);
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            fdrs[t].push_back(rm.fdr_at[t]);
            fnrs[t].push_back(rm.fnr_at[t]);
        }
    }
    if (rep.failure_count * 10 > m) {
        throw benchmark_integrity_error("run_benchmark: " + std::to_string(rep.failure_count) +
                                        " of " + std::to_string(m) + " runs failed");
    }
    rep.p0 = aggregate_of(p0s);
    rep.rmse = aggregate_of(rmses);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        rep.fdr.push_back(aggregate_of(fdrs[t]));
        rep.fnr.push_back(aggregate_of(fnrs[t]));
    }
    return rep;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["scenario"] = scenario_id;
    j["n"] = n;
    j["m"] = m;
    j["master_seed"] = master_seed;
    j["thresholds"] = thresholds;
    j["failures"] = failure_count;
    j["aggregates"]["p0"] = {{"mean", p0.mean}, {"se", p0.se}};
    j["aggregates"]["rmse"] = {{"mean", rmse.mean}, {"se", rmse.se}};
    nlohmann::json per_t = nlohmann::json::array();
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        per_t.push_back({{"threshold", thresholds[t]},
                         {"fdr", {{"mean", fdr[t].mean}, {"se", fdr[t].se}}},
                         {"fnr", {{"mean", fnr[t].mean}, {"se", fnr[t].se}}}});
    }
    j["aggregates"]["per_threshold"] = per_t;
    nlohmann::json jruns = nlohmann::json::array();
    for (const RunMetrics& rm : runs) {
        nlohmann::json jr;
        jr["run"] = rm.run_index;
        jr["seed"] = rm.seed;
        jr["failed"] = rm.failed;
        if (rm.failed) {
            jr["failure"] = rm.failure;
        } else {
            jr["p0_hat"] = rm.p0_hat;
            jr["rmse"] = rm.rmse;
            jr["em_iterations"] = rm.em_iterations;
            jr["em_converged"] = rm.em_converged;
            jr["fdr"] = rm.fdr_at;
            jr["fnr"] = rm.fnr_at;
        }
        jruns.push_back(jr);
    }
    j["runs"] = jruns;
    return j.dump(2) + "\n";
}

std::string MetricsReport::to_csv() const {
    std::string out =
        "scenario,n,m,master_seed,run,seed,threshold,p0_hat,rmse,fdr,fnr,em_iterations,"
        "em_converged,failed\n";
    char buf[512];
    for (const RunMetrics& rm : runs) {
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            if (rm.failed) {
                std::snprintf(buf, sizeof(buf), "%s,%d,%d,%llu,%d,%llu,%.17g,,,,,,0,1\n",
                              scenario_id.c_str(), n, m,
                              static_cast<unsigned long long>(master_seed), rm.run_index,
                              static_cast<unsigned long long>(rm.seed), thresholds[t]);
            } else {
                std::snprintf(buf, sizeof(buf),
                              "%s,%d,%d,%llu,%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,0\n",
                              scenario_id.c_str(), n, m,
                              static_cast<unsigned long long>(master_seed), rm.run_index,
                              static_cast<unsigned long long>(rm.seed), thresholds[t],
                              rm.p0_hat, rm.rmse, rm.fdr_at[t], rm.fnr_at[t],
                              rm.em_iterations, rm.em_converged ? 1 : 0);
            }
            out += buf;
        }
    }
    return out;
}

} // namespace fdrmix
