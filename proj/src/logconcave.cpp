#include "fdrmix/logconcave.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fdrmix/exp_dd.hpp"
#include "fdrmix/kernels.hpp"
#include "fdrmix/normal.hpp"

namespace fdrmix {

namespace {
constexpr double kWeightDropRel = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();
} // namespace

WeightedSample1D WeightedSample1D::from_points(std::span<const double> z,
                                               std::span<const double> w) {
    if (z.size() != w.size()) {
        throw invalid_input_error("WeightedSample1D: points/weights size mismatch");
    }
    if (z.empty()) throw degenerate_sample_error("WeightedSample1D: empty sample");

    std::vector<std::size_t> order(z.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i]) || !std::isfinite(w[i])) {
            throw invalid_input_error("WeightedSample1D: non-finite entry at index " +
                                      std::to_string(i));
        }
        if (w[i] < 0.0) {
            throw invalid_input_error("WeightedSample1D: negative weight at index " +
                                      std::to_string(i));
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });

    WeightedSample1D s;
    s.z_.reserve(z.size());
    s.w_.reserve(z.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const double zi = z[order[k]];
        const double wi = w[order[k]];
        if (!s.z_.empty() && zi == s.z_.back()) {
            s.w_.back() += wi;
        } else {
            s.z_.push_back(zi);
            s.w_.push_back(wi);
        }
    }

    const double wmax = *std::max_element(s.w_.begin(), s.w_.end());
    if (!(wmax > 0.0)) throw degenerate_sample_error("WeightedSample1D: all weights zero");
    const double cut = kWeightDropRel * wmax;
    std::size_t out = 0;
    for (std::size_t i = 0; i < s.z_.size(); ++i) {
        if (s.w_[i] >= cut) {
            s.z_[out] = s.z_[i];
            s.w_[out] = s.w_[i];
            ++out;
        }
    }
    s.z_.resize(out);
    s.w_.resize(out);
    if (s.z_.size() < 2) {
        throw degenerate_sample_error(
            "WeightedSample1D: fewer than 2 distinct points with positive weight");
    }
    const double tot = std::accumulate(s.w_.begin(), s.w_.end(), 0.0);
    for (double& wi : s.w_) wi /= tot;
    return s;
}

WeightedSample1D WeightedSample1D::equal_weights(std::span<const double> z) {
    std::vector<double> w(z.size(), 1.0);
    return from_points(z, w);
}

double WeightedSample1D::mean() const {
    double sums[2];
    kernels::active_kernels().weighted_sums(z_.data(), w_.data(), z_.size(), sums);
    return sums[1] / sums[0];
}

double WeightedSample1D::variance() const {
    const double m = mean();
    return kernels::active_kernels().weighted_sq_dev(z_.data(), w_.data(), z_.size(), m);
}

double sample_variance_unbiased(std::span<const double> z) {
    if (z.size() < 2) throw invalid_input_error("sample_variance_unbiased: need n >= 2");
    double m = 0.0;
    for (double v : z) m += v;
    m /= static_cast<double>(z.size());
    double s = 0.0;
    for (double v : z) s += (v - m) * (v - m);
    return s / static_cast<double>(z.size() - 1);
}

// ---------------------------------------------------------------------------
// PiecewiseLogLinearDensity

double PiecewiseLogLinearDensity::log_pdf(double z) const {
    if (z < knots.front() || z > knots.back()) return -kInf;
    const auto it = std::upper_bound(knots.begin(), knots.end(), z);
    std::size_t j = static_cast<std::size_t>(it - knots.begin());
    if (j == knots.size()) --j; // z == last knot
    if (j == 0) j = 1;
    const double t0 = knots[j - 1], t1 = knots[j];
    const double lam = (z - t0) / (t1 - t0);
    return (1.0 - lam) * log_values[j - 1] + lam * log_values[j];
}

double PiecewiseLogLinearDensity::pdf(double z) const {
    const double lp = log_pdf(z);
    return lp == -kInf ? 0.0 : std::exp(lp);
}

double PiecewiseLogLinearDensity::integral() const {
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
        acc += (knots[j + 1] - knots[j]) * exp_dd2(log_values[j], log_values[j + 1]);
    }
    return acc;
}

double PiecewiseLogLinearDensity::cdf(double z) const {
    if (z <= knots.front()) return 0.0;
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
        const double t0 = knots[j], t1 = knots[j + 1];
        if (z >= t1) {
            acc += (t1 - t0) * exp_dd2(log_values[j], log_values[j + 1]);
        } else {
            const double lam = (z - t0) / (t1 - t0);
            const double mid = (1.0 - lam) * log_values[j] + lam * log_values[j + 1];
            acc += (z - t0) * exp_dd2(log_values[j], mid);
            break;
        }
    }
    return std::min(acc, 1.0);
}

double PiecewiseLogLinearDensity::mean() const {
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
        const double t0 = knots[j], d = knots[j + 1] - t0;
        const double a = log_values[j], b = log_values[j + 1];
        const double n3[3] = {a, b, b};
        acc += d * (t0 * exp_dd2(a, b) + d * exp_dd(n3, 3));
    }
    return acc;
}

double PiecewiseLogLinearDensity::variance() const {
    const double mu = mean();
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
        const double t0 = knots[j], d = knots[j + 1] - t0;
        const double a = log_values[j], b = log_values[j + 1];
        const double n3[3] = {a, b, b};
        const double n4[4] = {a, b, b, b};
        const double m0 = exp_dd2(a, b);
        const double m1 = exp_dd(n3, 3);
        const double m2 = 2.0 * exp_dd(n4, 4);
        // int (z-mu)^2 e^phi over the piece, z = t0 + d*lambda
        const double c = t0 - mu;
        acc += d * (c * c * m0 + 2.0 * c * d * m1 + d * d * m2);
    }
    return std::max(acc, 0.0);
}

// ---------------------------------------------------------------------------
// Active-set MLE

namespace {

// Maximizes G(psi) = c . psi - sum_j d_j * I(psi_j, psi_{j+1}) for the fixed
// knot locations t (I = int_0^1 exp of the linear interpolant). Unconstrained
// damped Newton with a tridiagonal Hessian.
struct ReducedProblem {
    std::vector<double> t;
    std::vector<double> c;

    double objective(std::span<const double> psi) const {
        double g = 0.0;
        for (std::size_t j = 0; j < psi.size(); ++j) g += c[j] * psi[j];
        for (std::size_t j = 0; j + 1 < psi.size(); ++j) {
            g -= (t[j + 1] - t[j]) * exp_dd2(psi[j], psi[j + 1]);
        }
        return g;
    }

    // returns max |gradient| after convergence
    double newton(std::vector<double>& psi, double gtol, int max_iter = 100) const {
        const std::size_t m = psi.size();
        std::vector<double> grad(m), diag(m), off(m > 0 ? m - 1 : 0), step(m);
        std::vector<double> dl(m), du(m), rhs(m);
        double gnorm = kInf;
        for (int it = 0; it < max_iter; ++it) {
            std::fill(grad.begin(), grad.end(), 0.0);
            std::fill(diag.begin(), diag.end(), 0.0);
            for (std::size_t j = 0; j + 1 < m; ++j) {
                const double d = t[j + 1] - t[j];
                const SegExp s = seg_exp_all(psi[j], psi[j + 1]);
                grad[j] -= d * s.da;
                grad[j + 1] -= d * s.db;
                diag[j] += d * s.daa;
                diag[j + 1] += d * s.dbb;
                off[j] = d * s.dab;
            }
            gnorm = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                grad[j] += c[j];
                gnorm = std::max(gnorm, std::fabs(grad[j]));
            }
            if (gnorm <= gtol) break;

            // Thomas solve of (A) step = grad, A positive definite tridiagonal
            dl = diag;
            du = off;
            rhs = grad;
            for (std::size_t j = 1; j < m; ++j) {
                const double w = off[j - 1] / dl[j - 1];
                dl[j] -= w * off[j - 1];
                rhs[j] -= w * rhs[j - 1];
            }
            step[m - 1] = rhs[m - 1] / dl[m - 1];
            for (std::size_t j = m - 1; j-- > 0;) {
                step[j] = (rhs[j] - du[j] * step[j + 1]) / dl[j];
            }

            const double g0 = objective(psi);
            double slope = 0.0;
            for (std::size_t j = 0; j < m; ++j) slope += grad[j] * step[j];
            double alpha = 1.0;
            std::vector<double> trial(m);
            bool moved = false;
            while (alpha > 1e-13) {
                for (std::size_t j = 0; j < m; ++j) trial[j] = psi[j] + alpha * step[j];
                if (objective(trial) >= g0 + 1e-4 * alpha * slope) {
                    psi = trial;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!moved) break;
        }
        return gnorm;
    }
};

struct ActiveSetState {
    const std::vector<double>& z;
    const std::vector<double>& w;
    std::vector<int> kn;     // knot indices into z, ascending, endpoints included
    std::vector<double> psi; // log values at knots

    void build_linear_coeff(ReducedProblem& rp) const {
        const std::size_t m = kn.size();
        rp.t.resize(m);
        rp.c.assign(m, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            rp.t[j] = z[static_cast<std::size_t>(kn[j])];
            rp.c[j] += w[static_cast<std::size_t>(kn[j])];
        }
        for (std::size_t j = 0; j + 1 < m; ++j) {
            const double t0 = rp.t[j], t1 = rp.t[j + 1];
            for (int i = kn[j] + 1; i < kn[j + 1]; ++i) {
                const double lam = (z[static_cast<std::size_t>(i)] - t0) / (t1 - t0);
                rp.c[j] += w[static_cast<std::size_t>(i)] * (1.0 - lam);
                rp.c[j + 1] += w[static_cast<std::size_t>(i)] * lam;
            }
        }
    }

    std::vector<double> slopes(std::span<const double> v) const {
        std::vector<double> s(kn.size() - 1);
        for (std::size_t j = 0; j + 1 < kn.size(); ++j) {
            s[j] = (v[j + 1] - v[j]) /
                   (z[static_cast<std::size_t>(kn[j + 1])] - z[static_cast<std::size_t>(kn[j])]);
        }
        return s;
    }

    // Interpolated log value at data index i under the current knot fit.
    double value_at(int i) const {
        const double zi = z[static_cast<std::size_t>(i)];
        std::size_t j = 0;
        while (j + 2 < kn.size() && z[static_cast<std::size_t>(kn[j + 1])] < zi) ++j;
        const double t0 = z[static_cast<std::size_t>(kn[j])];
        const double t1 = z[static_cast<std::size_t>(kn[j + 1])];
        const double lam = (zi - t0) / (t1 - t0);
        return (1.0 - lam) * psi[j] + lam * psi[j + 1];
    }
};

} // namespace

PiecewiseLogLinearDensity logconcave_mle(const WeightedSample1D& sample, double tol,
                                         int max_iterations) {
    if (!(tol > 0.0)) throw invalid_input_error("logconcave_mle: tol must be positive");
    const std::vector<double>& z = sample.points();
    const std::vector<double>& w = sample.weights();
    const int n = static_cast<int>(z.size());

    ActiveSetState st{z, w, {0, n - 1}, {}};
    const double range = z.back() - z.front();
    st.psi.assign(2, -std::log(range));

    const double newton_tol = std::min(1e-13, 0.01 * tol);
    auto finalize = [&](const ActiveSetState& s) {
        PiecewiseLogLinearDensity f;
        f.knots.reserve(s.kn.size());
        for (int i : s.kn) f.knots.push_back(z[static_cast<std::size_t>(i)]);
        f.log_values = s.psi;
        const double logI = std::log(f.integral());
        for (double& v : f.log_values) v -= logI;
        return f;
    };

    ReducedProblem rp;
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        // Solve on the current knots, clipping back to the concave cone and
        // dropping knots whose kink closes.
        for (;;) {
            st.build_linear_coeff(rp);
            std::vector<double> target = st.psi;
            rp.newton(target, newton_tol);

            const std::vector<double> s_cur = st.slopes(st.psi);
            const std::vector<double> s_new = st.slopes(target);
            double alpha = 1.0;
            std::vector<std::size_t> tight;
            for (std::size_t j = 0; j + 1 < s_cur.size(); ++j) {
                const double g0 = s_cur[j] - s_cur[j + 1];
                const double g1 = s_new[j] - s_new[j + 1];
                if (g1 < 0.0) alpha = std::min(alpha, g0 / (g0 - g1));
            }
            if (alpha >= 1.0 - 1e-13) {
                st.psi = target;
                break;
            }
            for (std::size_t j = 0; j < st.psi.size(); ++j) {
                st.psi[j] += alpha * (target[j] - st.psi[j]);
            }
            const std::vector<double> s_clip = st.slopes(st.psi);
            const double sscale =
                1.0 + std::fabs(s_clip.front()) + std::fabs(s_clip.back());
            std::vector<int> keep_kn;
            std::vector<double> keep_psi;
            keep_kn.push_back(st.kn.front());
            keep_psi.push_back(st.psi.front());
            for (std::size_t j = 0; j + 1 < s_clip.size(); ++j) {
                if (s_clip[j] - s_clip[j + 1] > 1e-11 * sscale) {
                    keep_kn.push_back(st.kn[j + 1]);
                    keep_psi.push_back(st.psi[j + 1]);
                }
            }
            keep_kn.push_back(st.kn.back());
            keep_psi.push_back(st.psi.back());
            if (keep_kn.size() == st.kn.size()) {
                // numerical stall: force-drop the most-closed kink
                std::size_t worst = 0;
                double worst_gap = kInf;
                for (std::size_t j = 0; j + 1 < s_clip.size(); ++j) {
                    const double gap = s_clip[j] - s_clip[j + 1];
                    if (gap < worst_gap) {
                        worst_gap = gap;
                        worst = j + 1;
                    }
                }
                keep_kn.erase(keep_kn.begin() + static_cast<std::ptrdiff_t>(worst));
                keep_psi.erase(keep_psi.begin() + static_cast<std::ptrdiff_t>(worst));
            }
            st.kn = keep_kn;
            st.psi = keep_psi;
        }

        // Scan for the best kink to release: directional derivative of the
        // tent direction peaking at each interior data point.
        double best_gain = 0.0;
        int best_point = -1;
        for (std::size_t j = 0; j + 1 < st.kn.size(); ++j) {
            const int a = st.kn[j], b = st.kn[j + 1];
            if (b - a < 2) continue;
            const double t0 = z[static_cast<std::size_t>(a)];
            const double t1 = z[static_cast<std::size_t>(b)];
            const double pa = st.psi[j], pb = st.psi[j + 1];
            const double beta = (pb - pa) / (t1 - t0);

            double totW = 0.0, totWZ = 0.0;
            for (int i = a + 1; i < b; ++i) {
                totW += w[static_cast<std::size_t>(i)];
                totWZ += w[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
            }
            double leftW = 0.0, leftWZ = 0.0;
            for (int i = a + 1; i < b; ++i) {
                const double zp = z[static_cast<std::size_t>(i)];
                const double wp = w[static_cast<std::size_t>(i)];
                const double mp = pa + beta * (zp - t0);
                // weighted tent sum
                const double swl = (zp > t0) ? (leftWZ - t0 * leftW) / (zp - t0) : 0.0;
                const double rw = totW - leftW - wp;
                const double rwz = totWZ - leftWZ - wp * zp;
                const double swr = (t1 > zp) ? (t1 * rw - rwz) / (t1 - zp) : 0.0;
                const double sw = swl + wp + swr;
                // integral of the tent against exp(phi)
                const double nl[3] = {pa, mp, mp};
                const double nr[3] = {mp, mp, pb};
                const double iv = (zp - t0) * exp_dd(nl, 3) + (t1 - zp) * exp_dd(nr, 3);
                const double gain = sw - iv;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_point = i;
                }
                leftW += wp;
                leftWZ += wp * zp;
            }
        }

        if (best_gain <= tol) {
            return finalize(st);
        }

        // insert the new knot with its interpolated value (stays feasible)
        const double v = st.value_at(best_point);
        const auto pos = std::upper_bound(st.kn.begin(), st.kn.end(), best_point);
        const std::size_t idx = static_cast<std::size_t>(pos - st.kn.begin());
        st.kn.insert(pos, best_point);
        st.psi.insert(st.psi.begin() + static_cast<std::ptrdiff_t>(idx), v);
    }

    throw mle_non_convergence_error(
        "logconcave_mle: no optimum within " + std::to_string(max_iterations) + " iterations",
        finalize(st));
}

BandwidthChoice select_bandwidth(double sample_variance, double mle_var) {
    if (!std::isfinite(sample_variance) || !std::isfinite(mle_var) || mle_var < 0.0) {
        throw invalid_input_error("select_bandwidth: non-finite input or negative MLE variance");
    }
    if (sample_variance < 0.0) {
        throw invalid_input_error("select_bandwidth: negative sample variance");
    }
    const double diff = sample_variance - mle_var;
    if (diff <= 0.0) return {0.0, diff < 0.0};
    return {std::sqrt(diff), false};
}

// ---------------------------------------------------------------------------
// SmoothedLogConcave

SmoothedLogConcave::SmoothedLogConcave(PiecewiseLogLinearDensity base, double bandwidth)
    : base_(std::move(base)), a_(bandwidth) {
    if (!(bandwidth >= 0.0)) {
        throw invalid_input_error("smooth: bandwidth must be nonnegative");
    }
    const std::size_t m = base_.knots.size();
    alpha_.reserve(m - 1);
    beta_.reserve(m - 1);
    lo_.reserve(m - 1);
    hi_.reserve(m - 1);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        const double t0 = base_.knots[j], t1 = base_.knots[j + 1];
        const double b = (base_.log_values[j + 1] - base_.log_values[j]) / (t1 - t0);
        beta_.push_back(b);
        alpha_.push_back(base_.log_values[j] - b * t0);
        lo_.push_back(t0);
        hi_.push_back(t1);
    }
}

SmoothedLogConcave smooth(const PiecewiseLogLinearDensity& f, double a) {
    return SmoothedLogConcave(f, a);
}

double SmoothedLogConcave::pdf(double t) const {
    if (!std::isfinite(t)) throw invalid_input_error("smoothed pdf: non-finite argument");
    if (a_ == 0.0) return base_.pdf(t);
    double out;
    const kernels::PlcPieces pieces{alpha_.data(), beta_.data(), lo_.data(), hi_.data(),
                                    alpha_.size()};
    kernels::active_kernels().plc_conv_batch(&t, 1, pieces, a_, &out);
    return out;
}

void SmoothedLogConcave::pdf_batch(std::span<const double> t, std::span<double> out) const {
    for (double v : t) {
        if (!std::isfinite(v)) throw invalid_input_error("smoothed pdf: non-finite argument");
    }
    if (a_ == 0.0) {
        for (std::size_t i = 0; i < t.size(); ++i) out[i] = base_.pdf(t[i]);
        return;
    }
    const kernels::PlcPieces pieces{alpha_.data(), beta_.data(), lo_.data(), hi_.data(),
                                    alpha_.size()};
    kernels::active_kernels().plc_conv_batch(t.data(), t.size(), pieces, a_, out.data());
}

double SmoothedLogConcave::cdf(double t) const {
    if (a_ == 0.0) return base_.cdf(t);
    double acc = 0.0;
    for (std::size_t k = 0; k < alpha_.size(); ++k) {
        const double b = beta_[k], l = lo_[k], u = hi_[k];
        if (std::fabs(b) * (u - l) > 1e-6) {
            const double fu = std::exp(alpha_[k] + b * u) * norm_cdf((t - u) / a_);
            const double fl = std::exp(alpha_[k] + b * l) * norm_cdf((t - l) / a_);
            const double ba2 = b * a_ * a_;
            const double g = alpha_[k] + b * t + 0.5 * b * ba2;
            const double pm =
                std::exp(g) * norm_cdf_diff((l - t - ba2) / a_, (u - t - ba2) / a_);
            acc += (fu - fl + pm) / b;
        } else {
            // near-flat piece: int exp(alpha) Phi((t-z)/a) dz with G(x)=x Phi(x)+phi(x)
            const double mid = alpha_[k] + b * 0.5 * (l + u);
            const double xl = (t - l) / a_, xu = (t - u) / a_;
            const double G_l = xl * norm_cdf(xl) + norm_pdf(xl);
            const double G_u = xu * norm_cdf(xu) + norm_pdf(xu);
            acc += std::exp(mid) * a_ * (G_l - G_u);
        }
    }
    return std::min(std::max(acc, 0.0), 1.0);
}

double SmoothedLogConcave::mean() const { return base_.mean(); }

double SmoothedLogConcave::variance() const { return base_.variance() + a_ * a_; }

} // namespace fdrmix
