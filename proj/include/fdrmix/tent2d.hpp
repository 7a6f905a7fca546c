#pragma once

#include <array>
#include <span>
#include <vector>

#include "fdrmix/errors.hpp"

namespace fdrmix {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

/// Symmetric 2x2 matrix.
struct Mat2 {
    double xx = 0.0, xy = 0.0, yy = 0.0;

    double det() const { return xx * yy - xy * xy; }
    double trace() const { return xx + yy; }
    /// eigenvalues, descending
    std::array<double, 2> eigenvalues() const;
    /// clip negative eigenvalues to zero
    Mat2 psd_clip() const;

    Mat2 operator+(const Mat2& o) const { return {xx + o.xx, xy + o.xy, yy + o.yy}; }
    Mat2 operator-(const Mat2& o) const { return {xx - o.xx, xy - o.xy, yy - o.yy}; }
};

class WeightedSample2D {
public:
    static WeightedSample2D from_points(std::span<const Vec2> z, std::span<const double> w);
    static WeightedSample2D equal_weights(std::span<const Vec2> z);

    const std::vector<Vec2>& points() const { return z_; }
    const std::vector<double>& weights() const { return w_; }
    std::size_t size() const { return z_.size(); }

    Vec2 mean() const;
    Mat2 covariance() const; // weight-normalized central second moment

private:
    WeightedSample2D() = default;
    std::vector<Vec2> z_;
    std::vector<double> w_;
};

/// Upper concave envelope of poles (pts_i, v_i): the least concave function
/// lying on or above every pole, piecewise affine over a triangulation of the
/// convex hull of pts.
struct UpperEnvelope {
    std::vector<std::array<int, 3>> triangles;
    std::vector<double> env_values; // envelope height at every input point
};

UpperEnvelope upper_concave_envelope(std::span<const Vec2> pts, std::span<const double> v);

/// Bivariate log-concave density: concave piecewise-affine log-density over a
/// triangulation of the data hull, zero outside.
struct TentDensity2D {
    std::vector<Vec2> vertices;
    std::vector<double> log_values;
    std::vector<std::array<int, 3>> triangles;

    double log_pdf(Vec2 p) const; // -inf outside the hull
    double pdf(Vec2 p) const;
    double integral() const; // exact per-triangle
    Vec2 mean() const;
    Mat2 covariance() const;
};

class tent_non_convergence_error : public non_convergence_error {
public:
    tent_non_convergence_error(const std::string& msg, TentDensity2D best)
        : non_convergence_error(msg), best_iterate(std::move(best)) {}

    TentDensity2D best_iterate;
};

struct TentFitDiagnostics {
    int iterations = 0;
    double objective = 0.0;
    std::vector<double> pole_values; // optimizer state, reusable as warm start
};

/// Weighted bivariate log-concave MLE over tent functions. Ascent on the pole
/// heights with the concave envelope applied at each evaluation; L-BFGS
/// directions with a diminishing-step subgradient fallback and best-iterate
/// memory. Stops when the objective change over the last 10 accepted steps
/// falls below tol.
TentDensity2D logconcave_mle_2d(const WeightedSample2D& sample, double tol = 1e-7,
                                int max_iterations = 2000,
                                const std::vector<double>* warm_start = nullptr,
                                TentFitDiagnostics* diag = nullptr);

inline Mat2 covariance_of(const TentDensity2D& f) { return f.covariance(); }

/// A = PSD projection of (sample_cov - mle_cov).
Mat2 select_bandwidth_2d(const Mat2& sample_cov, const Mat2& mle_cov);
/// Overload validating symmetry of raw matrices.
Mat2 select_bandwidth_2d(const std::array<std::array<double, 2>, 2>& sample_cov,
                         const std::array<std::array<double, 2>, 2>& mle_cov);

/// Tent density convolved with N(0, A). Evaluation integrates
/// exp(affine) * gaussian per triangle with subdivision-refined Gauss rules.
class SmoothedTent2D {
public:
    SmoothedTent2D() = default;
    SmoothedTent2D(TentDensity2D base, Mat2 bandwidth);

    const TentDensity2D& base() const { return base_; }
    const Mat2& bandwidth() const { return A_; }

    double pdf(Vec2 t) const;
    void pdf_batch(std::span<const Vec2> t, std::span<double> out) const;
    Vec2 mean() const;
    Mat2 covariance() const; // base covariance + A

private:
    TentDensity2D base_;
    Mat2 A_;
    bool degenerate_ = true; // A ~ 0: evaluate the base directly
    // eigen frame of A
    double l1_ = 0.0, l2_ = 0.0; // eigenvalues, descending
    Vec2 e1_{1.0, 0.0}, e2_{0.0, 1.0};
    double gauss_norm_ = 0.0;
    std::vector<std::array<double, 4>> tri_bbox_; // xmin xmax ymin ymax
};

SmoothedTent2D smooth_2d(TentDensity2D base, Mat2 bandwidth);

inline double smoothed_pdf_2d(const SmoothedTent2D& g, Vec2 t) { return g.pdf(t); }

} // namespace fdrmix
