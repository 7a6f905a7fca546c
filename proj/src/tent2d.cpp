#include "fdrmix/tent2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include <cstdio>
#include <cstdlib>

#include "fdrmix/exp_dd.hpp"
#include "fdrmix/kernels.hpp"
#include "fdrmix/rng.hpp"

namespace fdrmix {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kWeightDropRel = 1e-12;
} // namespace

std::array<double, 2> Mat2::eigenvalues() const {
    const double tr = xx + yy;
    const double d = std::sqrt(std::max(0.25 * (xx - yy) * (xx - yy) + xy * xy, 0.0));
    return {0.5 * tr + d, 0.5 * tr - d};
}

Mat2 Mat2::psd_clip() const {
    const auto ev = eigenvalues();
    if (ev[1] >= 0.0) return *this;
    // eigenvector for ev[0]
    double vx, vy;
    if (std::fabs(xy) > 1e-300) {
        vx = ev[0] - yy;
        vy = xy;
    } else if (xx >= yy) {
        vx = 1.0;
        vy = 0.0;
    } else {
        vx = 0.0;
        vy = 1.0;
    }
    const double nrm = std::sqrt(vx * vx + vy * vy);
    vx /= nrm;
    vy /= nrm;
    const double l = std::max(ev[0], 0.0);
    return {l * vx * vx, l * vx * vy, l * vy * vy};
}

// ---------------------------------------------------------------------------
// WeightedSample2D

WeightedSample2D WeightedSample2D::from_points(std::span<const Vec2> z,
                                               std::span<const double> w) {
    if (z.size() != w.size()) {
        throw invalid_input_error("WeightedSample2D: points/weights size mismatch");
    }
    if (z.empty()) throw degenerate_sample_error("WeightedSample2D: empty sample");
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(z[i].x) || !std::isfinite(z[i].y) || !std::isfinite(w[i])) {
            throw invalid_input_error("WeightedSample2D: non-finite entry at index " +
                                      std::to_string(i));
        }
        if (w[i] < 0.0) {
            throw invalid_input_error("WeightedSample2D: negative weight at index " +
                                      std::to_string(i));
        }
    }

    // merge exact duplicates
    std::map<std::pair<double, double>, double> merged;
    for (std::size_t i = 0; i < z.size(); ++i) {
        merged[{z[i].x, z[i].y}] += w[i];
    }
    double wmax = 0.0;
    for (const auto& [p, wi] : merged) wmax = std::max(wmax, wi);
    if (!(wmax > 0.0)) throw degenerate_sample_error("WeightedSample2D: all weights zero");

    WeightedSample2D s;
    const double cut = kWeightDropRel * wmax;
    double tot = 0.0;
    for (const auto& [p, wi] : merged) {
        if (wi >= cut) {
            s.z_.push_back({p.first, p.second});
            s.w_.push_back(wi);
            tot += wi;
        }
    }
    for (double& wi : s.w_) wi /= tot;

    // need 3 affinely independent points
    bool independent = false;
    if (s.z_.size() >= 3) {
        const Vec2 a = s.z_[0];
        for (std::size_t i = 1; i < s.z_.size() && !independent; ++i) {
            for (std::size_t j = i + 1; j < s.z_.size(); ++j) {
                if (std::fabs(cross(s.z_[i] - a, s.z_[j] - a)) > 1e-12) {
                    independent = true;
                    break;
                }
            }
        }
    }
    if (!independent) {
        throw degenerate_sample_error(
            "WeightedSample2D: needs 3 affinely independent points with positive weight");
    }
    return s;
}

WeightedSample2D WeightedSample2D::equal_weights(std::span<const Vec2> z) {
    std::vector<double> w(z.size(), 1.0);
    return from_points(z, w);
}

Vec2 WeightedSample2D::mean() const {
    Vec2 m{0, 0};
    for (std::size_t i = 0; i < z_.size(); ++i) m = m + w_[i] * z_[i];
    return m;
}

Mat2 WeightedSample2D::covariance() const {
    const Vec2 m = mean();
    Mat2 c;
    for (std::size_t i = 0; i < z_.size(); ++i) {
        const Vec2 d = z_[i] - m;
        c.xx += w_[i] * d.x * d.x;
        c.xy += w_[i] * d.x * d.y;
        c.yy += w_[i] * d.y * d.y;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Upper concave envelope via an incremental 3-D hull of the lifted points.

namespace {

struct HullFailure {}; // internal; triggers a jitter retry

struct P3 {
    double x, y, z;
};

struct Face {
    int a, b, c;
    double nx, ny, nz, off; // plane: n . p = off, outward
    bool dead = false;
    std::vector<int> witnesses;
};

double dist3(const Face& f, const P3& p) {
    return f.nx * p.x + f.ny * p.y + f.nz * p.z - f.off;
}

void set_plane(Face& f, const std::vector<P3>& pts) {
    const P3 &A = pts[static_cast<std::size_t>(f.a)], &B = pts[static_cast<std::size_t>(f.b)],
             &C = pts[static_cast<std::size_t>(f.c)];
    const double ux = B.x - A.x, uy = B.y - A.y, uz = B.z - A.z;
    const double vx = C.x - A.x, vy = C.y - A.y, vz = C.z - A.z;
    f.nx = uy * vz - uz * vy;
    f.ny = uz * vx - ux * vz;
    f.nz = ux * vy - uy * vx;
    const double nrm = std::sqrt(f.nx * f.nx + f.ny * f.ny + f.nz * f.nz);
    if (nrm < 1e-300) throw HullFailure{};
    f.nx /= nrm;
    f.ny /= nrm;
    f.nz /= nrm;
    f.off = f.nx * A.x + f.ny * A.y + f.nz * A.z;
}

std::uint64_t ekey(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

// full 3-D hull; returns faces (outward oriented)
std::vector<Face> hull3d(const std::vector<P3>& pts, double eps) {
    const int n = static_cast<int>(pts.size());

    // initial tetrahedron from spread-out points
    int i0 = 0;
    for (int i = 1; i < n; ++i) {
        if (pts[static_cast<std::size_t>(i)].x <
            pts[static_cast<std::size_t>(i0)].x) i0 = i;
    }
    int i1 = -1;
    double best = -1;
    for (int i = 0; i < n; ++i) {
        const double dx = pts[static_cast<std::size_t>(i)].x - pts[static_cast<std::size_t>(i0)].x;
        const double dy = pts[static_cast<std::size_t>(i)].y - pts[static_cast<std::size_t>(i0)].y;
        const double dz = pts[static_cast<std::size_t>(i)].z - pts[static_cast<std::size_t>(i0)].z;
        const double d = dx * dx + dy * dy + dz * dz;
        if (d > best) {
            best = d;
            i1 = i;
        }
    }
    int i2 = -1;
    best = -1;
    const P3 &A = pts[static_cast<std::size_t>(i0)], &B = pts[static_cast<std::size_t>(i1)];
    for (int i = 0; i < n; ++i) {
        const P3& P = pts[static_cast<std::size_t>(i)];
        const double ux = B.x - A.x, uy = B.y - A.y, uz = B.z - A.z;
        const double wx = P.x - A.x, wy = P.y - A.y, wz = P.z - A.z;
        const double cx = uy * wz - uz * wy, cy = uz * wx - ux * wz, cz = ux * wy - uy * wx;
        const double d = cx * cx + cy * cy + cz * cz;
        if (d > best) {
            best = d;
            i2 = i;
        }
    }
    if (best < eps * eps) throw HullFailure{}; // all collinear
    int i3 = -1;
    best = 0;
    {
        Face f0{i0, i1, i2, 0, 0, 0, 0, false, {}};
        set_plane(f0, pts);
        for (int i = 0; i < n; ++i) {
            const double d = dist3(f0, pts[static_cast<std::size_t>(i)]);
            if (std::fabs(d) > std::fabs(best)) {
                best = d;
                i3 = i;
            }
        }
    }
    if (std::fabs(best) < eps) throw HullFailure{}; // coplanar cloud

    P3 interior{0, 0, 0};
    std::vector<Face> faces;
    auto add_face = [&](int a, int b, int c) {
        Face f{a, b, c, 0, 0, 0, 0, false, {}};
        set_plane(f, pts);
        faces.push_back(f);
        return static_cast<int>(faces.size()) - 1;
    };
    // interior reference point for outward orientation
    const std::array<std::array<int, 3>, 4> tf = {{{i0, i1, i2}, {i0, i1, i3}, {i0, i2, i3}, {i1, i2, i3}}};
    {
        const P3 centroid{
            (pts[static_cast<std::size_t>(i0)].x + pts[static_cast<std::size_t>(i1)].x +
             pts[static_cast<std::size_t>(i2)].x + pts[static_cast<std::size_t>(i3)].x) / 4.0,
            (pts[static_cast<std::size_t>(i0)].y + pts[static_cast<std::size_t>(i1)].y +
             pts[static_cast<std::size_t>(i2)].y + pts[static_cast<std::size_t>(i3)].y) / 4.0,
            (pts[static_cast<std::size_t>(i0)].z + pts[static_cast<std::size_t>(i1)].z +
             pts[static_cast<std::size_t>(i2)].z + pts[static_cast<std::size_t>(i3)].z) / 4.0};
        for (const auto& t : tf) {
            const int fi = add_face(t[0], t[1], t[2]);
            if (dist3(faces[static_cast<std::size_t>(fi)], centroid) > 0) {
                std::swap(faces[static_cast<std::size_t>(fi)].b, faces[static_cast<std::size_t>(fi)].c);
                set_plane(faces[static_cast<std::size_t>(fi)], pts);
            }
        }
        interior = centroid;
    }

    std::unordered_map<std::uint64_t, int> edge_face; // directed edge -> face
    auto register_face = [&](int fi) {
        const Face& f = faces[static_cast<std::size_t>(fi)];
        edge_face[ekey(f.a, f.b)] = fi;
        edge_face[ekey(f.b, f.c)] = fi;
        edge_face[ekey(f.c, f.a)] = fi;
    };
    for (int fi = 0; fi < 4; ++fi) register_face(fi);

    // deterministic shuffled insertion order
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (i != i0 && i != i1 && i != i2 && i != i3) order.push_back(i);
    }
    Rng rng(0x5eed5eedULL);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform() * static_cast<double>(i))]);
    }

    // initial witness assignment
    std::vector<int> witness(static_cast<std::size_t>(n), -1);
    for (int p : order) {
        for (int fi = 0; fi < 4; ++fi) {
            if (dist3(faces[static_cast<std::size_t>(fi)], pts[static_cast<std::size_t>(p)]) > eps) {
                witness[static_cast<std::size_t>(p)] = fi;
                faces[static_cast<std::size_t>(fi)].witnesses.push_back(p);
                break;
            }
        }
    }

    std::vector<int> stack, visible;
    for (int p : order) {
        const int w0 = witness[static_cast<std::size_t>(p)];
        if (w0 < 0 || faces[static_cast<std::size_t>(w0)].dead) {
            if (w0 >= 0 && faces[static_cast<std::size_t>(w0)].dead) throw HullFailure{};
            continue; // inside
        }
        const P3& P = pts[static_cast<std::size_t>(p)];

        // visible region BFS
        visible.clear();
        stack.assign(1, w0);
        std::vector<char> mark(faces.size(), 0);
        mark[static_cast<std::size_t>(w0)] = 1;
        while (!stack.empty()) {
            const int fi = stack.back();
            stack.pop_back();
            visible.push_back(fi);
            const Face& f = faces[static_cast<std::size_t>(fi)];
            const std::array<std::pair<int, int>, 3> edges = {{{f.a, f.b}, {f.b, f.c}, {f.c, f.a}}};
            for (const auto& [ea, eb] : edges) {
                const auto it = edge_face.find(ekey(eb, ea));
                if (it == edge_face.end()) throw HullFailure{};
                const int nf = it->second;
                if (mark[static_cast<std::size_t>(nf)]) continue;
                if (dist3(faces[static_cast<std::size_t>(nf)], P) > eps) {
                    mark[static_cast<std::size_t>(nf)] = 1;
                    stack.push_back(nf);
                }
            }
        }

        // horizon = directed edges of visible faces whose twin is hidden
        std::vector<std::pair<int, int>> horizon;
        for (int fi : visible) {
            const Face& f = faces[static_cast<std::size_t>(fi)];
            const std::array<std::pair<int, int>, 3> edges = {{{f.a, f.b}, {f.b, f.c}, {f.c, f.a}}};
            for (const auto& [ea, eb] : edges) {
                const int nf = edge_face.at(ekey(eb, ea));
                if (!mark[static_cast<std::size_t>(nf)]) horizon.emplace_back(ea, eb);
            }
        }
        if (horizon.empty()) throw HullFailure{};

        // collect orphaned witnesses, kill visible faces
        std::vector<int> orphans;
        for (int fi : visible) {
            Face& f = faces[static_cast<std::size_t>(fi)];
            for (int q : f.witnesses) {
                if (q != p && witness[static_cast<std::size_t>(q)] == fi) orphans.push_back(q);
            }
            f.witnesses.clear();
            f.dead = true;
            edge_face.erase(ekey(f.a, f.b));
            edge_face.erase(ekey(f.b, f.c));
            edge_face.erase(ekey(f.c, f.a));
        }

        // new cone of faces over the horizon
        std::vector<int> created;
        for (const auto& [ea, eb] : horizon) {
            const int fi = add_face(ea, eb, p);
            if (dist3(faces[static_cast<std::size_t>(fi)], interior) > 0) {
                std::swap(faces[static_cast<std::size_t>(fi)].b,
                          faces[static_cast<std::size_t>(fi)].c);
                set_plane(faces[static_cast<std::size_t>(fi)], pts);
            }
            register_face(fi);
            created.push_back(fi);
        }

        witness[static_cast<std::size_t>(p)] = -1;
        for (int q : orphans) {
            witness[static_cast<std::size_t>(q)] = -1;
            for (int fi : created) {
                if (dist3(faces[static_cast<std::size_t>(fi)], pts[static_cast<std::size_t>(q)]) > eps) {
                    witness[static_cast<std::size_t>(q)] = fi;
                    faces[static_cast<std::size_t>(fi)].witnesses.push_back(q);
                    break;
                }
            }
        }
    }

    std::vector<Face> live;
    for (const Face& f : faces) {
        if (!f.dead) live.push_back(f);
    }
    return live;
}

// 2-D convex hull, counterclockwise, Andrew monotone chain
std::vector<int> hull2d(std::span<const Vec2> pts) {
    const int n = static_cast<int>(pts.size());
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        const Vec2 &A = pts[static_cast<std::size_t>(a)], &B = pts[static_cast<std::size_t>(b)];
        return A.x < B.x || (A.x == B.x && A.y < B.y);
    });
    auto turn = [&](int o, int a, int b) {
        return cross(pts[static_cast<std::size_t>(a)] - pts[static_cast<std::size_t>(o)],
                     pts[static_cast<std::size_t>(b)] - pts[static_cast<std::size_t>(o)]);
    };
    std::vector<int> h(2 * static_cast<std::size_t>(n));
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k >= 2 && turn(h[static_cast<std::size_t>(k - 2)], h[static_cast<std::size_t>(k - 1)], idx[static_cast<std::size_t>(i)]) <= 0) --k;
        h[static_cast<std::size_t>(k++)] = idx[static_cast<std::size_t>(i)];
    }
    for (int i = n - 2, t = k + 1; i >= 0; --i) {
        while (k >= t && turn(h[static_cast<std::size_t>(k - 2)], h[static_cast<std::size_t>(k - 1)], idx[static_cast<std::size_t>(i)]) <= 0) --k;
        h[static_cast<std::size_t>(k++)] = idx[static_cast<std::size_t>(i)];
    }
    h.resize(static_cast<std::size_t>(k - 1));
    return h;
}

UpperEnvelope envelope_attempt(std::span<const Vec2> pts, std::span<const double> v) {
    const int n = static_cast<int>(pts.size());

    // normalize all three axes to O(1)
    double xlo = kInf, xhi = -kInf, ylo = kInf, yhi = -kInf, vlo = kInf, vhi = -kInf;
    for (int i = 0; i < n; ++i) {
        xlo = std::min(xlo, pts[static_cast<std::size_t>(i)].x);
        xhi = std::max(xhi, pts[static_cast<std::size_t>(i)].x);
        ylo = std::min(ylo, pts[static_cast<std::size_t>(i)].y);
        yhi = std::max(yhi, pts[static_cast<std::size_t>(i)].y);
        vlo = std::min(vlo, v[static_cast<std::size_t>(i)]);
        vhi = std::max(vhi, v[static_cast<std::size_t>(i)]);
    }
    const double sx = 1.0 / std::max(xhi - xlo, 1e-30);
    const double sy = 1.0 / std::max(yhi - ylo, 1e-30);
    const double sv = 1.0 / std::max(vhi - vlo, 1e-12);

    UpperEnvelope env;
    env.env_values.assign(static_cast<std::size_t>(n), 0.0);

    const bool planar = (vhi - vlo) * sv < 1e-12; // constant heights
    if (!planar) {
        std::vector<P3> lifted(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            lifted[static_cast<std::size_t>(i)] = {(pts[static_cast<std::size_t>(i)].x - xlo) * sx,
                                                   (pts[static_cast<std::size_t>(i)].y - ylo) * sy,
                                                   (v[static_cast<std::size_t>(i)] - vlo) * sv};
        }
        const std::vector<Face> faces = hull3d(lifted, 1e-12);
        for (const Face& f : faces) {
            if (f.nz > 1e-9) env.triangles.push_back({f.a, f.b, f.c});
        }
        if (env.triangles.empty()) throw HullFailure{};
    } else {
        const std::vector<int> h = hull2d(pts);
        if (h.size() < 3) throw HullFailure{};
        for (std::size_t i = 1; i + 1 < h.size(); ++i) {
            env.triangles.push_back({h[0], h[i], h[i + 1]});
        }
    }

    // envelope heights: own pole for triangulation vertices, interpolation
    // for submerged points
    std::vector<char> is_vertex(static_cast<std::size_t>(n), 0);
    for (const auto& t : env.triangles) {
        for (int k = 0; k < 3; ++k) is_vertex[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])] = 1;
    }
    for (int i = 0; i < n; ++i) {
        if (is_vertex[static_cast<std::size_t>(i)]) {
            env.env_values[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
        }
    }
    for (int i = 0; i < n; ++i) {
        if (is_vertex[static_cast<std::size_t>(i)]) continue;
        const Vec2 p = pts[static_cast<std::size_t>(i)];
        double best_val = -kInf;
        double best_pen = -kInf;
        for (const auto& t : env.triangles) {
            const Vec2 A = pts[static_cast<std::size_t>(t[0])];
            const Vec2 B = pts[static_cast<std::size_t>(t[1])];
            const Vec2 C = pts[static_cast<std::size_t>(t[2])];
            const double den = cross(B - A, C - A);
            if (std::fabs(den) < 1e-300) continue;
            const double l2 = cross(p - A, C - A) / den;
            const double l3 = cross(B - A, p - A) / den;
            const double l1 = 1.0 - l2 - l3;
            const double pen = std::min({l1, l2, l3});
            if (pen > best_pen) {
                best_pen = pen;
                best_val = l1 * v[static_cast<std::size_t>(t[0])] + l2 * v[static_cast<std::size_t>(t[1])] +
                           l3 * v[static_cast<std::size_t>(t[2])];
            }
        }
        env.env_values[static_cast<std::size_t>(i)] =
            std::max(best_val, v[static_cast<std::size_t>(i)]);
    }
    return env;
}

} // namespace

UpperEnvelope upper_concave_envelope(std::span<const Vec2> pts, std::span<const double> v) {
    if (pts.size() != v.size() || pts.size() < 3) {
        throw invalid_input_error("upper_concave_envelope: need >= 3 points with heights");
    }
    // jitter-retry ladder for degenerate lifted configurations
    for (int attempt = 0; attempt < 4; ++attempt) {
        try {
            if (attempt == 0) return envelope_attempt(pts, v);
            double scale = 0.0;
            for (double x : v) scale = std::max(scale, std::fabs(x));
            const double mag = (attempt == 1 ? 1e-12 : (attempt == 2 ? 1e-10 : 1e-8)) *
                               (scale + 1.0);
            Rng rng(0xC0FFEEULL + static_cast<std::uint64_t>(attempt));
            std::vector<double> vj(v.begin(), v.end());
            for (double& x : vj) x += mag * (rng.uniform() - 0.5);
            UpperEnvelope env = envelope_attempt(pts, vj);
            // heights are re-interpolated from the unjittered poles
            for (std::size_t i = 0; i < env.env_values.size(); ++i) {
                env.env_values[i] = std::max(env.env_values[i], v[i]);
            }
            return env;
        } catch (const HullFailure&) {
            continue;
        }
    }
    throw degenerate_sample_error("upper_concave_envelope: degenerate configuration");
}

// ---------------------------------------------------------------------------
// TentDensity2D

namespace {

double tri_area2(const Vec2& a, const Vec2& b, const Vec2& c) {
    return cross(b - a, c - a); // signed, twice the area
}

} // namespace

double TentDensity2D::log_pdf(Vec2 p) const {
    double best_pen = -kInf;
    double best_val = -kInf;
    for (const auto& t : triangles) {
        const Vec2 A = vertices[static_cast<std::size_t>(t[0])];
        const Vec2 B = vertices[static_cast<std::size_t>(t[1])];
        const Vec2 C = vertices[static_cast<std::size_t>(t[2])];
        const double den = tri_area2(A, B, C);
        if (std::fabs(den) < 1e-300) continue;
        const double l2 = cross(p - A, C - A) / den;
        const double l3 = cross(B - A, p - A) / den;
        const double l1 = 1.0 - l2 - l3;
        const double pen = std::min({l1, l2, l3});
        if (pen > best_pen) {
            best_pen = pen;
            best_val = l1 * log_values[static_cast<std::size_t>(t[0])] +
                       l2 * log_values[static_cast<std::size_t>(t[1])] +
                       l3 * log_values[static_cast<std::size_t>(t[2])];
        }
    }
    if (best_pen < -1e-9) return -kInf;
    return best_val;
}

double TentDensity2D::pdf(Vec2 p) const {
    const double lp = log_pdf(p);
    return lp == -kInf ? 0.0 : std::exp(lp);
}

double TentDensity2D::integral() const {
    double acc = 0.0;
    for (const auto& t : triangles) {
        const double a2 = std::fabs(tri_area2(vertices[static_cast<std::size_t>(t[0])],
                                              vertices[static_cast<std::size_t>(t[1])],
                                              vertices[static_cast<std::size_t>(t[2])]));
        if (a2 < 1e-300) continue;
        const double nodes[3] = {log_values[static_cast<std::size_t>(t[0])],
                                 log_values[static_cast<std::size_t>(t[1])],
                                 log_values[static_cast<std::size_t>(t[2])]};
        acc += a2 * exp_dd(nodes, 3);
    }
    return acc;
}

Vec2 TentDensity2D::mean() const {
    Vec2 m{0, 0};
    for (const auto& t : triangles) {
        const Vec2 V[3] = {vertices[static_cast<std::size_t>(t[0])], vertices[static_cast<std::size_t>(t[1])],
                           vertices[static_cast<std::size_t>(t[2])]};
        const double y[3] = {log_values[static_cast<std::size_t>(t[0])], log_values[static_cast<std::size_t>(t[1])],
                             log_values[static_cast<std::size_t>(t[2])]};
        const double a2 = std::fabs(tri_area2(V[0], V[1], V[2]));
        if (a2 < 1e-300) continue;
        for (int k = 0; k < 3; ++k) {
            const double nodes[4] = {y[0], y[1], y[2], y[k]};
            const double c = a2 * exp_dd(nodes, 4);
            m.x += c * V[k].x;
            m.y += c * V[k].y;
        }
    }
    return m;
}

Mat2 TentDensity2D::covariance() const {
    const Vec2 mu = mean();
    Mat2 s;
    for (const auto& t : triangles) {
        const Vec2 V[3] = {vertices[static_cast<std::size_t>(t[0])], vertices[static_cast<std::size_t>(t[1])],
                           vertices[static_cast<std::size_t>(t[2])]};
        const double y[3] = {log_values[static_cast<std::size_t>(t[0])], log_values[static_cast<std::size_t>(t[1])],
                             log_values[static_cast<std::size_t>(t[2])]};
        const double a2 = std::fabs(tri_area2(V[0], V[1], V[2]));
        if (a2 < 1e-300) continue;
        // int lambda_j lambda_k exp over the unit triangle is a confluent
        // divided difference; ordered pairs, doubled on the diagonal
        for (int j = 0; j < 3; ++j) {
            for (int k = 0; k < 3; ++k) {
                const double nodes[5] = {y[0], y[1], y[2], y[j], y[k]};
                const double c = a2 * (j == k ? 2.0 : 1.0) * exp_dd(nodes, 5);
                s.xx += c * V[j].x * V[k].x;
                s.xy += c * V[j].x * V[k].y;
                s.yy += c * V[j].y * V[k].y;
            }
        }
    }
    s.xx -= mu.x * mu.x;
    s.xy -= mu.x * mu.y;
    s.yy -= mu.y * mu.y;
    return s;
}

} // namespace fdrmix

// ---------------------------------------------------------------------------
// Weighted bivariate log-concave MLE

namespace fdrmix {
namespace {

struct Objective {
    double value;
    std::vector<double> grad;
    UpperEnvelope env;
};

// sigma(v) = sum w_i v_i - integral(exp(envelope(v))); gradient component is
// w_i minus the mass assigned to pole i (zero for submerged poles).
Objective eval_sigma(const std::vector<Vec2>& pts, const std::vector<double>& w,
                     const std::vector<double>& v) {
    Objective o;
    o.env = upper_concave_envelope(pts, v);
    o.grad.assign(v.size(), 0.0);
    double integral = 0.0;
    for (const auto& t : o.env.triangles) {
        const double a2 = std::fabs(tri_area2(pts[static_cast<std::size_t>(t[0])],
                                              pts[static_cast<std::size_t>(t[1])],
                                              pts[static_cast<std::size_t>(t[2])]));
        if (a2 < 1e-300) continue;
        const double y[3] = {v[static_cast<std::size_t>(t[0])], v[static_cast<std::size_t>(t[1])],
                             v[static_cast<std::size_t>(t[2])]};
        integral += a2 * exp_dd(y, 3);
        for (int k = 0; k < 3; ++k) {
            const double nodes[4] = {y[0], y[1], y[2], y[k]};
            o.grad[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])] -= a2 * exp_dd(nodes, 4);
        }
    }
    o.value = -integral;
    for (std::size_t i = 0; i < v.size(); ++i) {
        o.value += w[i] * v[i];
        o.grad[i] += w[i];
    }
    return o;
}

} // namespace

TentDensity2D logconcave_mle_2d(const WeightedSample2D& sample, double tol, int max_iterations,
                                const std::vector<double>* warm_start,
                                TentFitDiagnostics* diag) {
    if (!(tol > 0.0)) throw invalid_input_error("logconcave_mle_2d: tol must be positive");
    const std::vector<Vec2>& pts = sample.points();
    const std::vector<double>& w = sample.weights();
    const std::size_t n = pts.size();

    // hull area for the uniform start
    double hull_area = 0.0;
    {
        const std::vector<int> h = hull2d(pts);
        for (std::size_t i = 1; i + 1 < h.size(); ++i) {
            hull_area += 0.5 * std::fabs(tri_area2(pts[static_cast<std::size_t>(h[0])],
                                                   pts[static_cast<std::size_t>(h[i])],
                                                   pts[static_cast<std::size_t>(h[i + 1])]));
        }
    }
    if (!(hull_area > 1e-300)) {
        throw degenerate_sample_error("logconcave_mle_2d: all points collinear");
    }

    // moment-matched Gaussian start unless a warm start is supplied
    std::vector<double> v(n);
    if (warm_start != nullptr && warm_start->size() == n) {
        v = *warm_start;
    } else {
        const Vec2 m = sample.mean();
        Mat2 c = sample.covariance();
        const double ridge = 1e-8 * (1.0 + c.trace());
        c.xx += ridge;
        c.yy += ridge;
        const double det = c.det();
        if (det > 1e-300) {
            const double lognorm = -std::log(2.0 * M_PI * std::sqrt(det));
            for (std::size_t i = 0; i < n; ++i) {
                const Vec2 d = pts[i] - m;
                const double qf =
                    (c.yy * d.x * d.x - 2.0 * c.xy * d.x * d.y + c.xx * d.y * d.y) / det;
                v[i] = lognorm - 0.5 * qf;
            }
        } else {
            std::fill(v.begin(), v.end(), -std::log(hull_area));
        }
    }

    Objective cur = eval_sigma(pts, w, v);
    std::vector<double> best_v = v;
    double best_sigma = cur.value;

    // L-BFGS memory on the ascent problem
    constexpr std::size_t kMem = 8;
    std::deque<std::vector<double>> mem_s, mem_y;
    std::deque<double> mem_rho;
    std::vector<double> prev_grad;

    std::deque<double> accepted_hist;
    accepted_hist.push_back(cur.value);

    int it = 0;
    for (; it < max_iterations; ++it) {
        // two-loop recursion on the current gradient
        std::vector<double> d = cur.grad;
        if (!mem_s.empty()) {
            std::vector<double> alpha(mem_s.size());
            for (std::size_t k = mem_s.size(); k-- > 0;) {
                double sg = 0.0;
                for (std::size_t i = 0; i < n; ++i) sg += mem_s[k][i] * d[i];
                alpha[k] = mem_rho[k] * sg;
                for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * mem_y[k][i];
            }
            double yy = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                yy += mem_y.back()[i] * mem_y.back()[i];
                sy += mem_s.back()[i] * mem_y.back()[i];
            }
            const double h0 = (yy > 0.0) ? sy / yy : 1.0;
            for (std::size_t i = 0; i < n; ++i) d[i] *= h0;
            for (std::size_t k = 0; k < mem_s.size(); ++k) {
                double yg = 0.0;
                for (std::size_t i = 0; i < n; ++i) yg += mem_y[k][i] * d[i];
                const double beta = mem_rho[k] * yg;
                for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * mem_s[k][i];
            }
        }
        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) slope += cur.grad[i] * d[i];
        if (!(slope > 0.0)) {
            d = cur.grad;
            slope = 0.0;
            for (std::size_t i = 0; i < n; ++i) slope += d[i] * d[i];
        }

        // backtracking ascent step
        bool accepted = false;
        double alpha = 1.0;
        std::vector<double> trial(n);
        Objective nxt;
        for (int ls = 0; ls < 25; ++ls) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = v[i] + alpha * d[i];
            nxt = eval_sigma(pts, w, trial);
            if (std::isfinite(nxt.value) && nxt.value >= cur.value + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // diminishing-step subgradient move, accepted unconditionally
            double gn = 0.0;
            for (std::size_t i = 0; i < n; ++i) gn += cur.grad[i] * cur.grad[i];
            gn = std::sqrt(gn);
            const double step = 0.5 / ((1.0 + gn) * std::sqrt(static_cast<double>(it + 1)));
            for (std::size_t i = 0; i < n; ++i) trial[i] = v[i] + step * cur.grad[i];
            nxt = eval_sigma(pts, w, trial);
            mem_s.clear();
            mem_y.clear();
            mem_rho.clear();
        } else {
            std::vector<double> s(n), yv(n);
            double sy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = trial[i] - v[i];
                yv[i] = cur.grad[i] - nxt.grad[i]; // ascent curvature pair
                sy += s[i] * yv[i];
            }
            if (sy > 1e-14) {
                mem_s.push_back(std::move(s));
                mem_y.push_back(std::move(yv));
                mem_rho.push_back(1.0 / sy);
                if (mem_s.size() > kMem) {
                    mem_s.pop_front();
                    mem_y.pop_front();
                    mem_rho.pop_front();
                }
            }
        }

        if (std::getenv("FDRMIX_TENT_DEBUG") && it % 50 == 0) {
            double gn = 0;
            for (double gi : cur.grad) gn = std::max(gn, std::fabs(gi));
            std::fprintf(stderr, "tent it %d sigma=%.12f |g|inf=%.3e accepted=%d alpha=%.2e\n",
                         it, cur.value, gn, (int)accepted, alpha);
        }
        v = trial;
        cur = std::move(nxt);
        if (cur.value > best_sigma) {
            best_sigma = cur.value;
            best_v = v;
        }
        accepted_hist.push_back(best_sigma);
        if (accepted_hist.size() > 11) accepted_hist.pop_front();
        if (accepted_hist.size() == 11 &&
            accepted_hist.back() - accepted_hist.front() <
                tol * (1.0 + std::fabs(accepted_hist.back()))) {
            ++it;
            break;
        }
    }

    auto finalize = [&](const std::vector<double>& poles) {
        const UpperEnvelope env = upper_concave_envelope(pts, poles);
        TentDensity2D f;
        f.vertices = pts;
        f.log_values = env.env_values;
        f.triangles = env.triangles;
        const double logI = std::log(f.integral());
        for (double& x : f.log_values) x -= logI;
        return f;
    };

    if (diag != nullptr) {
        diag->iterations = it;
        diag->objective = best_sigma;
        diag->pole_values = best_v;
    }
    if (it >= max_iterations) {
        throw tent_non_convergence_error(
            "logconcave_mle_2d: no optimum within " + std::to_string(max_iterations) +
                " iterations",
            finalize(best_v));
    }
    return finalize(best_v);
}

Mat2 select_bandwidth_2d(const Mat2& sample_cov, const Mat2& mle_cov) {
    if (!std::isfinite(sample_cov.xx) || !std::isfinite(sample_cov.xy) ||
        !std::isfinite(sample_cov.yy) || !std::isfinite(mle_cov.xx) ||
        !std::isfinite(mle_cov.xy) || !std::isfinite(mle_cov.yy)) {
        throw invalid_input_error("select_bandwidth_2d: non-finite covariance entry");
    }
    return (sample_cov - mle_cov).psd_clip();
}

Mat2 select_bandwidth_2d(const std::array<std::array<double, 2>, 2>& sample_cov,
                         const std::array<std::array<double, 2>, 2>& mle_cov) {
    if (sample_cov[0][1] != sample_cov[1][0] || mle_cov[0][1] != mle_cov[1][0]) {
        throw invalid_input_error("select_bandwidth_2d: asymmetric covariance input");
    }
    return select_bandwidth_2d(Mat2{sample_cov[0][0], sample_cov[0][1], sample_cov[1][1]},
                               Mat2{mle_cov[0][0], mle_cov[0][1], mle_cov[1][1]});
}

// ---------------------------------------------------------------------------
// SmoothedTent2D

namespace {

// Duffy-collapsed 4x4 Gauss-Legendre rule on the unit triangle
// (u, v >= 0, u+v <= 1); weights sum to 1/2.
struct TriRule {
    std::array<double, 16> u, v, w;
    TriRule() {
        // 4-point Gauss-Legendre on [0,1]
        const double gx[4] = {0.069431844202973712, 0.33000947820757187,
                              0.66999052179242813, 0.93056815579702629};
        const double gw[4] = {0.17392742256872693, 0.32607257743127307,
                              0.32607257743127307, 0.17392742256872693};
        int k = 0;
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                u[static_cast<std::size_t>(k)] = gx[i];
                v[static_cast<std::size_t>(k)] = gx[j] * (1.0 - gx[i]);
                w[static_cast<std::size_t>(k)] = gw[i] * gw[j] * (1.0 - gx[i]);
                ++k;
            }
        }
    }
};

const TriRule& tri_rule() {
    static const TriRule r;
    return r;
}

} // namespace

SmoothedTent2D::SmoothedTent2D(TentDensity2D base, Mat2 bandwidth)
    : base_(std::move(base)), A_(bandwidth) {
    const auto ev = A_.eigenvalues();
    if (ev[1] < -1e-10 * std::max(1.0, std::fabs(ev[0]))) {
        throw invalid_input_error("SmoothedTent2D: bandwidth matrix must be PSD");
    }
    l1_ = std::max(ev[0], 0.0);
    l2_ = std::max(ev[1], 0.0);
    degenerate_ = l1_ < 1e-14;
    if (!degenerate_) {
        // eigenvector of the leading eigenvalue
        double vx, vy;
        if (std::fabs(A_.xy) > 1e-300) {
            vx = l1_ - A_.yy;
            vy = A_.xy;
        } else if (A_.xx >= A_.yy) {
            vx = 1.0;
            vy = 0.0;
        } else {
            vx = 0.0;
            vy = 1.0;
        }
        const double nrm = std::sqrt(vx * vx + vy * vy);
        e1_ = {vx / nrm, vy / nrm};
        e2_ = {-e1_.y, e1_.x};
        l2_ = std::max(l2_, 1e-10 * l1_); // keep the gaussian evaluable
        gauss_norm_ = 1.0 / (2.0 * M_PI * std::sqrt(l1_ * l2_));
        tri_bbox_.reserve(base_.triangles.size());
        for (const auto& t : base_.triangles) {
            const Vec2 A = base_.vertices[static_cast<std::size_t>(t[0])];
            const Vec2 B = base_.vertices[static_cast<std::size_t>(t[1])];
            const Vec2 C = base_.vertices[static_cast<std::size_t>(t[2])];
            tri_bbox_.push_back({std::min({A.x, B.x, C.x}), std::max({A.x, B.x, C.x}),
                                 std::min({A.y, B.y, C.y}), std::max({A.y, B.y, C.y})});
        }
    }
}

SmoothedTent2D smooth_2d(TentDensity2D base, Mat2 bandwidth) {
    return SmoothedTent2D(std::move(base), bandwidth);
}

namespace {

struct QuadCtx {
    Vec2 t;
    double inv_l1, inv_l2;
    Vec2 e1, e2;
    double lognorm;
    double metric_cap2; // squared Mahalanobis edge limit for leaves
    const kernels::KernelTable* kt;
};

double maha2(const QuadCtx& q, Vec2 d) {
    const double c1 = dot(d, q.e1);
    const double c2 = dot(d, q.e2);
    return c1 * c1 * q.inv_l1 + c2 * c2 * q.inv_l2;
}

// recursive subdivision; vertex log-density values are affine so they
// interpolate exactly at midpoints
double quad_tri(const QuadCtx& q, const Vec2& A, const Vec2& B, const Vec2& C, double ya,
                double yb, double yc, int depth) {
    const double e1m = maha2(q, B - A);
    const double e2m = maha2(q, C - B);
    const double e3m = maha2(q, A - C);
    if (depth < 8 && std::max({e1m, e2m, e3m}) > q.metric_cap2) {
        const Vec2 ab = 0.5 * (A + B), bc = 0.5 * (B + C), ca = 0.5 * (C + A);
        const double yab = 0.5 * (ya + yb), ybc = 0.5 * (yb + yc), yca = 0.5 * (yc + ya);
        return quad_tri(q, A, ab, ca, ya, yab, yca, depth + 1) +
               quad_tri(q, ab, B, bc, yab, yb, ybc, depth + 1) +
               quad_tri(q, ca, bc, C, yca, ybc, yc, depth + 1) +
               quad_tri(q, ab, bc, ca, yab, ybc, yca, depth + 1);
    }
    const double a2 = std::fabs(tri_area2(A, B, C));
    if (a2 < 1e-300) return 0.0;
    // skip leaves entirely beyond 9 sigma of the evaluation point
    const Vec2 cen = (1.0 / 3.0) * (A + B + C);
    const double edge = std::sqrt(std::max({e1m, e2m, e3m}));
    if (std::sqrt(maha2(q, cen - q.t)) - edge > 9.0) return 0.0;
    const TriRule& r = tri_rule();
    double ex[16];
    for (int k = 0; k < 16; ++k) {
        const double l2 = r.u[static_cast<std::size_t>(k)];
        const double l3 = r.v[static_cast<std::size_t>(k)];
        const double l1 = 1.0 - l2 - l3;
        const Vec2 x = l1 * A + l2 * B + l3 * C;
        const double h = l1 * ya + l2 * yb + l3 * yc;
        ex[k] = h + q.lognorm - 0.5 * maha2(q, x - q.t);
    }
    double vals[16];
    q.kt->exp_batch(ex, 16, vals);
    double acc = 0.0;
    for (int k = 0; k < 16; ++k) acc += r.w[static_cast<std::size_t>(k)] * vals[k];
    return a2 * acc; // rule weights sum to 1/2 over the unit triangle
}

} // namespace

double SmoothedTent2D::pdf(Vec2 t) const {
    if (!std::isfinite(t.x) || !std::isfinite(t.y)) {
        throw invalid_input_error("smoothed_pdf_2d: non-finite argument");
    }
    if (degenerate_) return base_.pdf(t);

    QuadCtx q;
    q.t = t;
    q.inv_l1 = 1.0 / l1_;
    q.inv_l2 = 1.0 / l2_;
    q.e1 = e1_;
    q.e2 = e2_;
    q.lognorm = std::log(gauss_norm_);
    q.metric_cap2 = 1.0;
    q.kt = &kernels::active_kernels();

    const double reach = 9.0 * std::sqrt(l1_);
    double acc = 0.0;
    for (std::size_t ti = 0; ti < base_.triangles.size(); ++ti) {
        const auto& bb = tri_bbox_[ti];
        if (t.x < bb[0] - reach || t.x > bb[1] + reach || t.y < bb[2] - reach ||
            t.y > bb[3] + reach) {
            continue;
        }
        const auto& tr = base_.triangles[ti];
        acc += quad_tri(q, base_.vertices[static_cast<std::size_t>(tr[0])],
                        base_.vertices[static_cast<std::size_t>(tr[1])],
                        base_.vertices[static_cast<std::size_t>(tr[2])],
                        base_.log_values[static_cast<std::size_t>(tr[0])],
                        base_.log_values[static_cast<std::size_t>(tr[1])],
                        base_.log_values[static_cast<std::size_t>(tr[2])], 0);
    }
    return acc;
}

void SmoothedTent2D::pdf_batch(std::span<const Vec2> t, std::span<double> out) const {
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = pdf(t[i]);
}

Vec2 SmoothedTent2D::mean() const { return base_.mean(); }

Mat2 SmoothedTent2D::covariance() const { return base_.covariance() + A_; }

} // namespace fdrmix
