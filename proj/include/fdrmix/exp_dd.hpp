#pragma once

#include <cstddef>

namespace fdrmix {

/// First divided difference of exp: (e^b - e^a)/(b - a), exact in the
/// confluent limit via sinhc.
double exp_dd2(double a, double b);

/// Divided difference of exp over n nodes (n in [1, 8]). Repeated and
/// clustered nodes are handled by a Taylor branch, so confluent forms
/// (Hermite-Genocchi integrals over the simplex) come out exact:
///   exp_dd({a,b})       = int_0^1 e^{(1-t)a+tb} dt
///   exp_dd({a,b,b})     = int_0^1 t e^{(1-t)a+tb} dt
///   exp_dd({y1,y2,y3})  = int over the unit triangle of e^{affine}
double exp_dd(const double* nodes, int n);

/// Segment quantities for I(a,b) = int_0^1 e^{(1-t)a+tb} dt: the value and
/// its first and second partials in the endpoint values.
struct SegExp {
    double val;
    double da, db;
    double daa, dab, dbb;
};
SegExp seg_exp_all(double a, double b);

} // namespace fdrmix
