#pragma once

#include <functional>

namespace fdrmix {

/// Adaptive Gauss-Kronrod (7-15) integration of f over [a, b] to absolute
/// tolerance abs_tol. Bisects until the embedded error estimate is met.
double integrate_gk(const std::function<double(double)>& f, double a, double b,
                    double abs_tol, int max_depth = 48);

} // namespace fdrmix
