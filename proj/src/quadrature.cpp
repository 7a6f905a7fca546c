#include "fdrmix/quadrature.hpp"

#include <cmath>

namespace fdrmix {
namespace {

// Gauss-Kronrod 7-15 pair (QUADPACK DQK15 constants), positive half.
constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0,
};
constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
};
constexpr double kWg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469,
};

struct GkResult {
    double kronrod;
    double err;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double resg = fc * kWg[3];
    double resk = fc * kWgk[7];
    for (int j = 0; j < 7; ++j) {
        const double x = h * kXgk[j];
        const double fsum = f(c - x) + f(c + x);
        resk += kWgk[j] * fsum;
        if (j % 2 == 1) resg += kWg[j / 2] * fsum;
    }
    resk *= h;
    resg *= h;
    return {resk, std::fabs(resk - resg)};
}

double adapt(const std::function<double(double)>& f, double a, double b, double tol,
             int depth) {
    const GkResult r = gk15(f, a, b);
    if (r.err <= tol || depth <= 0) return r.kronrod;
    const double c = 0.5 * (a + b);
    return adapt(f, a, c, 0.5 * tol, depth - 1) + adapt(f, c, b, 0.5 * tol, depth - 1);
}

} // namespace

double integrate_gk(const std::function<double(double)>& f, double a, double b,
                    double abs_tol, int max_depth) {
    if (a == b) return 0.0;
    return adapt(f, a, b, abs_tol, max_depth);
}

} // namespace fdrmix
