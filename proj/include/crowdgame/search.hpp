#pragma once

// Scalar search primitives used by the best-response machinery.

#include <cmath>
#include <utility>

namespace crowdgame::search {

struct Maximum {
    double x;
    double value;
};

/// Golden-section search for the maximum of a unimodal f on [lo, hi],
/// stopping once the bracket is narrower than `width`. Ties keep the left
/// point so that flat stretches resolve toward smaller arguments.
template <class F>
Maximum golden_section_max(F&& f, double lo, double hi, double width) {
    constexpr double inv_phi = 0.6180339887498949;  // (sqrt(5) - 1) / 2
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    while (hi - lo > width) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    const double mid = 0.5 * (lo + hi);
    return {mid, f(mid)};
}

/// Largest x in [lo, hi) with ok(x) true, assuming ok(lo) and !ok(hi) and a
/// single transition in between. Returns a point where ok holds.
template <class Pred>
double bisect_boundary(Pred&& ok, double lo, double hi) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (ok(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

}  // namespace crowdgame::search
