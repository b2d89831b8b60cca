#pragma once

// Brute-force reference implementations for verification. Kept deliberately
// naive and separate from the solver's code paths: the rate formula is
// transcribed term by term, and best responses come from dense grids.

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowdgame/model.hpp"

namespace crowdgame::oracle {

/// Rate of sensor i from received powers, written out literally:
/// b_i log2(1 + g_i (p_i - c_i)/d_i^alpha_i / (sum_{j!=i} g_j (p_j - c_j)/d_j^alpha_j + sigma^2)),
/// with transmit power below zero treated as silence.
inline double scalar_rate(std::size_t i, const PowerVector& p, const GameConfig& cfg) {
    const SensorParams& me = cfg.sensors.at(i);
    double transmit = p[i] - me.circuit_power;
    if (transmit <= 0.0) return 0.0;
    double signal = me.channel_gain * transmit / std::pow(me.ap_distance, me.path_loss_exp);

    double interference = 0.0;
    for (std::size_t j = 0; j < cfg.sensors.size(); ++j) {
        if (j == i) continue;
        const SensorParams& other = cfg.sensors[j];
        double other_transmit = p[j] - other.circuit_power;
        if (other_transmit < 0.0) other_transmit = 0.0;
        interference += other.channel_gain * other_transmit / std::pow(other.ap_distance, other.path_loss_exp);
    }
    double sinr = signal / (interference + cfg.noise_variance);
    return me.bandwidth * std::log(1.0 + sinr) / std::log(2.0);
}

namespace detail {

inline bool utility_defined(std::size_t i, RateVector& r, double v, const GameConfig& cfg) {
    r[i] = v;
    try {
        (void)utility_rate_space(i, r, cfg);
        return true;
    } catch (const GameError&) {
        return false;
    }
}

// Upper end of sensor i's feasible interval by plain bisection on whether the
// utility can be evaluated.
inline double interval_top(std::size_t i, RateVector r, const GameConfig& cfg, double min_rate) {
    if (!utility_defined(i, r, min_rate, cfg)) throw EmptyFeasibleInterval(i, min_rate);
    double lo = min_rate;
    double hi = min_rate + 1.0;
    while (utility_defined(i, r, hi, cfg)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) return lo;
    }
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (utility_defined(i, r, mid, cfg))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

struct GridMax {
    double x = 0.0;
    double value = -std::numeric_limits<double>::infinity();
};

inline GridMax grid_max(std::size_t i, RateVector r, const GameConfig& cfg, std::size_t grid_points,
                        double min_rate) {
    if (grid_points < 2) throw GameError("oracle grid needs at least 2 points");
    const double top = interval_top(i, r, cfg, min_rate);
    GridMax best;
    for (std::size_t k = 0; k < grid_points; ++k) {
        const double v = k + 1 == grid_points
                             ? top
                             : std::min(top, min_rate + (top - min_rate) * static_cast<double>(k) /
                                                            static_cast<double>(grid_points - 1));
        r[i] = v;
        const double val = utility_rate_space(i, r, cfg);
        if (val > best.value) best = {v, val};
    }
    return best;
}

}  // namespace detail

/// Argmax of u_i over a uniform grid on sensor i's feasible interval
/// (r[i] is ignored). Ties go to the smallest rate.
inline double grid_best_response(std::size_t i, const RateVector& r, const GameConfig& cfg,
                                 std::size_t grid_points, double min_rate = 0.1) {
    return detail::grid_max(i, r, cfg, grid_points, min_rate).x;
}

/// Largest utility gain any sensor can get by a unilateral move to a grid
/// point. Values <= epsilon certify an epsilon-NE at grid resolution.
inline double grid_certify_ne(const RateVector& r_star, const GameConfig& cfg,
                              std::size_t grid_points, double min_rate = 0.1) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cfg.sensors.size(); ++i) {
        const double current = utility_rate_space(i, r_star, cfg);
        const double lo = std::min(min_rate, r_star[i]);
        const double best = detail::grid_max(i, r_star, cfg, grid_points, lo).value;
        worst = std::max(worst, best - current);
    }
    return worst;
}

}  // namespace crowdgame::oracle
