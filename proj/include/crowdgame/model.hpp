#pragma once

// Pure evaluations of the game: rate map and its inverse, blockchain cost
// sharing, wireless-power cost, utilities and their derivatives in r_i.

#include <cmath>
#include <numbers>

#include "crowdgame/types.hpp"

namespace crowdgame {

/// invert_rates rejects any rate vector whose SINR load reaches 1 - this margin.
inline constexpr double kFeasibilityMargin = 1e-9;

namespace detail {

inline void check_size(std::size_t got, const GameConfig& cfg) {
    if (got != cfg.size()) throw DimensionMismatch(got, cfg.size());
}

inline void check_index(std::size_t i, const GameConfig& cfg) {
    if (i >= cfg.size()) throw SensorIndexError(i, cfg.size());
}

// Power-to-signal scale g_i / d_i^alpha_i.
inline double signal_gain(const SensorParams& s) {
    return s.channel_gain / std::pow(s.ap_distance, s.path_loss_exp);
}

// Neumaier-compensated, so ten rates of 0.1 add up to exactly 1.
inline double rate_sum(const RateVector& r) {
    double total = 0.0, carry = 0.0;
    for (double v : r) {
        const double t = total + v;
        carry += std::abs(total) >= std::abs(v) ? (total - t) + v : (v - t) + total;
        total = t;
    }
    return total + carry;
}

}  // namespace detail

struct InverseResult {
    PowerVector powers;
    RateInversion decomposition;
};

inline RateVector forward_rates(const PowerVector& p, const GameConfig& cfg) {
    detail::check_size(p.size(), cfg);
    const std::size_t n = cfg.size();
    std::vector<double> beta(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = cfg.sensors[i];
        beta[i] = detail::signal_gain(s) * std::max(p[i] - s.circuit_power, 0.0);
        total += beta[i];
    }
    RateVector r(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (beta[i] <= 0.0) continue;
        const double interference = std::max(total - beta[i], 0.0) + cfg.noise_variance;
        r[i] = cfg.sensors[i].bandwidth * std::log2(1.0 + beta[i] / interference);
    }
    return r;
}

namespace detail {

enum class InversionFailure { none, load, power_cap };

struct InversionCheck {
    InversionFailure failure = InversionFailure::none;
    std::size_t sensor = 0;  // offending sensor for power_cap
    double value = 0.0;      // load, or the offending power
};

// Shared core of invert_rates and rates_feasible; reports failures instead
// of throwing so feasibility probes in line searches stay cheap.
inline InversionCheck invert_core(const RateVector& r, const GameConfig& cfg, InverseResult* out) {
    const std::size_t n = cfg.size();
    const double noise = cfg.noise_variance;
    thread_local std::vector<double> share;
    share.resize(n);
    double load = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = r[i] / cfg.sensors[i].bandwidth;
        // gamma/(1+gamma) = 1 - 2^{-x}, written to keep precision for small x
        share[i] = -std::expm1(-x * std::numbers::ln2);
        load += share[i];
    }
    if (load >= 1.0 - kFeasibilityMargin) return {InversionFailure::load, 0, load};

    const double scale = noise / (1.0 - load);  // S + sigma^2
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = cfg.sensors[i];
        const double power = s.circuit_power + share[i] * scale / signal_gain(s);
        if (power > s.max_received_power) return {InversionFailure::power_cap, i, power};
    }
    if (out != nullptr) {
        auto& inv = out->decomposition;
        inv.gamma.resize(n);
        inv.beta.resize(n);
        inv.load = load;
        inv.beta_sum = noise * load / (1.0 - load);
        out->powers = PowerVector(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = cfg.sensors[i];
            inv.gamma[i] = std::expm1(r[i] / s.bandwidth * std::numbers::ln2);
            inv.beta[i] = share[i] * scale;
            out->powers[i] = s.circuit_power + inv.beta[i] / signal_gain(s);
        }
    }
    return {};
}

inline void check_rates(const RateVector& r, const GameConfig& cfg) {
    check_size(r.size(), cfg);
    for (std::size_t i = 0; i < r.size(); ++i)
        if (!(r[i] >= 0.0) || !std::isfinite(r[i]))
            throw GameError("rate of sensor " + std::to_string(i) + " must be finite and >= 0");
}

}  // namespace detail

/// Closed-form inverse of forward_rates.
///
/// Each target rate fixes the SINR gamma_i, hence the share
/// t_i = gamma_i/(1+gamma_i) = beta_i/(S + sigma^2) of the total received
/// signal plus noise. Summing gives T = S/(S + sigma^2), so S = sigma^2 T/(1-T)
/// and every beta_i follows directly. Throws InfeasibleRates when T is not
/// below 1 - kFeasibilityMargin and PowerBoundExceeded when a sensor would
/// need more than its received-power cap.
inline InverseResult invert_rates(const RateVector& r, const GameConfig& cfg) {
    detail::check_rates(r, cfg);
    InverseResult res;
    const auto check = detail::invert_core(r, cfg, &res);
    switch (check.failure) {
        case detail::InversionFailure::load: throw InfeasibleRates(check.value);
        case detail::InversionFailure::power_cap:
            throw PowerBoundExceeded(check.sensor, check.value,
                                     cfg.sensors[check.sensor].max_received_power);
        case detail::InversionFailure::none: break;
    }
    return res;
}

/// True when invert_rates(r, cfg) would succeed.
inline bool rates_feasible(const RateVector& r, const GameConfig& cfg) {
    detail::check_rates(r, cfg);
    return detail::invert_core(r, cfg, nullptr).failure == detail::InversionFailure::none;
}

inline double blockchain_power(double total_rate, const BlockchainParams& bc) {
    const double compute = bc.compute_coeff * total_rate;
    return bc.quad_coeff * compute * compute + bc.lin_coeff * compute + bc.const_coeff;
}

/// Sensor i's proportional share of the blockchain power. Nobody pays when
/// the total rate is zero.
inline double transaction_fee(std::size_t i, const RateVector& r, const GameConfig& cfg) {
    detail::check_size(r.size(), cfg);
    detail::check_index(i, cfg);
    const double total = detail::rate_sum(r);
    if (total <= 0.0) return 0.0;
    return r[i] / total * blockchain_power(total, cfg.blockchain);
}

/// Price paid to the operator for delivering received power p_i.
inline double wpt_cost(std::size_t i, double p_i, const GameConfig& cfg) {
    detail::check_index(i, cfg);
    return cfg.power_price * p_i *
           std::pow(cfg.sensors[i].beacon_distance, cfg.wpt_path_loss_exp);
}

inline double utility_power_space(std::size_t i, const PowerVector& p, const GameConfig& cfg) {
    detail::check_index(i, cfg);
    const RateVector r = forward_rates(p, cfg);
    return cfg.sensors[i].unit_rate_price * r[i] - wpt_cost(i, p[i], cfg) -
           transaction_fee(i, r, cfg);
}

inline double utility_rate_space(std::size_t i, const RateVector& r, const GameConfig& cfg) {
    detail::check_index(i, cfg);
    const auto inv = invert_rates(r, cfg);
    return cfg.sensors[i].unit_rate_price * r[i] - wpt_cost(i, inv.powers[i], cfg) -
           transaction_fee(i, r, cfg);
}

namespace detail {

// Evaluates f(r with r_i replaced by x). Copies once per call.
template <class F>
double with_rate(const RateVector& r, std::size_t i, double x, F&& f) {
    RateVector moved = r;
    moved[i] = x;
    return f(moved);
}

// Central-difference stencil of order 1 or 2 around r_i. When a perturbed
// point leaves the feasible set the step is shrunk once before giving up.
template <class F>
double central_difference(const RateVector& r, std::size_t i, double h, int order, F&& f) {
    for (int attempt = 0; attempt < 2; ++attempt, h *= 0.1) {
        try {
            const double up = with_rate(r, i, r[i] + h, f);
            const double down = with_rate(r, i, r[i] - h, f);
            if (order == 1) return (up - down) / (2.0 * h);
            const double mid = f(r);
            return (up - 2.0 * mid + down) / (h * h);
        } catch (const GameError&) {
            if (attempt == 1) throw;
        }
    }
    return 0.0;  // unreachable
}

}  // namespace detail

/// du_i/dr_i by central difference with step max(1e-6, 1e-6 r_i).
inline double utility_gradient(std::size_t i, const RateVector& r, const GameConfig& cfg) {
    detail::check_index(i, cfg);
    detail::check_size(r.size(), cfg);
    const double h = std::max(1e-6, 1e-6 * r[i]);
    return detail::central_difference(r, i, h, 1, [&](const RateVector& x) {
        return utility_rate_space(i, x, cfg);
    });
}

/// Closed-form du_i/dr_i. Only needs the SINR load below 1, so it also
/// works on the edge of the feasible set where finite differences cannot.
///
/// With t_j = 1 - 2^{-r_j/b_j} and T = sum t_j, the received power is
/// p_i = c_i + (sigma^2 d_i^alpha_i / g_i) t_i / (1 - T), whose r_i-derivative
/// is (sigma^2 d_i^alpha_i / g_i) t_i' (1 - T + t_i) / (1 - T)^2.
inline double utility_gradient_analytic(std::size_t i, const RateVector& r, const GameConfig& cfg) {
    detail::check_index(i, cfg);
    detail::check_size(r.size(), cfg);
    double load = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j)
        load += -std::expm1(-r[j] / cfg.sensors[j].bandwidth * std::numbers::ln2);
    if (load >= 1.0 - kFeasibilityMargin) throw InfeasibleRates(load);

    const auto& s = cfg.sensors[i];
    const double k = std::numbers::ln2 / s.bandwidth;
    const double t = -std::expm1(-r[i] * k);
    const double dt = k * (1.0 - t);
    const double slack = 1.0 - load;
    const double dpower =
        cfg.noise_variance / detail::signal_gain(s) * dt * (slack + t) / (slack * slack);
    const double dcost = cfg.power_price * std::pow(s.beacon_distance, cfg.wpt_path_loss_exp) * dpower;

    const auto& bc = cfg.blockchain;
    const double total = detail::rate_sum(r);
    const double m2 = bc.compute_coeff * bc.compute_coeff;
    double dfee = bc.quad_coeff * m2 * (total + r[i]) + bc.lin_coeff * bc.compute_coeff;
    if (total > 0.0) dfee += bc.const_coeff * (total - r[i]) / (total * total);

    return s.unit_rate_price - dcost - dfee;
}

/// d^2u_i/dr_i^2 as the sum of the power-cost curvature (second central
/// difference of the wpt cost of the inverted power) and the closed-form fee
/// curvature -2am^2 + 2c sum_{j!=i} r_j / (sum_j r_j)^3.
inline double utility_second_derivative(std::size_t i, const RateVector& r, const GameConfig& cfg) {
    detail::check_index(i, cfg);
    detail::check_size(r.size(), cfg);
    const double h = std::max(1e-4, 1e-4 * r[i]);
    const double power_curvature = detail::central_difference(r, i, h, 2, [&](const RateVector& x) {
        return wpt_cost(i, invert_rates(x, cfg).powers[i], cfg);
    });

    const auto& bc = cfg.blockchain;
    const double total = detail::rate_sum(r);
    const double m2 = bc.compute_coeff * bc.compute_coeff;
    double fee_term = -2.0 * bc.quad_coeff * m2;
    if (total > 0.0) fee_term += 2.0 * bc.const_coeff * (total - r[i]) / (total * total * total);
    return -power_curvature + fee_term;
}

}  // namespace crowdgame
