#pragma once

// Nash-equilibrium search for the rate game: existence check, best response,
// iterated best response (Gauss-Seidel / Jacobi), projected gradient ascent,
// and epsilon-NE verification by unilateral deviation search.

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "crowdgame/fixed_point.hpp"
#include "crowdgame/model.hpp"
#include "crowdgame/search.hpp"

namespace crowdgame {

enum class Method { gauss_seidel_br, jacobi_br, gradient_ascent };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::gauss_seidel_br: return "gauss_seidel_br";
        case Method::jacobi_br: return "jacobi_br";
        case Method::gradient_ascent: return "gradient_ascent";
    }
    return "unknown";
}

inline std::optional<Method> parse_method(std::string_view name) {
    if (name == "gauss_seidel_br") return Method::gauss_seidel_br;
    if (name == "jacobi_br") return Method::jacobi_br;
    if (name == "gradient_ascent") return Method::gradient_ascent;
    return std::nullopt;
}

struct SolverOptions {
    Method method = Method::gauss_seidel_br;
    std::optional<RateVector> init_rates;  // empty: min_rate + 0.1 for every sensor
    double step_size = 1e-3;
    double tol = 1e-8;
    std::size_t max_iter = 10000;
    double min_rate = 0.1;

    // best-response line search
    std::size_t coarse_points = 64;
    double refine_width = 1e-10;

    // Anderson window for the outer fixed-point iteration; 0 runs the plain
    // dynamics.
    std::size_t acceleration_depth = 10;

    void validate() const {
        if (!(tol > 0.0)) throw GameError("solver tol must be > 0");
        if (max_iter < 1) throw GameError("solver max_iter must be >= 1");
        if (!(min_rate >= 0.0) || !std::isfinite(min_rate)) throw GameError("min_rate must be >= 0");
        if (method == Method::gradient_ascent && !(step_size > 0.0))
            throw GameError("gradient ascent needs step_size > 0");
        if (coarse_points < 2) throw GameError("coarse_points must be >= 2");
    }
};

/// Largest r_i for which invert_rates still succeeds with r_{-i} held fixed.
/// r[i] itself is ignored. Throws EmptyFeasibleInterval when even
/// r_i = min_rate is infeasible.
inline double feasible_rate_ceiling(std::size_t i, const RateVector& r, const GameConfig& cfg,
                                    double min_rate) {
    detail::check_index(i, cfg);
    RateVector x = r;
    auto ok = [&](double v) {
        x[i] = v;
        return rates_feasible(x, cfg);
    };
    if (!ok(min_rate)) throw EmptyFeasibleInterval(i, min_rate);

    // The load bound T < 1 caps r_i at -b_i log2(T_{-i}); without interference
    // only the power cap limits r_i, so grow until it bites.
    double others_load = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j)
        if (j != i) others_load += -std::expm1(-r[j] / cfg.sensors[j].bandwidth * std::numbers::ln2);
    double hi;
    if (others_load > 0.0) {
        hi = -cfg.sensors[i].bandwidth * std::log2(others_load);
    } else {
        hi = std::max(2.0 * min_rate, 1.0);
        while (ok(hi)) {
            hi *= 2.0;
            if (hi > 1e12) throw GameError("rate of sensor " + std::to_string(i) + " is unbounded");
        }
    }
    if (ok(hi)) return hi;
    return search::bisect_boundary(ok, min_rate, hi);
}

/// Utility-maximizing rate of sensor i against the rates of the others in r
/// (r[i] is ignored).
///
/// A coarse grid over [min_rate, ceiling] brackets the maximum and
/// golden-section search narrows it to refine_width. Comparing utilities
/// cannot resolve the argmax much below sqrt(machine eps) of the utility
/// scale, so the final bracket is then bisected on the sign of the analytic
/// first-order condition. Ties resolve toward smaller r_i.
inline double best_response(std::size_t i, const RateVector& r, const GameConfig& cfg,
                            const SolverOptions& opts) {
    const double lo = opts.min_rate;
    const double hi = feasible_rate_ceiling(i, r, cfg, lo);
    if (hi <= lo) return lo;
    RateVector x = r;
    auto u = [&](double v) {
        x[i] = v;
        return utility_rate_space(i, x, cfg);
    };
    auto slope = [&](double v) {
        x[i] = v;
        return utility_gradient_analytic(i, x, cfg);
    };

    const std::size_t n = opts.coarse_points;
    const double cell = (hi - lo) / static_cast<double>(n - 1);
    auto node = [&](std::size_t k) { return k + 1 >= n ? hi : lo + cell * static_cast<double>(k); };
    std::size_t best_k = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const double val = u(node(k));
        if (val > best_val) {
            best_val = val;
            best_k = k;
        }
    }
    const double best_x = node(best_k);
    if (best_k == 0 && slope(lo) <= 0.0) return lo;
    if (best_k + 1 == n && slope(hi) >= 0.0) return hi;

    const double a = best_k == 0 ? lo : node(best_k - 1);
    const double b = node(std::min(best_k + 1, n - 1));
    auto refined = search::golden_section_max(u, a, b, opts.refine_width);

    // golden section on values stalls near sqrt(eps), so widen the polishing
    // bracket until the slope changes sign across it
    double pa = a, pb = b;
    for (double w = opts.refine_width; w < b - a; w *= 8.0) {
        pa = std::max(a, refined.x - w);
        pb = std::min(b, refined.x + w);
        if (slope(pa) > 0.0 && slope(pb) < 0.0) break;
        pa = a;
        pb = b;
    }
    if (slope(pa) > 0.0 && slope(pb) < 0.0) {
        const double root = search::bisect_boundary([&](double v) { return slope(v) > 0.0; }, pa, pb);
        refined = {root, u(root)};
    }
    // a non-unimodal bracket can leave the coarse point ahead
    if (best_val > refined.value + 1e-12 * std::max(1.0, std::abs(best_val))) return best_x;
    return refined.x;
}

namespace detail {

// Largest step along next - prev, halving from the full step, that leaves
// the joint profile invertible; prev itself must be feasible.
inline RateVector damp_into_feasible(const RateVector& prev, const RateVector& next,
                                     const GameConfig& cfg) {
    RateVector out = next;
    double theta = 1.0;
    for (int k = 0; k < 60 && !rates_feasible(out, cfg); ++k) {
        theta *= 0.5;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = prev[i] + theta * (next[i] - prev[i]);
    }
    return rates_feasible(out, cfg) ? out : prev;
}

// Own-rate gradients of every sensor, zeroed where r_i sits on min_rate and
// the gradient points out of the box.
inline std::vector<double> projected_field(const RateVector& r, const GameConfig& cfg, double min_rate) {
    std::vector<double> g(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        g[i] = utility_gradient_analytic(i, r, cfg);
        if (r[i] <= min_rate && g[i] < 0.0) g[i] = 0.0;
    }
    return g;
}

// Advances the projected gradient flow dr_i/dt = du_i/dr_i by `horizon` time
// units with embedded Heun-Euler substeps. The flow is stiff next to the
// SINR load limit, where the power cost of a rate increase explodes, so the
// substep length is error-controlled; a single Euler step of full length is
// taken whenever it passes the error test. `substep` carries the last
// accepted substep length between calls.
inline RateVector gradient_flow(const RateVector& start, const GameConfig& cfg, double horizon,
                                double min_rate, double& substep) {
    constexpr double kLocalTol = 1e-9;
    constexpr double kMinSubstep = 1e-15;
    const std::size_t n = start.size();
    (void)invert_rates(start, cfg);
    RateVector r = start;
    double remaining = horizon;
    double h = std::min(substep > 0.0 ? substep : horizon, horizon);
    auto advance = [&](const std::vector<double>& dir, double len) {
        RateVector out = r;
        for (std::size_t i = 0; i < n; ++i) out[i] = std::max(min_rate, r[i] + len * dir[i]);
        return out;
    };
    for (std::size_t guard = 0; remaining > 0.0 && guard < 10'000'000; ++guard) {
        h = std::min(h, remaining);
        const auto k1 = projected_field(r, cfg, min_rate);
        RateVector euler = advance(k1, h);
        if (!rates_feasible(euler, cfg)) {
            if (h > kMinSubstep) {
                h *= 0.25;
                continue;
            }
            // pinned against a power cap: project onto each sensor's ceiling
            for (std::size_t i = 0; i < n; ++i)
                euler[i] = std::min(euler[i], feasible_rate_ceiling(i, r, cfg, min_rate));
            r = damp_into_feasible(r, euler, cfg);
            remaining -= h;
            continue;
        }
        const auto k2 = projected_field(euler, cfg, min_rate);
        std::vector<double> heun_dir(n);
        for (std::size_t i = 0; i < n; ++i) heun_dir[i] = 0.5 * (k1[i] + k2[i]);
        RateVector heun = advance(heun_dir, h);
        const double err = inf_norm_diff(heun, euler);
        const bool ok = err <= kLocalTol && rates_feasible(heun, cfg);
        const double grow = err > 0.0 ? 0.9 * std::sqrt(kLocalTol / err) : 2.0;
        if (!ok && h > kMinSubstep) {
            h *= std::clamp(grow, 0.1, 0.5);
            continue;
        }
        r = ok ? std::move(heun) : std::move(euler);
        remaining -= h;
        substep = h;
        h *= std::clamp(grow, 1.0, 2.0);
    }
    return r;
}

struct SweepState {
    double flow_substep = 0.0;
};

struct Update {
    RateVector next;
    double size = 0.0;  // inf-norm of the undamped update, used for convergence
};

inline Update sweep_once(const RateVector& r, const GameConfig& cfg, const SolverOptions& opts,
                         SweepState& state) {
    const std::size_t n = cfg.size();
    Update up;
    switch (opts.method) {
        case Method::gauss_seidel_br: {
            up.next = r;
            for (std::size_t i = 0; i < n; ++i) up.next[i] = best_response(i, up.next, cfg, opts);
            up.size = inf_norm_diff(up.next, r);
            break;
        }
        case Method::jacobi_br: {
            // Simultaneous best responses can jointly overshoot the load
            // limit; the move is shortened until the profile is invertible
            // but convergence is judged on the full best-response step.
            RateVector br(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) br[i] = best_response(i, r, cfg, opts);
            up.size = inf_norm_diff(br, r);
            up.next = damp_into_feasible(r, br, cfg);
            break;
        }
        case Method::gradient_ascent:
            up.next = gradient_flow(r, cfg, opts.step_size, opts.min_rate, state.flow_substep);
            up.size = inf_norm_diff(up.next, r);
            break;
    }
    return up;
}

inline Update sweep_once(const RateVector& r, const GameConfig& cfg, const SolverOptions& opts) {
    SweepState state;
    return sweep_once(r, cfg, opts, state);
}

}  // namespace detail

/// Fills powers, utilities, fees and shares of a result from its rates.
inline void evaluate_profile(EquilibriumResult& res, const GameConfig& cfg) {
    const std::size_t n = cfg.size();
    res.powers = invert_rates(res.rates, cfg).powers;
    res.utilities.assign(n, 0.0);
    res.fees.assign(n, 0.0);
    res.fee_shares.assign(n, 0.0);
    const double total = detail::rate_sum(res.rates);
    for (std::size_t i = 0; i < n; ++i) {
        res.utilities[i] = utility_rate_space(i, res.rates, cfg);
        res.fees[i] = transaction_fee(i, res.rates, cfg);
        res.fee_shares[i] = total > 0.0 ? res.rates[i] / total : 0.0;
    }
}

/// Finds a fixed point of the selected dynamics.
///
/// One iteration applies one update of the method: a Gauss-Seidel sweep of
/// best responses in ascending sensor order, a simultaneous best response of
/// all sensors, or step_size time units of the projected gradient flow.
/// When acceleration_depth > 0 the next iterate is extrapolated from recent
/// updates by Anderson mixing; extrapolations that leave the feasible set
/// fall back to the plain update. Iteration stops once both the plain update
/// and the step actually taken move the profile by less than tol in the
/// inf-norm. Non-convergence is reported through the result, not thrown.
inline EquilibriumResult solve(const GameConfig& cfg, const SolverOptions& opts) {
    opts.validate();
    const std::size_t n = cfg.size();
    RateVector r = opts.init_rates.value_or(RateVector(n, opts.min_rate + 0.1));
    detail::check_size(r.size(), cfg);
    (void)invert_rates(r, cfg);

    AndersonMixer mixer(opts.acceleration_depth);
    detail::SweepState state;
    EquilibriumResult res;
    res.trace.push_back(r);
    res.residual = std::numeric_limits<double>::infinity();

    // Plain update of the previous iterate, kept to undo an extrapolation
    // that the dynamics cannot continue from.
    std::optional<RateVector> fallback;
    bool extrapolated = false;
    auto undo = [&] {
        mixer.reset();
        r = std::move(*fallback);
        fallback.reset();
        res.trace.back() = r;
        extrapolated = false;
    };

    while (res.iterations < opts.max_iter) {
        ++res.iterations;
        detail::Update up;
        try {
            up = detail::sweep_once(r, cfg, opts, state);
        } catch (const GameError&) {
            if (!extrapolated || !fallback) throw;
            undo();
            continue;
        }
        RateVector next(mixer.next(r.values(), up.next.values()));
        for (double& v : next) v = std::max(v, opts.min_rate);
        extrapolated = next != up.next && rates_feasible(next, cfg);
        if (!extrapolated) {
            if (next != up.next) mixer.reset();
            next = up.next;
        }
        res.residual = std::max(up.size, inf_norm_diff(next, r));
        if (res.residual < opts.tol) {
            r = std::move(up.next);
            res.trace.push_back(r);
            res.converged = true;
            break;
        }
        fallback = std::move(up.next);
        r = std::move(next);
        res.trace.push_back(r);
    }
    res.rates = r;
    evaluate_profile(res, cfg);
    return res;
}

/// Axis-aligned box of rate vectors.
struct RateBox {
    RateVector lower;
    RateVector upper;
};

struct ExistenceReport {
    bool condition_a = false;       // a m^2 - c >= 0
    bool condition_b = false;       // sum of the box's lower corner >= 1
    bool numeric_concavity = false; // every sampled d^2u_i/dr_i^2 < 0
    double quad_margin = 0.0;       // a m^2 - c
    double worst_second_derivative = -std::numeric_limits<double>::infinity();
    std::size_t worst_sensor = 0;
    RateVector worst_point;
    std::size_t samples_evaluated = 0;
    std::size_t samples_rejected = 0;  // quasi-random points outside the feasible set
};

/// Checks the sufficient existence conditions and samples the own-rate
/// curvature of every utility at `samples` feasible Sobol points of the box.
/// Box points that are not invertible are skipped; at most 64 * samples
/// candidates are drawn.
inline ExistenceReport check_existence(const GameConfig& cfg, const RateBox& region,
                                       std::size_t samples) {
    const std::size_t n = cfg.size();
    detail::check_size(region.lower.size(), cfg);
    detail::check_size(region.upper.size(), cfg);
    if (samples < 1) throw GameError("check_existence needs at least one sample");

    ExistenceReport rep;
    const auto& bc = cfg.blockchain;
    rep.quad_margin = bc.quad_coeff * bc.compute_coeff * bc.compute_coeff - bc.const_coeff;
    rep.condition_a = rep.quad_margin >= 0.0;
    rep.condition_b = detail::rate_sum(region.lower) >= 1.0;

    boost::random::sobol qrng(static_cast<unsigned>(n));
    const double span = static_cast<double>(qrng.max() - qrng.min()) + 1.0;
    qrng.discard(n);  // the first Sobol point is the lower corner itself

    RateVector x(n, 0.0);
    const std::size_t max_draws = 64 * samples;
    bool all_negative = true;
    for (std::size_t draw = 0; draw < max_draws && rep.samples_evaluated < samples; ++draw) {
        for (std::size_t j = 0; j < n; ++j) {
            const double unit = static_cast<double>(qrng() - qrng.min()) / span;
            x[j] = region.lower[j] + unit * (region.upper[j] - region.lower[j]);
        }
        std::vector<double> curv(n);
        try {
            (void)invert_rates(x, cfg);
            for (std::size_t i = 0; i < n; ++i) curv[i] = utility_second_derivative(i, x, cfg);
        } catch (const GameError&) {
            ++rep.samples_rejected;
            continue;
        }
        ++rep.samples_evaluated;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(curv[i] < 0.0)) all_negative = false;
            if (curv[i] > rep.worst_second_derivative) {
                rep.worst_second_derivative = curv[i];
                rep.worst_sensor = i;
                rep.worst_point = x;
            }
        }
    }
    if (rep.samples_evaluated == 0) throw GameError("existence-check region is entirely infeasible");
    rep.numeric_concavity = all_negative;
    return rep;
}

struct DeviationReport {
    std::vector<double> best_deviation;  // per sensor
    std::vector<double> gain;            // u_i(best deviation) - u_i(r*)
    double worst_gain = -std::numeric_limits<double>::infinity();
    std::size_t worst_sensor = 0;
    bool verified = false;
};

/// Searches unilateral deviations of every sensor on a grid over its
/// feasible interval, refines around the best cell, and accepts r* as an
/// epsilon-NE when no sensor gains more than epsilon.
inline DeviationReport verify_epsilon_ne(const RateVector& r_star, const GameConfig& cfg,
                                         double epsilon, std::size_t grid_points,
                                         double min_rate = 0.1) {
    detail::check_size(r_star.size(), cfg);
    if (grid_points < 2) throw GameError("verify_epsilon_ne needs at least 2 grid points");
    const std::size_t n = cfg.size();
    DeviationReport rep;
    rep.best_deviation.resize(n);
    rep.gain.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double current = utility_rate_space(i, r_star, cfg);
        const double lo = std::min(min_rate, r_star[i]);
        const double hi = feasible_rate_ceiling(i, r_star, cfg, lo);
        RateVector x = r_star;
        auto u = [&](double v) {
            x[i] = v;
            return utility_rate_space(i, x, cfg);
        };
        const double cell = (hi - lo) / static_cast<double>(grid_points - 1);
        double best_x = lo, best_val = u(lo);
        std::size_t best_k = 0;
        for (std::size_t k = 1; k < grid_points; ++k) {
            const double v = (k + 1 == grid_points) ? hi : lo + cell * static_cast<double>(k);
            const double val = u(v);
            if (val > best_val) {
                best_val = val;
                best_x = v;
                best_k = k;
            }
        }
        if (cell > 0.0) {
            const double a = best_k == 0 ? lo : best_x - cell;
            const double b = std::min(hi, best_x + cell);
            const auto refined = search::golden_section_max(u, a, b, 1e-12 * std::max(1.0, hi));
            if (refined.value > best_val) {
                best_val = refined.value;
                best_x = refined.x;
            }
        }
        rep.best_deviation[i] = best_x;
        rep.gain[i] = best_val - current;
        if (rep.gain[i] > rep.worst_gain) {
            rep.worst_gain = rep.gain[i];
            rep.worst_sensor = i;
        }
    }
    rep.verified = rep.worst_gain <= epsilon;
    return rep;
}

}  // namespace crowdgame
