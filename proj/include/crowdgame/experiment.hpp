#pragma once

// Experiment commands behind the crowdgame CLI. Every command returns its
// output text and an exit status instead of writing files itself, so the
// same runs can be driven from tests.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "crowdgame/config.hpp"
#include "crowdgame/equilibrium.hpp"
#include "crowdgame/model.hpp"

namespace crowdgame {

enum class Command { solve, sweep, br_curve, verify, check };

inline std::optional<Command> parse_command(std::string_view name) {
    if (name == "solve") return Command::solve;
    if (name == "sweep") return Command::sweep;
    if (name == "br-curve") return Command::br_curve;
    if (name == "verify") return Command::verify;
    if (name == "check") return Command::check;
    return std::nullopt;
}

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int config = 2;
inline constexpr int infeasible = 3;
inline constexpr int not_converged = 4;
inline constexpr int existence = 5;
inline constexpr int not_verified = 6;
}  // namespace exit_code

struct ExperimentSpec {
    std::string config_path;
    Command command = Command::solve;
    std::string sweep_param;
    std::vector<double> sweep_values;
    std::optional<std::size_t> curve_sensor;  // 1-based
    std::string output_path;                  // empty: standard output
    SolverOptions solver;

    std::size_t curve_points = 512;
    double epsilon = 1e-6;
    std::size_t grid_points = 10000;
    std::size_t samples = 1000;
    std::optional<double> region_lo;  // check box, default min_rate
    double region_hi = 0.5;
    unsigned jobs = 0;  // sweep workers, 0 picks the hardware concurrency

    void validate() const {
        if (command == Command::sweep) {
            if (sweep_param.empty()) throw GameError("sweep needs --sweep-param");
            if (sweep_values.empty()) throw GameError("sweep needs a non-empty --sweep-values list");
        } else if (!sweep_param.empty() || !sweep_values.empty()) {
            throw GameError("--sweep-param and --sweep-values only apply to sweep");
        }
        if (command == Command::br_curve) {
            if (!curve_sensor) throw GameError("br-curve needs --sensor");
            if (*curve_sensor < 1) throw GameError("--sensor ids start at 1");
            if (curve_points < 2) throw GameError("br-curve needs at least 2 points");
        } else if (curve_sensor) {
            throw GameError("--sensor only applies to br-curve");
        }
        if (command == Command::verify && grid_points < 2) throw GameError("verify needs at least 2 grid points");
        if (command == Command::check && samples < 1) throw GameError("check needs at least 1 sample");
        solver.validate();
    }
};

struct Outcome {
    std::string output;
    int status = exit_code::ok;
    std::string message;  // diagnostic for standard error, empty on success
};

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string fmt_bool(bool b) { return b ? "true" : "false"; }

// keeps error text inside one CSV cell
inline std::string csv_cell(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '"', '\'');
    return s;
}

inline int status_of(const GameError& e) {
    if (dynamic_cast<const InvalidConfig*>(&e)) return exit_code::config;
    if (dynamic_cast<const InfeasibleRates*>(&e) || dynamic_cast<const PowerBoundExceeded*>(&e) ||
        dynamic_cast<const EmptyFeasibleInterval*>(&e))
        return exit_code::infeasible;
    return exit_code::usage;
}

inline std::string status_label(int status) {
    switch (status) {
        case exit_code::ok: return "ok";
        case exit_code::config: return "config_error";
        case exit_code::infeasible: return "infeasible";
        case exit_code::not_converged: return "not_converged";
        default: return "error";
    }
}

inline std::string meta_line(const EquilibriumResult& res, const SolverOptions& opts) {
    return "# method=" + std::string(to_string(opts.method)) + ",converged=" + fmt_bool(res.converged) +
           ",iterations=" + std::to_string(res.iterations) + ",residual=" + fmt(res.residual) +
           ",tol=" + fmt(opts.tol) + "\n";
}

inline Outcome not_converged(const EquilibriumResult& res) {
    return {"", exit_code::not_converged,
            "solver did not converge in " + std::to_string(res.iterations) + " iterations (residual " +
                fmt(res.residual) + ")"};
}

}  // namespace detail

/// Equilibrium table: one row per sensor and a `#` footer with convergence
/// metadata. A non-converged run still writes its last iterate.
inline Outcome run_solve(const GameConfig& cfg, const ExperimentSpec& spec) {
    const auto res = solve(cfg, spec.solver);
    std::string out = "sensor_id,rate,power,fee,fee_share,utility\n";
    for (std::size_t i = 0; i < cfg.size(); ++i) {
        out += std::to_string(i + 1) + "," + detail::fmt(res.rates[i]) + "," + detail::fmt(res.powers[i]) + "," +
               detail::fmt(res.fees[i]) + "," + detail::fmt(res.fee_shares[i]) + "," +
               detail::fmt(res.utilities[i]) + "\n";
    }
    out += detail::meta_line(res, spec.solver);
    if (!res.converged) {
        auto failed = detail::not_converged(res);
        failed.output = std::move(out);
        return failed;
    }
    return {std::move(out), exit_code::ok, {}};
}

/// Re-solves the game from the default start for every value of one
/// parameter. Failed points keep their row with a status and empty fields;
/// the exit status is that of the first failed point.
inline Outcome run_sweep(const GameConfig& cfg, const ExperimentSpec& spec) {
    {
        GameConfig probe = cfg;
        (void)resolve_parameter(probe, spec.sweep_param);
    }
    const std::size_t n = cfg.size();
    const std::size_t points = spec.sweep_values.size();

    struct Row {
        int status = exit_code::ok;
        std::string note;
        std::optional<EquilibriumResult> res;
    };
    std::vector<Row> rows(points);
    SolverOptions opts = spec.solver;
    opts.init_rates.reset();

    auto run_point = [&](std::size_t k) {
        Row& row = rows[k];
        try {
            GameConfig point = cfg;
            set_parameter(point, spec.sweep_param, spec.sweep_values[k]);
            row.res = solve(point, opts);
            if (!row.res->converged) row.status = exit_code::not_converged;
        } catch (const GameError& e) {
            row.status = detail::status_of(e);
            row.note = e.what();
            row.res.reset();
        }
    };

    unsigned workers = spec.jobs ? spec.jobs : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, points));
    if (workers <= 1) {
        for (std::size_t k = 0; k < points; ++k) run_point(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t k; (k = next.fetch_add(1)) < points;) run_point(k);
            });
    }

    std::string out = "value,status,converged,iterations";
    for (std::size_t i = 1; i <= n; ++i) out += ",r_" + std::to_string(i);
    for (std::size_t i = 1; i <= n; ++i) out += ",u_" + std::to_string(i);
    out += "\n";
    Outcome outcome;
    for (std::size_t k = 0; k < points; ++k) {
        const Row& row = rows[k];
        std::string status = detail::status_label(row.status);
        if (!row.note.empty()) status += ": " + detail::csv_cell(row.note);
        out += detail::fmt(spec.sweep_values[k]) + "," + status + ",";
        if (row.res) {
            out += detail::fmt_bool(row.res->converged) + "," + std::to_string(row.res->iterations);
            for (double v : row.res->rates) out += "," + detail::fmt(v);
            for (double v : row.res->utilities) out += "," + detail::fmt(v);
        } else {
            out += ",";
            for (std::size_t i = 0; i < 2 * n; ++i) out += ",";
        }
        out += "\n";
        if (row.status != exit_code::ok && outcome.status == exit_code::ok) {
            outcome.status = row.status;
            outcome.message = "sweep point " + detail::fmt(spec.sweep_values[k]) + ": " +
                              (row.note.empty() ? detail::status_label(row.status) : row.note);
        }
    }
    outcome.output = std::move(out);
    return outcome;
}

/// Utility of one sensor over its feasible interval with the others held at
/// the solved equilibrium. Grid rows have marker 0; the refined best
/// response is inserted in rate order, ahead of an equal grid rate, with
/// marker 1.
inline Outcome run_br_curve(const GameConfig& cfg, const ExperimentSpec& spec) {
    const std::size_t i = *spec.curve_sensor - 1;
    detail::check_index(i, cfg);
    const auto res = solve(cfg, spec.solver);
    if (!res.converged) return detail::not_converged(res);

    RateVector x = res.rates;
    const double lo = spec.solver.min_rate;
    const double hi = feasible_rate_ceiling(i, x, cfg, lo);
    const double br = best_response(i, x, cfg, spec.solver);
    auto u = [&](double v) {
        x[i] = v;
        return utility_rate_space(i, x, cfg);
    };

    std::string out = "rate,utility,marker\n";
    bool marked = false;
    auto emit = [&](double v, int marker) { out += detail::fmt(v) + "," + detail::fmt(u(v)) + "," + std::to_string(marker) + "\n"; };
    const std::size_t m = spec.curve_points;
    for (std::size_t k = 0; k < m; ++k) {
        const double v = k + 1 == m ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(m - 1);
        if (!marked && br <= v) {
            emit(br, 1);
            marked = true;
        }
        emit(v, 0);
    }
    if (!marked) emit(br, 1);
    return {std::move(out), exit_code::ok, {}};
}

/// Solves, then searches every sensor's unilateral deviations from the
/// equilibrium; fails with its own status when some gain exceeds epsilon.
inline Outcome run_verify(const GameConfig& cfg, const ExperimentSpec& spec) {
    const auto res = solve(cfg, spec.solver);
    if (!res.converged) return detail::not_converged(res);
    const auto rep = verify_epsilon_ne(res.rates, cfg, spec.epsilon, spec.grid_points, spec.solver.min_rate);

    std::string out = "sensor_id,rate,best_deviation,gain\n";
    for (std::size_t i = 0; i < cfg.size(); ++i)
        out += std::to_string(i + 1) + "," + detail::fmt(res.rates[i]) + "," + detail::fmt(rep.best_deviation[i]) +
               "," + detail::fmt(rep.gain[i]) + "\n";
    out += "# epsilon=" + detail::fmt(spec.epsilon) + ",worst_gain=" + detail::fmt(rep.worst_gain) +
           ",worst_sensor=" + std::to_string(rep.worst_sensor + 1) + ",verified=" + detail::fmt_bool(rep.verified) +
           "\n";
    if (!rep.verified)
        return {std::move(out), exit_code::not_verified,
                "sensor " + std::to_string(rep.worst_sensor + 1) + " gains " + detail::fmt(rep.worst_gain) +
                    " by deviating"};
    return {std::move(out), exit_code::ok, {}};
}

/// Existence report over the box [region_lo, region_hi]^N.
inline Outcome run_check(const GameConfig& cfg, const ExperimentSpec& spec) {
    const std::size_t n = cfg.size();
    const double lo = spec.region_lo.value_or(spec.solver.min_rate);
    const RateBox box{RateVector(n, lo), RateVector(n, spec.region_hi)};
    const auto rep = check_existence(cfg, box, spec.samples);

    std::string point;
    for (std::size_t j = 0; j < rep.worst_point.size(); ++j) point += (j ? " " : "") + detail::fmt(rep.worst_point[j]);
    std::string out;
    out += "region = [" + detail::fmt(lo) + ", " + detail::fmt(spec.region_hi) + "]^" + std::to_string(n) + "\n";
    out += "condition_a = " + detail::fmt_bool(rep.condition_a) + " (a*m^2 - c = " + detail::fmt(rep.quad_margin) + ")\n";
    out += "condition_b = " + detail::fmt_bool(rep.condition_b) + " (lower corner rate sum = " +
           detail::fmt(detail::rate_sum(box.lower)) + ")\n";
    out += "numeric_concavity = " + detail::fmt_bool(rep.numeric_concavity) + "\n";
    out += "worst_second_derivative = " + detail::fmt(rep.worst_second_derivative) + "\n";
    out += "worst_sensor = " + std::to_string(rep.worst_sensor + 1) + "\n";
    out += "worst_point = " + point + "\n";
    out += "samples_evaluated = " + std::to_string(rep.samples_evaluated) + "\n";
    out += "samples_rejected = " + std::to_string(rep.samples_rejected) + "\n";
    if (!rep.condition_a || !rep.numeric_concavity)
        return {std::move(out), exit_code::existence,
                !rep.condition_a ? "a*m^2 - c is negative" : "sampled second derivative is not negative"};
    return {std::move(out), exit_code::ok, {}};
}

/// Runs one command against an already loaded config, mapping library
/// errors to exit statuses.
inline Outcome run_experiment(const GameConfig& cfg, const ExperimentSpec& spec) {
    try {
        spec.validate();
        switch (spec.command) {
            case Command::solve: return run_solve(cfg, spec);
            case Command::sweep: return run_sweep(cfg, spec);
            case Command::br_curve: return run_br_curve(cfg, spec);
            case Command::verify: return run_verify(cfg, spec);
            case Command::check: return run_check(cfg, spec);
        }
    } catch (const GameError& e) {
        return {"", detail::status_of(e), e.what()};
    }
    return {"", exit_code::usage, "unknown command"};
}

inline Outcome run_experiment(const ExperimentSpec& spec) {
    GameConfig cfg;
    try {
        cfg = load_config(spec.config_path);
    } catch (const InvalidConfig& e) {
        return {"", exit_code::config, e.what()};
    }
    return run_experiment(cfg, spec);
}

}  // namespace crowdgame
