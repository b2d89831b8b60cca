#include <gtest/gtest.h>

#include <random>

#include "crowdgame/equilibrium.hpp"
#include "crowdgame/oracle.hpp"
#include "fixtures.hpp"

using namespace crowdgame;

namespace {

const EquilibriumResult& ten_sensor_equilibrium(Method method = Method::gauss_seidel_br) {
    static std::map<Method, EquilibriumResult> cache;
    auto it = cache.find(method);
    if (it == cache.end()) {
        SolverOptions opts;
        opts.method = method;
        it = cache.emplace(method, solve(fixtures::ten_sensor(), opts)).first;
    }
    return it->second;
}

// Independent Newton solve of the first-order conditions at 40 digits;
// sensors repeat with period 3.
constexpr double kFrozenRates[3] = {0.304144074844257, 0.304003582420529, 0.30353156129338};
constexpr double kFrozenUtilities[3] = {5.12506956563237, 5.11263132146446, 5.09454103184909};

}  // namespace

TEST(Method, NamesRoundTrip) {
    for (auto m : {Method::gauss_seidel_br, Method::jacobi_br, Method::gradient_ascent})
        EXPECT_EQ(parse_method(to_string(m)), m);
    EXPECT_FALSE(parse_method("newton").has_value());
}

TEST(SolverOptions, RejectsBadValues) {
    SolverOptions opts;
    EXPECT_NO_THROW(opts.validate());
    opts.tol = 0.0;
    EXPECT_THROW(opts.validate(), GameError);
    opts = {};
    opts.max_iter = 0;
    EXPECT_THROW(opts.validate(), GameError);
    opts = {};
    opts.method = Method::gradient_ascent;
    opts.step_size = -1.0;
    EXPECT_THROW(opts.validate(), GameError);
    opts.method = Method::jacobi_br;
    EXPECT_NO_THROW(opts.validate());
}

TEST(FeasibleRateCeiling, SitsOnTheFeasibilityBoundary) {
    const auto cfg = fixtures::ten_sensor();
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        auto r = fixtures::feasible_rates(cfg, rng, 0.1, 0.3);
        const std::size_t i = trial % cfg.size();
        const double top = feasible_rate_ceiling(i, r, cfg, 0.1);
        r[i] = top;
        EXPECT_TRUE(rates_feasible(r, cfg));
        r[i] = top * (1.0 + 1e-9);
        EXPECT_FALSE(rates_feasible(r, cfg));
    }
}

TEST(FeasibleRateCeiling, LoneSensorIsCappedByPower) {
    auto cfg = fixtures::lone_sensor();
    // p = 1 + t/(1-t) = 2^{r/2} reaches the cap 10 at r = 2 log2(10)
    EXPECT_NEAR(feasible_rate_ceiling(0, RateVector{0.0}, cfg, 0.1), 2.0 * std::log2(10.0), 1e-9);
}

TEST(BestResponse, NoRevenueMeansMinimumRate) {
    auto cfg = fixtures::ten_sensor();
    cfg.sensors[1].unit_rate_price = 0.0;
    const RateVector r(cfg.size(), 0.2);
    EXPECT_EQ(best_response(1, r, cfg, {}), 0.1);
    EXPECT_EQ(oracle::grid_best_response(1, r, cfg, 1000), 0.1);
}

TEST(BestResponse, EmptyIntervalThrows) {
    const auto cfg = fixtures::ten_sensor();
    try {
        best_response(3, RateVector(cfg.size(), 0.45), cfg, {});
        FAIL();
    } catch (const EmptyFeasibleInterval& e) {
        EXPECT_EQ(e.sensor(), 3u);
    }
}

TEST(BestResponse, AgreesWithDenseGridOracle) {
    const auto cfg = fixtures::ten_sensor();
    std::mt19937_64 rng(22);
    const std::size_t grid = 10000;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t i = rng() % cfg.size();
        auto r = fixtures::feasible_rates(cfg, rng, 0.1, 0.35);
        const double br = best_response(i, r, cfg, {});
        const double top = feasible_rate_ceiling(i, r, cfg, 0.1);
        const double cell = (top - 0.1) / static_cast<double>(grid - 1);
        const double oracle_br = oracle::grid_best_response(i, r, cfg, grid);
        EXPECT_LE(std::abs(br - oracle_br), cell) << "trial " << trial;

        r[i] = br;
        const double u_br = utility_rate_space(i, r, cfg);
        for (std::size_t k = 0; k < grid; ++k) {
            r[i] = 0.1 + cell * static_cast<double>(k);
            if (!rates_feasible(r, cfg)) continue;
            ASSERT_GE(u_br - utility_rate_space(i, r, cfg), -1e-8) << "trial " << trial << " point " << k;
        }
    }
}

TEST(Solve, LoneSensorIsOneBestResponse) {
    const auto cfg = fixtures::lone_sensor();
    const auto res = solve(cfg, {});
    ASSERT_TRUE(res.converged);
    EXPECT_LE(res.iterations, 2u);
    EXPECT_EQ(res.rates[0], best_response(0, RateVector{0.2}, cfg, {}));
}

TEST(Solve, GaussSeidelReachesTheReferenceEquilibrium) {
    const auto& res = ten_sensor_equilibrium();
    ASSERT_TRUE(res.converged);
    EXPECT_LT(res.residual, 1e-8);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_NEAR(res.rates[i], kFrozenRates[i % 3], 1e-8) << "sensor " << i + 1;
        EXPECT_NEAR(res.utilities[i], kFrozenUtilities[i % 3], 1e-7) << "sensor " << i + 1;
    }
}

TEST(Solve, ResultFieldsAreConsistent) {
    const auto cfg = fixtures::ten_sensor();
    const auto& res = ten_sensor_equilibrium();
    double share_sum = 0.0, fee_sum = 0.0, rate_sum = 0.0;
    for (std::size_t i = 0; i < cfg.size(); ++i) {
        share_sum += res.fee_shares[i];
        fee_sum += res.fees[i];
        rate_sum += res.rates[i];
        EXPECT_GE(res.fee_shares[i], 0.0);
        EXPECT_LE(res.fee_shares[i], 1.0);
        EXPECT_LE(res.powers[i], cfg.sensors[i].max_received_power);
    }
    EXPECT_NEAR(share_sum, 1.0, 1e-14);
    EXPECT_NEAR(fee_sum, blockchain_power(rate_sum, cfg.blockchain), 1e-12);
    EXPECT_EQ(res.trace.back(), res.rates);
    EXPECT_EQ(res.trace.size(), res.iterations + 1);
}

TEST(Solve, MethodsAgree) {
    const auto& gs = ten_sensor_equilibrium(Method::gauss_seidel_br);
    const auto& jac = ten_sensor_equilibrium(Method::jacobi_br);
    const auto& ga = ten_sensor_equilibrium(Method::gradient_ascent);
    ASSERT_TRUE(gs.converged && jac.converged && ga.converged);
    EXPECT_LT(inf_norm_diff(gs.rates, jac.rates), 1e-6);
    EXPECT_LT(inf_norm_diff(gs.rates, ga.rates), 1e-4);
    EXPECT_LT(inf_norm_diff(jac.rates, ga.rates), 1e-4);
}

TEST(Solve, ConvergedProfileIsAFixedPointOfBestResponse) {
    const auto cfg = fixtures::ten_sensor();
    for (auto m : {Method::gauss_seidel_br, Method::jacobi_br, Method::gradient_ascent}) {
        const auto& res = ten_sensor_equilibrium(m);
        ASSERT_TRUE(res.converged);
        for (std::size_t i = 0; i < cfg.size(); ++i)
            EXPECT_NEAR(best_response(i, res.rates, cfg, {}), res.rates[i], SolverOptions{}.tol)
                << to_string(m) << " sensor " << i + 1;
    }
}

TEST(Solve, GaussSeidelUpdatesNeverLowerTheMoversUtility) {
    const auto cfg = fixtures::ten_sensor();
    SolverOptions opts;
    RateVector r(cfg.size(), 0.2);
    for (int sweep = 0; sweep < 20; ++sweep) {
        for (std::size_t i = 0; i < cfg.size(); ++i) {
            const double before = utility_rate_space(i, r, cfg);
            r[i] = best_response(i, r, cfg, opts);
            EXPECT_GE(utility_rate_space(i, r, cfg), before - 1e-12) << "sweep " << sweep << " sensor " << i + 1;
        }
    }
    // the library sweep performs exactly these updates
    RateVector start(cfg.size(), 0.2), manual = start;
    for (std::size_t i = 0; i < cfg.size(); ++i) manual[i] = best_response(i, manual, cfg, opts);
    EXPECT_EQ(detail::sweep_once(start, cfg, opts).next, manual);
}

TEST(Solve, TracesAreBitIdentical) {
    const auto cfg = fixtures::ten_sensor();
    for (auto m : {Method::gauss_seidel_br, Method::jacobi_br, Method::gradient_ascent}) {
        SolverOptions opts;
        opts.method = m;
        opts.max_iter = 40;
        const auto a = solve(cfg, opts);
        const auto b = solve(cfg, opts);
        EXPECT_EQ(a.trace, b.trace) << to_string(m);
        EXPECT_EQ(a.utilities, b.utilities);
    }
}

TEST(Solve, ZeroDepthRunsThePlainDynamics) {
    const auto cfg = fixtures::ten_sensor();
    for (auto m : {Method::gauss_seidel_br, Method::jacobi_br, Method::gradient_ascent}) {
        SolverOptions opts;
        opts.method = m;
        opts.acceleration_depth = 0;
        opts.max_iter = 5;
        const auto res = solve(cfg, opts);
        ASSERT_EQ(res.trace.size(), 6u);
        detail::SweepState state;
        for (std::size_t k = 0; k + 1 < res.trace.size(); ++k)
            EXPECT_EQ(res.trace[k + 1], detail::sweep_once(res.trace[k], cfg, opts, state).next) << to_string(m);
    }
}

TEST(Solve, NonConvergenceIsReportedNotThrown) {
    const auto cfg = fixtures::ten_sensor();
    SolverOptions opts;
    opts.max_iter = 1;
    EquilibriumResult res;
    ASSERT_NO_THROW(res = solve(cfg, opts));
    EXPECT_FALSE(res.converged);
    EXPECT_EQ(res.iterations, 1u);
    EXPECT_GT(res.residual, opts.tol);
    EXPECT_EQ(res.utilities.size(), cfg.size());
}

TEST(Solve, CustomStartAndInfeasibleStart) {
    const auto cfg = fixtures::ten_sensor();
    SolverOptions opts;
    opts.init_rates = RateVector(cfg.size(), 0.3);
    const auto res = solve(cfg, opts);
    ASSERT_TRUE(res.converged);
    EXPECT_LT(inf_norm_diff(res.rates, ten_sensor_equilibrium().rates), 1e-7);

    opts.init_rates = RateVector(cfg.size(), 1.0);
    EXPECT_THROW(solve(cfg, opts), InfeasibleRates);
    opts.init_rates = RateVector(3, 0.2);
    EXPECT_THROW(solve(cfg, opts), DimensionMismatch);
}

TEST(Solve, ZeroRevenueSensorsStayAtTheFloor) {
    auto cfg = fixtures::ten_sensor();
    for (auto& s : cfg.sensors) s.unit_rate_price = 0.0;
    for (auto m : {Method::gauss_seidel_br, Method::jacobi_br, Method::gradient_ascent}) {
        SolverOptions opts;
        opts.method = m;
        const auto res = solve(cfg, opts);
        ASSERT_TRUE(res.converged) << to_string(m);
        for (double r : res.rates) EXPECT_EQ(r, 0.1);
    }
}

TEST(Existence, TenSensorGameIsConcaveOnTheBox) {
    const auto cfg = fixtures::ten_sensor();
    const auto rep = check_existence(cfg, {RateVector(10, 0.1), RateVector(10, 0.5)}, 1000);
    EXPECT_TRUE(rep.condition_a);
    EXPECT_NEAR(rep.quad_margin, 0.8, 1e-15);
    EXPECT_TRUE(rep.condition_b);
    EXPECT_TRUE(rep.numeric_concavity);
    EXPECT_LT(rep.worst_second_derivative, 0.0);
    EXPECT_EQ(rep.samples_evaluated, 1000u);
    EXPECT_GT(rep.samples_rejected, 0u);
    EXPECT_TRUE(rates_feasible(rep.worst_point, cfg));
}

TEST(Existence, ConditionAFailsWithoutQuadraticCost) {
    auto cfg = fixtures::ten_sensor();
    cfg.blockchain = {0.0, 0.1, 0.1, 1.0};
    const auto rep = check_existence(cfg, {RateVector(10, 0.1), RateVector(10, 0.5)}, 50);
    EXPECT_FALSE(rep.condition_a);
    EXPECT_NEAR(rep.quad_margin, -0.1, 1e-15);
}

TEST(Existence, LoneSensorCornerIsReportedAsIs) {
    const auto cfg = fixtures::lone_sensor();
    EXPECT_FALSE(check_existence(cfg, {RateVector{0.1}, RateVector{2.0}}, 20).condition_b);
    EXPECT_TRUE(check_existence(cfg, {RateVector{1.0}, RateVector{2.0}}, 20).condition_b);
}

TEST(Existence, InfeasibleRegionThrows) {
    const auto cfg = fixtures::ten_sensor();
    EXPECT_THROW(check_existence(cfg, {RateVector(10, 2.0), RateVector(10, 3.0)}, 10), GameError);
    EXPECT_THROW(check_existence(cfg, {RateVector(10, 0.1), RateVector(10, 0.5)}, 0), GameError);
}

TEST(VerifyEpsilonNe, SolvedEquilibriumIsVerified) {
    const auto cfg = fixtures::ten_sensor();
    const auto rep = verify_epsilon_ne(ten_sensor_equilibrium().rates, cfg, 1e-6, 2000);
    EXPECT_TRUE(rep.verified);
    EXPECT_LE(rep.worst_gain, 1e-6);
    // the refined search lands on the equilibrium itself up to rounding
    for (double g : rep.gain) EXPECT_GE(g, -1e-12);
}

TEST(VerifyEpsilonNe, PerturbedCoordinateFails) {
    const auto cfg = fixtures::ten_sensor();
    for (std::size_t i : {0u, 4u, 8u}) {
        RateVector r = ten_sensor_equilibrium().rates;
        r[i] += 0.05;
        if (!rates_feasible(r, cfg)) r[i] -= 0.1;
        const auto rep = verify_epsilon_ne(r, cfg, 1e-6, 2000);
        EXPECT_FALSE(rep.verified);
        EXPECT_GT(rep.worst_gain, 0.0);
        // the pushed sensor wants back; its neighbours, now facing more
        // interference, may gain even more by backing off
        EXPECT_GT(rep.gain[i], 1e-6);
    }
}

TEST(VerifyEpsilonNe, LoneSensorBestResponseIsExact) {
    const auto cfg = fixtures::lone_sensor();
    const RateVector r{best_response(0, RateVector{0.2}, cfg, {})};
    EXPECT_TRUE(verify_epsilon_ne(r, cfg, 1e-9, 1000).verified);
}
