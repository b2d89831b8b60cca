#pragma once

#include <random>

#include "crowdgame/config.hpp"
#include "crowdgame/model.hpp"

namespace fixtures {

inline crowdgame::GameConfig ten_sensor() {
    static const auto cfg = crowdgame::load_config(CROWDGAME_SOURCE_DIR "/configs/paper_sec4.cfg");
    return cfg;
}

// g = d = 1, alpha = 2, c = 1, b = 2, sigma^2 = 1, lambda = 20, phi = 0.01,
// d^t = 1, eta = 2, blockchain (0.1, 0.1, 0.1, 3)
inline crowdgame::GameConfig lone_sensor() {
    crowdgame::GameConfig cfg;
    crowdgame::SensorParams s;
    s.bandwidth = 2.0;
    s.channel_gain = 1.0;
    s.ap_distance = 1.0;
    s.path_loss_exp = 2.0;
    s.circuit_power = 1.0;
    s.unit_rate_price = 20.0;
    s.beacon_distance = 1.0;
    s.max_received_power = 10.0;
    cfg.sensors = {s};
    cfg.noise_variance = 1.0;
    cfg.power_price = 0.01;
    cfg.wpt_path_loss_exp = 2.0;
    cfg.blockchain = {0.1, 0.1, 0.1, 3.0};
    return cfg;
}

// Uniform rates in [lo, hi], redrawn until invertible with load below 0.99.
inline crowdgame::RateVector feasible_rates(const crowdgame::GameConfig& cfg, std::mt19937_64& rng,
                                            double lo = 0.0, double hi = 0.5) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (;;) {
        crowdgame::RateVector r(cfg.size(), 0.0);
        for (auto& v : r) v = u(rng);
        if (!crowdgame::rates_feasible(r, cfg)) continue;
        if (crowdgame::invert_rates(r, cfg).decomposition.load < 0.99) return r;
    }
}

inline crowdgame::PowerVector random_powers(const crowdgame::GameConfig& cfg, std::mt19937_64& rng) {
    crowdgame::PowerVector p(cfg.size(), 0.0);
    for (std::size_t i = 0; i < cfg.size(); ++i) {
        std::uniform_real_distribution<double> u(0.0, cfg.sensors[i].max_received_power);
        p[i] = u(rng);
    }
    return p;
}

}  // namespace fixtures
