#pragma once

// Domain types for the sensor data-trading game.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crowdgame {

/// Physical and economic constants of one RF-powered sensor.
struct SensorParams {
    double bandwidth = 1.0;          // b_i
    double channel_gain = 1.0;       // g_i
    double ap_distance = 1.0;        // d_i, sensor to access point
    double path_loss_exp = 2.0;      // alpha_i
    double circuit_power = 0.0;      // c_i, spent on sensing before any transmission
    double unit_rate_price = 0.0;    // lambda_i
    double beacon_distance = 1.0;    // d^t_i, sensor to RF-energy beacon
    double max_received_power = 10.0;  // p^u_i

    bool operator==(const SensorParams&) const = default;
};

/// Quadratic power model of the sharded blockchain: a(mR)^2 + b(mR) + c.
struct BlockchainParams {
    double quad_coeff = 0.0;
    double lin_coeff = 0.0;
    double const_coeff = 0.0;
    double compute_coeff = 1.0;

    bool operator==(const BlockchainParams&) const = default;
};

struct GameConfig {
    std::vector<SensorParams> sensors;
    double noise_variance = 1.0;
    double power_price = 0.0;
    double wpt_path_loss_exp = 2.0;
    BlockchainParams blockchain;

    std::size_t size() const noexcept { return sensors.size(); }

    bool operator==(const GameConfig&) const = default;
};

// Every error raised by the library derives from GameError.
class GameError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public GameError {
public:
    DimensionMismatch(std::size_t got, std::size_t want)
        : GameError("vector has " + std::to_string(got) + " entries, game has " +
                    std::to_string(want) + " sensors") {}
};

class SensorIndexError : public GameError {
public:
    SensorIndexError(std::size_t i, std::size_t n)
        : GameError("sensor index " + std::to_string(i) + " out of range for " +
                    std::to_string(n) + " sensors") {}
};

/// The requested rate vector is outside the image of the power domain (load T too close to 1).
class InfeasibleRates : public GameError {
public:
    explicit InfeasibleRates(double load)
        : GameError("infeasible rate vector: SINR load " + std::to_string(load) +
                    " is not below 1"),
          load_(load) {}
    double load() const noexcept { return load_; }

private:
    double load_;
};

class PowerBoundExceeded : public GameError {
public:
    PowerBoundExceeded(std::size_t sensor, double power, double cap)
        : GameError("sensor " + std::to_string(sensor) + " needs received power " +
                    std::to_string(power) + " above its cap " + std::to_string(cap)),
          sensor_(sensor) {}
    std::size_t sensor() const noexcept { return sensor_; }

private:
    std::size_t sensor_;
};

class EmptyFeasibleInterval : public GameError {
public:
    EmptyFeasibleInterval(std::size_t sensor, double min_rate)
        : GameError("sensor " + std::to_string(sensor) +
                    " has no feasible rate at or above " + std::to_string(min_rate)),
          sensor_(sensor) {}
    std::size_t sensor() const noexcept { return sensor_; }

private:
    std::size_t sensor_;
};

class InvalidConfig : public GameError {
public:
    using GameError::GameError;
};

namespace detail {

// Thin strong-typedef over a per-sensor vector of doubles.
template <class Tag>
class SensorVector {
public:
    SensorVector() = default;
    explicit SensorVector(std::vector<double> values) : values_(std::move(values)) {}
    SensorVector(std::size_t n, double fill) : values_(n, fill) {}
    SensorVector(std::initializer_list<double> init) : values_(init) {}

    std::size_t size() const noexcept { return values_.size(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }
    auto begin() noexcept { return values_.begin(); }
    auto end() noexcept { return values_.end(); }
    const std::vector<double>& values() const noexcept { return values_; }

    bool operator==(const SensorVector&) const = default;

private:
    std::vector<double> values_;
};

}  // namespace detail

struct PowerTag {};
struct RateTag {};

/// Received powers p, one per sensor.
using PowerVector = detail::SensorVector<PowerTag>;
/// Transmission rates r, one per sensor.
using RateVector = detail::SensorVector<RateTag>;

/// SINR decomposition produced while mapping rates back to powers.
struct RateInversion {
    std::vector<double> gamma;  // per-sensor SINR targets 2^{r/b} - 1
    std::vector<double> beta;   // per-sensor received signal g(p - c)/d^alpha
    double beta_sum = 0.0;
    double load = 0.0;          // sum gamma/(1+gamma); finite powers need load < 1
};

struct EquilibriumResult {
    RateVector rates;
    PowerVector powers;
    std::vector<double> utilities;
    std::vector<double> fees;
    std::vector<double> fee_shares;
    std::size_t iterations = 0;
    bool converged = false;
    double residual = 0.0;
    std::vector<RateVector> trace;  // iterate after each sweep; trace.front() is the start
};

inline double inf_norm_diff(const RateVector& a, const RateVector& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace crowdgame
