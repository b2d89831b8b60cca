#pragma once

// Game configuration documents.
//
// A config is a flat list of `key = value` lines. Scalars use the GameConfig
// field names, blockchain coefficients are prefixed with `blockchain.`, and
// per-sensor fields with `sensors.`; a sensor field takes either one value
// for every sensor or a comma-separated list ordered by sensor index.
// `sensors.count` fixes the sensor count when no field is given as a list.
// `#` starts a comment. `sensors.max_received_power` may be omitted and
// defaults to 10.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "crowdgame/types.hpp"

namespace crowdgame {

inline constexpr double kDefaultMaxReceivedPower = 10.0;

namespace detail {

struct SensorField {
    std::string_view name;
    double SensorParams::*member;
    bool required;
};

inline constexpr std::array<SensorField, 8> kSensorFields{{
    {"bandwidth", &SensorParams::bandwidth, true},
    {"channel_gain", &SensorParams::channel_gain, true},
    {"ap_distance", &SensorParams::ap_distance, true},
    {"path_loss_exp", &SensorParams::path_loss_exp, true},
    {"circuit_power", &SensorParams::circuit_power, true},
    {"unit_rate_price", &SensorParams::unit_rate_price, true},
    {"beacon_distance", &SensorParams::beacon_distance, true},
    {"max_received_power", &SensorParams::max_received_power, false},
}};

struct BlockchainField {
    std::string_view name;
    double BlockchainParams::*member;
};

inline constexpr std::array<BlockchainField, 4> kBlockchainFields{{
    {"quad_coeff", &BlockchainParams::quad_coeff},
    {"lin_coeff", &BlockchainParams::lin_coeff},
    {"const_coeff", &BlockchainParams::const_coeff},
    {"compute_coeff", &BlockchainParams::compute_coeff},
}};

struct ScalarField {
    std::string_view name;
    double GameConfig::*member;
};

inline constexpr std::array<ScalarField, 3> kScalarFields{{
    {"noise_variance", &GameConfig::noise_variance},
    {"power_price", &GameConfig::power_price},
    {"wpt_path_loss_exp", &GameConfig::wpt_path_loss_exp},
}};

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::string format_number(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

struct RawEntry {
    std::vector<double> values;
    std::size_t line = 0;
};

}  // namespace detail

/// Checks every documented invariant; the message names the offending field.
inline void validate_config(const GameConfig& cfg) {
    auto fail = [](const std::string& field, const std::string& what) {
        throw InvalidConfig(field + " " + what);
    };
    if (cfg.sensors.empty()) fail("sensors", "must contain at least one sensor");
    if (!std::isfinite(cfg.noise_variance) || !(cfg.noise_variance > 0.0))
        fail("noise_variance", "must be finite and > 0");
    if (!std::isfinite(cfg.power_price) || cfg.power_price < 0.0)
        fail("power_price", "must be finite and >= 0");
    if (!std::isfinite(cfg.wpt_path_loss_exp) || !(cfg.wpt_path_loss_exp > 0.0))
        fail("wpt_path_loss_exp", "must be finite and > 0");
    for (const auto& f : detail::kBlockchainFields) {
        const double v = cfg.blockchain.*f.member;
        const std::string name = "blockchain." + std::string(f.name);
        if (!std::isfinite(v) || v < 0.0) fail(name, "must be finite and >= 0");
    }
    if (!(cfg.blockchain.compute_coeff > 0.0)) fail("blockchain.compute_coeff", "must be > 0");

    for (std::size_t i = 0; i < cfg.sensors.size(); ++i) {
        const auto& s = cfg.sensors[i];
        const std::string prefix = "sensors[" + std::to_string(i + 1) + "].";
        for (const auto& f : detail::kSensorFields)
            if (!std::isfinite(s.*f.member)) fail(prefix + std::string(f.name), "must be finite");
        if (!(s.bandwidth > 0.0)) fail(prefix + "bandwidth", "must be > 0");
        if (!(s.channel_gain > 0.0)) fail(prefix + "channel_gain", "must be > 0");
        if (!(s.ap_distance > 0.0)) fail(prefix + "ap_distance", "must be > 0");
        if (!(s.path_loss_exp > 0.0)) fail(prefix + "path_loss_exp", "must be > 0");
        if (s.circuit_power < 0.0) fail(prefix + "circuit_power", "must be >= 0");
        if (s.unit_rate_price < 0.0) fail(prefix + "unit_rate_price", "must be >= 0");
        if (!(s.beacon_distance > 0.0)) fail(prefix + "beacon_distance", "must be > 0");
        if (!(s.max_received_power > 0.0)) fail(prefix + "max_received_power", "must be > 0");
        if (s.max_received_power < s.circuit_power)
            fail(prefix + "max_received_power", "must be >= circuit_power");
    }
}

/// Parses and validates a config document. `source` prefixes diagnostics.
inline GameConfig parse_config(std::string_view text, const std::string& source = "<config>") {
    std::map<std::string, detail::RawEntry, std::less<>> entries;
    std::size_t line_no = 0;
    auto error_at = [&](std::size_t line, const std::string& what) {
        return InvalidConfig(source + ":" + std::to_string(line) + ": " + what);
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw error_at(line_no, "expected 'key = value'");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view rhs = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw error_at(line_no, "missing key before '='");
        if (rhs.empty()) throw error_at(line_no, "missing value for '" + key + "'");
        if (entries.contains(key)) throw error_at(line_no, "duplicate key '" + key + "'");

        detail::RawEntry entry;
        entry.line = line_no;
        std::size_t start = 0;
        while (start <= rhs.size()) {
            const auto comma = std::min(rhs.find(',', start), rhs.size());
            const auto item = rhs.substr(start, comma - start);
            const auto v = detail::parse_number(item);
            if (!v) throw error_at(line_no, "'" + key + "': cannot parse number '" + std::string(detail::trim(item)) + "'");
            entry.values.push_back(*v);
            start = comma + 1;
        }
        entries.emplace(key, std::move(entry));
    }

    auto take_scalar = [&](const std::string& key) -> std::optional<double> {
        const auto it = entries.find(key);
        if (it == entries.end()) return std::nullopt;
        if (it->second.values.size() != 1)
            throw error_at(it->second.line, "'" + key + "' takes a single value");
        const double v = it->second.values.front();
        entries.erase(it);
        return v;
    };
    auto require_scalar = [&](const std::string& key) {
        const auto v = take_scalar(key);
        if (!v) throw InvalidConfig(source + ": missing required field '" + key + "'");
        return *v;
    };

    GameConfig cfg;
    for (const auto& f : detail::kScalarFields) cfg.*f.member = require_scalar(std::string(f.name));
    for (const auto& f : detail::kBlockchainFields)
        cfg.blockchain.*f.member = require_scalar("blockchain." + std::string(f.name));

    std::optional<std::size_t> count;
    if (const auto it = entries.find("sensors.count"); it != entries.end()) {
        const auto line = it->second.line;
        const double c = *take_scalar("sensors.count");
        if (!(c >= 1.0) || c != std::floor(c) || c > 1e6)
            throw error_at(line, "'sensors.count' must be a positive integer");
        count = static_cast<std::size_t>(c);
    }
    for (const auto& f : detail::kSensorFields) {
        const auto it = entries.find("sensors." + std::string(f.name));
        if (it == entries.end() || it->second.values.size() == 1) continue;
        if (count && *count != it->second.values.size())
            throw error_at(it->second.line, "'sensors." + std::string(f.name) + "' has " +
                                                std::to_string(it->second.values.size()) +
                                                " values, expected " + std::to_string(*count));
        count = it->second.values.size();
    }
    if (!count) count = 1;

    cfg.sensors.assign(*count, SensorParams{});
    for (auto& s : cfg.sensors) s.max_received_power = kDefaultMaxReceivedPower;
    for (const auto& f : detail::kSensorFields) {
        const std::string key = "sensors." + std::string(f.name);
        const auto it = entries.find(key);
        if (it == entries.end()) {
            if (f.required) throw InvalidConfig(source + ": missing required field '" + key + "'");
            continue;
        }
        const auto& vals = it->second.values;
        for (std::size_t i = 0; i < *count; ++i) cfg.sensors[i].*f.member = vals.size() == 1 ? vals[0] : vals[i];
        entries.erase(it);
    }
    if (!entries.empty()) {
        const auto& [key, entry] = *entries.begin();
        throw error_at(entry.line, "unknown key '" + key + "'");
    }

    try {
        validate_config(cfg);
    } catch (const InvalidConfig& e) {
        throw InvalidConfig(source + ": " + e.what());
    }
    return cfg;
}

inline GameConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

/// Writes a config in the document format; numbers carry 17 significant
/// digits so that parse_config(write_config(c)) == c.
inline std::string write_config(const GameConfig& cfg) {
    std::ostringstream out;
    for (const auto& f : detail::kScalarFields)
        out << f.name << " = " << detail::format_number(cfg.*f.member, 17) << '\n';
    for (const auto& f : detail::kBlockchainFields)
        out << "blockchain." << f.name << " = " << detail::format_number(cfg.blockchain.*f.member, 17) << '\n';
    out << "sensors.count = " << cfg.sensors.size() << '\n';
    for (const auto& f : detail::kSensorFields) {
        out << "sensors." << f.name << " = ";
        for (std::size_t i = 0; i < cfg.sensors.size(); ++i) {
            if (i) out << ", ";
            out << detail::format_number(cfg.sensors[i].*f.member, 17);
        }
        out << '\n';
    }
    return out.str();
}

/// Resolves a parameter path to the fields it names. Paths are the config
/// keys (`power_price`, `blockchain.compute_coeff`, `sensors.unit_rate_price`
/// for every sensor) or `sensors[k].<field>` for the k-th sensor, counted
/// from 1.
inline std::vector<double*> resolve_parameter(GameConfig& cfg, std::string_view path) {
    for (const auto& f : detail::kScalarFields)
        if (path == f.name) return {&(cfg.*f.member)};
    if (path.starts_with("blockchain.")) {
        const auto name = path.substr(11);
        for (const auto& f : detail::kBlockchainFields)
            if (name == f.name) return {&(cfg.blockchain.*f.member)};
    }
    if (path.starts_with("sensors")) {
        std::optional<std::size_t> index;
        std::string_view rest = path.substr(7);
        if (rest.starts_with("[")) {
            const auto close = rest.find(']');
            std::size_t k = 0;
            const auto digits = rest.substr(1, close == std::string_view::npos ? 0 : close - 1);
            const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
            if (close == std::string_view::npos || ec != std::errc{} || ptr != digits.data() + digits.size() ||
                k < 1 || k > cfg.sensors.size())
                throw InvalidConfig("bad sensor index in parameter path '" + std::string(path) + "'");
            index = k - 1;
            rest = rest.substr(close + 1);
        }
        if (rest.starts_with(".")) {
            const auto name = rest.substr(1);
            for (const auto& f : detail::kSensorFields) {
                if (name != f.name) continue;
                if (index) return {&(cfg.sensors[*index].*f.member)};
                std::vector<double*> fields;
                for (auto& s : cfg.sensors) fields.push_back(&(s.*f.member));
                return fields;
            }
        }
    }
    throw InvalidConfig("unknown parameter path '" + std::string(path) + "'");
}

/// Sets every field named by `path` to `value` and revalidates.
inline void set_parameter(GameConfig& cfg, std::string_view path, double value) {
    for (double* field : resolve_parameter(cfg, path)) *field = value;
    validate_config(cfg);
}

}  // namespace crowdgame
