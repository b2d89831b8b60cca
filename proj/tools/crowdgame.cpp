// crowdgame: solve, sweep and inspect the sensor data-trading game.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "crowdgame/experiment.hpp"

namespace {

std::vector<double> parse_value_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        const auto v = crowdgame::detail::parse_number(item);
        if (!v) throw CLI::ValidationError("--sweep-values", "cannot parse number '" + item + "'");
        values.push_back(*v);
    }
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace crowdgame;

    CLI::App app{"Nash equilibria of the sensor data-trading game"};
    ExperimentSpec spec;
    std::string command, method = "gauss_seidel_br", sweep_values;
    std::size_t sensor = 0;
    double region_lo = -1.0;

    app.add_option("command", command, "solve | sweep | br-curve | verify | check")
        ->required()
        ->check(CLI::IsMember({"solve", "sweep", "br-curve", "verify", "check"}));
    app.add_option("--config", spec.config_path, "game config file")->required();
    app.add_option("--out", spec.output_path, "output file (default: stdout)");
    app.add_option("--method", method, "equilibrium dynamics")
        ->check(CLI::IsMember({"gauss_seidel_br", "jacobi_br", "gradient_ascent"}));
    app.add_option("--tol", spec.solver.tol, "stop when an iteration moves rates less than this");
    app.add_option("--max-iter", spec.solver.max_iter, "iteration limit");
    app.add_option("--step-size", spec.solver.step_size, "gradient-ascent step");
    app.add_option("--min-rate", spec.solver.min_rate, "lower rate bound of every sensor");
    app.add_option("--sweep-param", spec.sweep_param, "parameter path, e.g. blockchain.compute_coeff");
    app.add_option("--sweep-values", sweep_values, "comma-separated values");
    app.add_option("--jobs", spec.jobs, "concurrent sweep points (0: all cores)");
    auto* sensor_opt = app.add_option("--sensor", sensor, "sensor id for br-curve, from 1");
    app.add_option("--points", spec.curve_points, "br-curve grid size");
    app.add_option("--epsilon", spec.epsilon, "verify: allowed deviation gain");
    app.add_option("--grid-points", spec.grid_points, "verify: deviation grid per sensor");
    app.add_option("--samples", spec.samples, "check: quasi-random samples");
    auto* lo_opt = app.add_option("--region-lo", region_lo, "check: lower rate of the box (default: min rate)");
    app.add_option("--region-hi", spec.region_hi, "check: upper rate of the box");

    try {
        app.parse(argc, argv);
        if (!sweep_values.empty()) spec.sweep_values = parse_value_list(sweep_values);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code::usage;
    }

    spec.command = *parse_command(command);
    spec.solver.method = *parse_method(method);
    if (sensor_opt->count()) spec.curve_sensor = sensor;
    if (lo_opt->count()) spec.region_lo = region_lo;

    const Outcome outcome = run_experiment(spec);
    if (!outcome.output.empty()) {
        if (spec.output_path.empty()) {
            std::cout << outcome.output;
        } else {
            std::ofstream out(spec.output_path, std::ios::binary);
            out << outcome.output;
            if (!out) {
                std::cerr << "crowdgame: cannot write " << spec.output_path << "\n";
                return exit_code::usage;
            }
        }
    }
    if (!outcome.message.empty()) std::cerr << "crowdgame: " << outcome.message << "\n";
    return outcome.status;
}
