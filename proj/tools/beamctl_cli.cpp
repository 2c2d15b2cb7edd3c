// beamctl <command> --config <path> [--out <dir>] [--verbose]

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <string>

#include "beamctl/config.hpp"
#include "beamctl/errors.hpp"

namespace {

std::string usage() {
    std::string names;
    for (const auto& n : beamctl::command_names()) names += (names.empty() ? "" : "|") + n;
    return "usage: beamctl <" + names + "> --config <path> [--out <dir>] [--verbose]";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and control synthesis for the damped beam with impulses, delays and nonlocal data"};
    std::string command;
    std::string config;
    std::string out_dir;
    bool verbose = false;
    app.add_option("command", command, "simulate | gramian | steer | approx | exact | check")->required();
    app.add_option("--config", config, "JSON run configuration")->required();
    app.add_option("--out", out_dir, "output directory (overrides output.directory)");
    app.add_flag("--verbose", verbose, "progress on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << beamctl::error_line("usage", "", e.what()) << '\n' << usage() << '\n';
        return 2;
    }

    const auto& names = beamctl::command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
        std::cerr << beamctl::error_line("usage", "", "unknown command '" + command + "'") << '\n' << usage() << '\n';
        return 2;
    }

    beamctl::RunConfig cfg;
    try {
        cfg = beamctl::parse_config(config);
        if (!out_dir.empty()) beamctl::set_output_directory(cfg, out_dir);
    } catch (const beamctl::ConfigError& e) {
        std::cerr << beamctl::error_line("config", e.path(), e.what()) << '\n';
        return 2;
    } catch (const beamctl::NumericalError& e) {
        std::cerr << beamctl::error_line("numerical", "", e.what()) << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << beamctl::error_line("config", "", e.what()) << '\n';
        return 2;
    }
    return beamctl::run_command(command, cfg, std::cerr, std::cerr, verbose);
}
