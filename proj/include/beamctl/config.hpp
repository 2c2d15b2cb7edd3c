#pragma once

// JSON run configuration and the command runner behind the beamctl tool.
//
// Times share the unit of T; c is 1/time, d is length^4/time^2, k is 1/time^2.
// Modal vectors (targets, offsets, history values, constant controls) are
// coefficients in the orthonormal basis sqrt(2) sin(n pi x) and must have
// exactly N entries.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "beamctl/controllability.hpp"
#include "beamctl/dynamics.hpp"
#include "beamctl/synthesis.hpp"

namespace beamctl {

struct RunConfig {
    ProblemSpec spec;
    double history_step = 0.0;  // h_r
    StateZ target;
    StateZ initial_state;  // z0 of the linear steering run; rho(0) unless given
    EstimationGrids estimation;
    GramianRule gramian_rule = GramianRule::simpson;
    double gramian_quad_step = 0.0;
    ControlSignal nominal_control;  // approx experiment
    std::vector<double> sigmas;
    double tol = 1e-10;
    int max_iter = 50;
    std::vector<double> snapshot_times;
    std::filesystem::path out_dir = "out";
    std::string prefix;
    std::string resolved;  // resolved configuration, JSON text
};

// Throws ConfigError naming the offending key. Relative file references are
// resolved against `base_dir`.
[[nodiscard]] RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir);
[[nodiscard]] RunConfig parse_config(const std::filesystem::path& path);

// Overrides output.directory (the --out flag), keeping the resolved echo in sync.
void set_output_directory(RunConfig& cfg, const std::filesystem::path& dir);

[[nodiscard]] const std::vector<std::string>& command_names();

// Runs `command` and writes its files plus resolved-config.json into
// cfg.out_dir. Progress goes to `log` when verbose. Returns the process exit
// status: 0 success, 2 configuration error, 3 numerical failure; on failure a
// single line is written to `err`.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log, std::ostream& err,
                bool verbose = false);

// Single-line error text: "beamctl-error kind=<kind> path=<path> message=<json string>".
[[nodiscard]] std::string error_line(const std::string& kind, const std::string& path, const std::string& message);

}  // namespace beamctl
