#pragma once

#include <stdexcept>
#include <string>

namespace beamctl {

// Bad or inconsistent user configuration. `path` names the offending key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Divergence, ill-conditioning and similar failures of a numerical procedure.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace beamctl
