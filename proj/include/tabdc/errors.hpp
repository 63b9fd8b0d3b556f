#pragma once

#include <stdexcept>
#include <string>

namespace tabdc {

// Error taxonomy mirrors the CLI exit codes: config/validation problems,
// missing stage dependencies, and numerical failures.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DependencyError : public std::runtime_error {
public:
    explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tabdc
