#pragma once

#include <stdexcept>

namespace eqsr {

/// Invalid run configuration or inconsistent setup (bad seed program, odd
/// island count, conflicting flags, unknown keys).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace eqsr
