#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ctt {

// Label value excluded from every loss and metric.
inline constexpr int kIgnoreLabel = 255;

// Invalid user-supplied configuration (bad field values, unknown keys).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/map dimensions do not line up.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation called in a state that the caller was required to rule out.
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

// Corrupt or inconsistent on-disk data (datasets, checkpoints, logs).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted because a loss became non-finite.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ctt
