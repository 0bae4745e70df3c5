#pragma once

#include "ruelle/types.hpp"

#include <stdexcept>
#include <string>

namespace ruelle {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point is outside M \ ∂M, or a set that must be non-empty is empty.
class DomainError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

/// An orbit left U or reached ∂M. `step` is the index of the first iterate
/// that is not admissible.
class EscapeError : public Error {
public:
    EscapeError(int step, Point where)
        : Error("orbit escaped at step " + std::to_string(step)), step_(step), where_(std::move(where)) {}

    int step() const noexcept { return step_; }
    const Point& where() const noexcept { return where_; }

private:
    int step_;
    Point where_;
};

/// Grid or bisection resolution is too coarse for the requested quantity.
class ResolutionError : public Error {
public:
    ResolutionError(const std::string& what, double smallest_tested)
        : Error(what), smallest_(smallest_tested) {}

    double smallest_tested() const noexcept { return smallest_; }

private:
    double smallest_;
};

/// Too many orbits escaped for an ensemble statistic to be meaningful.
class EscapeStatisticsError : public Error {
public:
    EscapeStatisticsError(std::size_t escaped, std::size_t total)
        : Error("escape fraction too high: " + std::to_string(escaped) + " of " + std::to_string(total)),
          escaped_(escaped), total_(total) {}

    std::size_t escaped() const noexcept { return escaped_; }
    std::size_t total() const noexcept { return total_; }

private:
    std::size_t escaped_;
    std::size_t total_;
};

} // namespace ruelle
