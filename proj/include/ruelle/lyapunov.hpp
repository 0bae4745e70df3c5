#pragma once

// Lyapunov spectra (Benettin QR scheme) and the right-hand side ∫Σλ_i⁺dμ.

#include "ruelle/measure.hpp"
#include "ruelle/parallel.hpp"
#include "ruelle/system.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace ruelle {

struct SpectrumOptions {
    int burn_in = 1000;
    int blocks = 10;
};

struct SpectrumEstimate {
    /// Descending; kMinusInfinity for degenerate directions.
    std::vector<double> exponents;
    std::vector<double> std_errors;
    long horizon = 0;
    int reorth_every = 1;
    double positive_sum = 0.0;
};

/// Exponents per application of f along the orbit of x (after burn-in).
/// Throws EscapeError when the orbit leaves U.
SpectrumEstimate spectrum(const SmoothSystem& sys, const Point& x, long n, int reorth_every,
                          const SpectrumOptions& options = {});

/// Σ max{λ_i, 0}, ignoring −∞ entries.
double positive_sum(const std::vector<double>& exponents);

struct OrbitRow {
    std::uint64_t index = 0;
    Point start;
    std::vector<double> exponents;
    double positive_sum = 0.0;
    bool escaped = false;
};

struct EnsembleEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t used = 0;
    std::size_t escaped = 0;
    std::vector<OrbitRow> rows;
};

struct EnsembleOptions {
    long horizon = 100000;
    std::size_t n_orbits = 16;
    int reorth_every = 1;
    std::uint64_t seed = 0;
    Exec exec{};
    SpectrumOptions spectrum{};
};

/// Mean over μ-sampled starts of the positive exponent sum. Throws
/// EscapeStatisticsError when more than half the orbits escape.
EnsembleEstimate positive_sum_integral(const SmoothSystem& sys, const InvariantMeasure& mu,
                                       const EnsembleOptions& options);

/// (1/m) ∫ log‖(D_x f^m)^∧‖ dμ by Monte Carlo.
EnsembleEstimate exterior_growth_integral(const SmoothSystem& sys, const InvariantMeasure& mu, int m,
                                          std::size_t n_samples, std::uint64_t seed, const Exec& exec = {});

/// One row per orbit: index, start coordinates, exponents, positive_sum.
void write_spectrum_csv(std::ostream& out, const EnsembleEstimate& e, std::uint64_t seed);
nlohmann::json spectrum_summary_json(const EnsembleEstimate& e, long horizon);

} // namespace ruelle
