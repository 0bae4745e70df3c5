#pragma once

// Invariant measures: analytic 1-D densities, products of them, and empirical
// sample stores; sampling, integration, invariance and condition (B).

#include "ruelle/geometry.hpp"
#include "ruelle/parallel.hpp"
#include "ruelle/rng.hpp"
#include "ruelle/system.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ruelle {

class InvariantMeasure {
public:
    enum class Kind { analytic, product, empirical };

    /// Density on (lo, hi), normalized here by quadrature. hi may be +∞.
    /// Throws DomainError when the density is not normalizable.
    static InvariantMeasure analytic(std::string name, std::function<double(double)> density, double lo, double hi);
    static InvariantMeasure product(std::vector<InvariantMeasure> factors);
    static InvariantMeasure empirical(std::vector<Point> points, std::string name = "empirical");

    Kind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }
    int dim() const noexcept { return dim_; }

    /// Normalized density (analytic kind only).
    double density(double x) const;
    double lower() const noexcept { return lo_; }
    double upper() const noexcept { return hi_; }
    /// ∫ unnormalized density, as found at construction.
    double normalization() const noexcept { return norm_; }
    const std::vector<InvariantMeasure>& factors() const noexcept { return factors_; }
    const std::vector<Point>& points() const noexcept { return points_; }

    /// True when integrals can use 1-D quadrature.
    bool quadrature_capable() const noexcept { return kind_ == Kind::analytic; }

    Point draw(CounterRng& rng) const;
    /// Draw i comes from stream (seed, "sample", i).
    std::vector<Point> sample(std::size_t n, std::uint64_t seed, const Exec& exec = {}) const;
    std::vector<Point> sample(std::size_t n, std::uint64_t seed, std::string_view stage, const Exec& exec = {}) const;

private:
    struct CdfTable;

    Kind kind_ = Kind::analytic;
    std::string name_;
    int dim_ = 1;
    std::function<double(double)> raw_density_;
    double lo_ = 0.0, hi_ = 1.0, norm_ = 1.0;
    std::shared_ptr<const CdfTable> cdf_;
    std::vector<InvariantMeasure> factors_;
    std::vector<Point> points_;
};

/// Named measures: uniform {lo, hi}, gauss, arcsine, gauss_noncompact,
/// uniform2d, empirical {path, format: csv|binary, dim}.
InvariantMeasure make_measure(const std::string& name, const nlohmann::json& params = nlohmann::json::object());
InvariantMeasure measure_from_config(const nlohmann::json& config);

/// One point per row, d comma-separated columns; '#' lines skipped.
std::vector<Point> load_samples_csv(const std::string& path, int dim);
/// Rows of d little-endian float64 values.
std::vector<Point> load_samples_binary(const std::string& path, int dim);

/// Birkhoff sample: the orbit of x after `burn_in` steps, `n` points.
InvariantMeasure birkhoff_measure(const SmoothSystem& sys, const Point& x, std::size_t burn_in, std::size_t n);

struct IntegrateOptions {
    std::size_t quad_max_evals = 100000;
    std::size_t mc_samples = 1000000;
    std::uint64_t seed = 0;
    Exec exec{};
    bool force_monte_carlo = false;
    /// Run the truncation-growth divergence heuristic (quadrature only).
    bool check_divergence = true;
    /// Quadrature splits the support at these points.
    std::vector<double> breakpoints;
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    bool diverged = false;
    /// "quadrature" or "monte-carlo"
    std::string method;
    std::size_t evaluations = 0;
};

/// ∫ φ dμ. Non-finite φ values are treated as 0 in quadrature and flag
/// divergence under Monte Carlo.
Estimate integrate(const InvariantMeasure& mu, const std::function<double(const Point&)>& phi,
                   const IntegrateOptions& options = {});

struct TestFunction {
    std::string name;
    std::function<double(const Point&)> fn;
};

/// Moments, low Fourier modes and smooth bumps of the squashed coordinates.
std::vector<TestFunction> default_test_functions(const ChartDomain& domain);

struct InvarianceReport {
    double max_defect = 0.0;
    std::vector<std::pair<std::string, Estimate>> defects;
    double tolerance = 0.0;
    bool passes = false;
    double excluded_mass = 0.0;
    std::string method;
};

/// max over φ of |∫φ∘f dμ − ∫φ dμ|. Tolerance 1e-3 under quadrature, three
/// standard errors under Monte Carlo.
InvarianceReport check_invariance(const InvariantMeasure& mu, const SmoothSystem& sys,
                                  const std::vector<TestFunction>& tests, const IntegrateOptions& options = {});

struct IntegrabilityComponent {
    std::string name;
    Estimate estimate;
};

struct IntegrabilityReport {
    /// log+‖Df‖, |log d0|, |log ρ_b|, log N_b
    std::vector<IntegrabilityComponent> components;
    Estimate max_integral;
    std::string method;
    bool pass = false;
    std::string failed_component;
    double excluded_mass = 0.0;
};

IntegrabilityReport condition_B_report(const InvariantMeasure& mu, const SmoothSystem& sys,
                                       const RegularityProfile& profile, const IntegrateOptions& options = {});

struct BranchCoverage {
    double infinity_fraction = 0.0;
    std::size_t samples = 0;
};

/// Fraction of μ-samples whose d0 is decided by the 1/d(x, x0) term.
BranchCoverage d0_branch_coverage(const InvariantMeasure& mu, const ChartDomain& domain, std::size_t n,
                                  std::uint64_t seed);

} // namespace ruelle
