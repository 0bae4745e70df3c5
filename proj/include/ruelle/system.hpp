#pragma once

// C^1 maps on chart domains: evaluation, Jacobians, iterates, derivative
// cocycles, exterior-power norms and the distortion (A) falsifier.

#include "ruelle/geometry.hpp"
#include "ruelle/parallel.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ruelle {

struct DistortionParams {
    double alpha = 0.5;
    double C = 2.0;
    double a = 2.0;

    void validate() const;
};

struct SmoothSystem {
    std::string name;
    ChartDomain domain;
    std::function<Point(const Point&)> map;
    std::function<Mat(const Point&)> jacobian;
    /// Membership in U; defaults to domain membership when empty.
    std::function<bool(const Point&)> in_open_set;
    /// True near declared singular loci, where finite differences are not
    /// expected to agree with the Jacobian.
    std::function<bool(const Point&, double)> near_singular;
    /// Default distortion parameters for the (A) check.
    DistortionParams distortion;
    /// 1-D only: points where f or Df jump; quadrature splits there.
    std::vector<double> breakpoints;

    int dim() const noexcept { return domain.dim(); }
    bool in_U(const Point& x) const { return in_open_set ? in_open_set(x) : domain.contains(x); }
};

/// Built-in systems: doubling, tent, gauss, logistic4, gauss_noncompact,
/// doubling2d, identity (params: dim), linear (params: matrix).
SmoothSystem make_system(const std::string& name, const nlohmann::json& params);
SmoothSystem make_system(const std::string& name);
std::vector<std::string> builtin_system_names();

/// User systems from a declarative description:
///   {"kind": "rational", "domain": [lo, hi], "reference": x0,
///    "numerator": [c0, c1, ...], "denominator": [...], "wrap": true}
///   {"kind": "linear", "matrix": [[...], ...]}
/// "wrap" takes the fractional part of the rational value.
SmoothSystem system_from_config(const nlohmann::json& config);

/// Spectral norm; absolute value in d = 1.
double spectral_norm(const Mat& A);

/// f^m(x). Throws EscapeError with the first inadmissible step.
Point iterate(const SmoothSystem& sys, const Point& x, int m);

/// The orbit x, f(x), ..., f^m(x).
std::vector<Point> orbit(const SmoothSystem& sys, const Point& x, int m);

struct CocycleNorms {
    std::vector<double> norms;
    /// Π max{‖D f‖, 1}
    double starred_product = 1.0;
    double log_starred_product = 0.0;
};

CocycleNorms cocycle_jacobian_norms(const SmoothSystem& sys, const Point& x, int m);

/// max over κ = 1..d of the product of the κ largest singular values.
double exterior_norm(const Mat& A);

/// The κ-th compound (all κ×κ minors, index sets in lexicographic order).
Eigen::MatrixXd compound_matrix(const Eigen::MatrixXd& A, int kappa);

/// log ‖(D_x f^m)^∧‖. The product is propagated through each compound
/// separately with rescaling, never formed raw.
double exterior_norm_growth(const SmoothSystem& sys, const Point& x, int m);

struct DistortionPlan {
    std::size_t samples = 10000;
    std::uint64_t seed = 0;
    /// Fraction of base points drawn log-spaced toward the boundary / infinity.
    double boundary_fraction = 0.5;
    /// Decades spanned by the log-spaced draws.
    double decades = 12.0;
    Exec exec{};
};

struct DistortionReport {
    double max_ratio = 0.0;
    Point witness_x;
    Point witness_y;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
    /// Empirical only: a falsifier can refute (A) but never prove it.
    bool passes = true;
};

DistortionReport check_distortion_A(const SmoothSystem& sys, const DistortionParams& params,
                                    const DistortionPlan& plan);

struct JacobianCheck {
    double max_relative_error = 0.0;
    Point worst;
    std::size_t checked = 0;
};

/// Central finite differences vs the analytic Jacobian at uniformly drawn
/// points away from singular loci.
JacobianCheck check_jacobian(const SmoothSystem& sys, std::size_t points, std::uint64_t seed);

} // namespace ruelle
