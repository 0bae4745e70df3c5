#pragma once

// Adaptive Gauss–Legendre quadrature on intervals with integrable endpoint
// singularities, including half-lines.

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace ruelle {

struct QuadOptions {
    double abs_tol = 1e-11;
    double rel_tol = 1e-10;
    /// Maximum integrand evaluations.
    std::size_t max_evals = 100000;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t evals = 0;
    bool converged = false;
};

/// Gauss–Legendre nodes and weights on [-1, 1].
template <int N>
struct GaussLegendre {
    std::array<double, N> x{};
    std::array<double, N> w{};
};

const GaussLegendre<8>& gauss_legendre8();
const GaussLegendre<16>& gauss_legendre16();

/// Maps t in (0,1) onto (a, b) so that integrable endpoint singularities
/// are flattened. b may be +infinity.
struct EndpointMap {
    double a;
    double b;

    double x(double t) const;
    double jacobian(double t) const;
};

/// ∫_a^b f(x) dx, b may be +∞. Nodes never touch the endpoints.
QuadResult integrate_interval(const std::function<double(double)>& f, double a, double b,
                              const QuadOptions& options = {});

/// Same integral restricted to t in [lo_t, hi_t] of the endpoint map.
QuadResult integrate_mapped(const std::function<double(double)>& f, const EndpointMap& map, double lo_t,
                            double hi_t, const QuadOptions& options = {});

struct DivergenceCheck {
    bool diverged = false;
    /// Truncated integrals over t in [10^-k, 1 - 10^-k], k = 1, 2, ...
    std::vector<double> truncated;
};

/// Heuristic: the integral diverges when three successive truncation levels
/// each grow the truncated integral by more than 10%.
DivergenceCheck check_divergence(const std::function<double(double)>& f, double a, double b,
                                 const QuadOptions& options = {}, int levels = 7);

} // namespace ruelle
