#pragma once

// Chart-level Riemannian primitives: boundary/infinity gauges, regular radii,
// tankage, ε-nets and box elements.

#include "ruelle/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace ruelle {

/// User-supplied Riemannian data for a non-euclidean chart. Tangent vectors
/// are expressed in the orthonormal frame returned by `frame`.
struct CustomMetric {
    std::function<Point(const Point&, const Vec&)> exp;
    std::function<Vec(const Point&, const Point&)> exp_inverse;
    /// ‖D_w exp_x‖
    std::function<double(const Point&, const Vec&)> exp_derivative_norm;
    /// ‖D_y exp_x^{-1}‖
    std::function<double(const Point&, const Point&)> exp_inverse_derivative_norm;
    std::function<double(const Point&, const Point&)> distance;
    /// Orthonormal frame of T_x M; identity when empty.
    std::function<Mat(const Point&)> frame;
};

/// A chart-covered domain M with boundary, a reference point x0 and a metric.
class ChartDomain {
public:
    ChartDomain(int dim, std::function<double(const Point&)> boundary_distance,
                std::function<bool(const Point&)> membership, Point reference, Vec lower, Vec upper);

    /// Open interval (lo, hi); either end may be infinite (no boundary there).
    static ChartDomain interval(double lo, double hi, double reference);
    /// Open axis-aligned box; infinite faces carry no boundary.
    static ChartDomain box(const Vec& lower, const Vec& upper, const Point& reference);
    /// Boundaryless R^d.
    static ChartDomain euclidean_space(int dim, const Point& reference);

    ChartDomain with_metric(CustomMetric metric) const;

    int dim() const noexcept { return dim_; }
    double boundary_distance(const Point& x) const { return boundary_distance_(x); }
    bool contains(const Point& x) const;
    const Point& reference() const noexcept { return reference_; }
    const Vec& lower() const noexcept { return lower_; }
    const Vec& upper() const noexcept { return upper_; }
    bool bounded() const;
    bool euclidean() const noexcept { return metric_ == nullptr; }
    const CustomMetric* metric() const noexcept { return metric_.get(); }
    double distance(const Point& x, const Point& y) const;

    /// (lo, hi) when the domain was built by interval().
    const std::optional<std::pair<double, double>>& interval_ends() const noexcept { return interval_; }

private:
    int dim_;
    std::function<double(const Point&)> boundary_distance_;
    std::function<bool(const Point&)> membership_;
    Point reference_;
    Vec lower_;
    Vec upper_;
    std::shared_ptr<const CustomMetric> metric_;
    std::optional<std::pair<double, double>> interval_;
};

enum class D0Branch { boundary, infinity };

struct D0Value {
    double value = 0.0;
    /// Which term of the minimum decided the value (ties go to boundary).
    D0Branch branch = D0Branch::boundary;
};

/// d0(x, ∂M) = min{ d(x, ∂M), 1 / d(x, x0) }.
D0Value d0_detail(const ChartDomain& domain, const Point& x);
double d0(const ChartDomain& domain, const Point& x);
/// min{d0, 1}
double d_star(const ChartDomain& domain, const Point& x);

enum class NetOrder { lexicographic, given };

/// Indices (into candidates) of a greedy maximal eps-separated subset, in net
/// order. Candidates failing `region` are ignored.
std::vector<std::size_t> separated_net_indices(std::span<const Point> candidates, double eps,
                                               const std::function<bool(const Point&)>& region = {},
                                               NetOrder order = NetOrder::lexicographic,
                                               const ChartDomain* metric_domain = nullptr);

std::vector<Point> separated_net(std::span<const Point> candidates, double eps,
                                 const std::function<bool(const Point&)>& region = {},
                                 NetOrder order = NetOrder::lexicographic,
                                 const ChartDomain* metric_domain = nullptr);

/// C01 * ceil(r/eps)^d, saturating at UINT64_MAX.
std::uint64_t covering_count_bound(double r, double eps, double c01, int d);
double log_covering_count_bound(double r, double eps, double c01, int d);

/// (2 ceil(b sqrt d) + 1)^d
double default_c01(double b, int d);

enum class RadiusPolicy { pure_norm, clip };

struct RegularRadiusConfig {
    double b = 1.0;
    RadiusPolicy policy = RadiusPolicy::pure_norm;
    /// Smallest radius the bisection will accept.
    double resolution = 1e-3;
    double tolerance = 1e-4;
    /// Points per axis sampled in B(y, r) for custom metrics.
    int ball_samples = 24;
};

/// ϱ_b(y)
double regular_radius_point(const ChartDomain& domain, const RegularRadiusConfig& config, const Point& y);

struct SublevelEstimate {
    double value = 0.0;
    double resolution = 0.0;
    std::size_t points = 0;
};

/// ρ_b at threshold c: minimum of ϱ_b over grid points y with d0(y) >= c.
SublevelEstimate regular_radius_sublevel_at(const ChartDomain& domain, const RegularRadiusConfig& config,
                                            double threshold, std::size_t sample_budget);

/// ρ_b(x)
SublevelEstimate regular_radius_sublevel(const ChartDomain& domain, const RegularRadiusConfig& config,
                                         const Point& x, std::size_t sample_budget);

struct TankageEstimate {
    std::uint64_t count = 0;
    double radius = 0.0;
    double resolution = 0.0;
    std::size_t points = 0;
};

/// Greedy cover count of the grid-discretized sublevel set {d0 >= c} by
/// balls of radius `radius`.
TankageEstimate tankage_at(const ChartDomain& domain, double threshold, double radius, double grid_resolution);

/// N_b(x)
TankageEstimate tankage(const ChartDomain& domain, const RegularRadiusConfig& config, const Point& x,
                        double grid_resolution);

/// Γ(center_offset; half_widths) in the frame at `anchor`, mapped by exp.
struct BoxElement {
    Point anchor;
    Mat frame;
    Vec center_offset;
    Vec half_widths;
    int level = 0;
    std::int64_t net_index = 0;
    std::optional<std::int64_t> cell_index;

    /// Γ_x(a) with the standard frame.
    static BoxElement cube(const Point& anchor, double half_width, int level = 0, std::int64_t net_index = 0);
};

/// exp_anchor^{-1}(x) expressed in the box frame.
Vec box_local(const ChartDomain& domain, const BoxElement& box, const Point& x);
bool box_contains(const ChartDomain& domain, const BoxElement& box, const Point& x);
/// Euclidean volume of the coordinate box.
double box_volume(const BoxElement& box);

/// The 2^{l d} subcubes of a cube, ordered lexicographically in (k_1, ..., k_d)
/// with k_1 most significant.
std::vector<BoxElement> subdivide_box(const BoxElement& box, int l);

/// ϱ_b, ρ_b and N_b as evaluators.
class RegularityProfile {
public:
    enum class Mode { analytic, estimated };

    RegularityProfile(double b, std::function<double(const Point&)> rho_point,
                      std::function<double(const Point&)> rho_sublevel,
                      std::function<std::uint64_t(const Point&)> tankage, Mode mode);

    /// Closed forms for an interval domain with the euclidean metric.
    static RegularityProfile for_interval(const ChartDomain& domain, double b, RadiusPolicy policy);

    /// Grid estimates tabulated on a geometric ladder of d0 thresholds. A
    /// query uses the nearest tabulated threshold at or below d0(x), which
    /// gives a lower bound on ρ_b and an upper bound on N_b up to grid error.
    static RegularityProfile tabulated(const ChartDomain& domain, const RegularRadiusConfig& config,
                                       double min_threshold, std::size_t sample_budget, double grid_resolution);

    double b() const noexcept { return b_; }
    Mode mode() const noexcept { return mode_; }
    double rho_point(const Point& y) const { return rho_point_(y); }
    double rho_sublevel(const Point& x) const { return rho_sublevel_(x); }
    std::uint64_t tankage(const Point& x) const { return tankage_(x); }

private:
    double b_;
    std::function<double(const Point&)> rho_point_;
    std::function<double(const Point&)> rho_sublevel_;
    std::function<std::uint64_t(const Point&)> tankage_;
    Mode mode_;
};

} // namespace ruelle
