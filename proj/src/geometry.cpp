#include "ruelle/geometry.hpp"

#include "ruelle/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ruelle {

// ---------------------------------------------------------------------------
// ChartDomain

ChartDomain::ChartDomain(int dim, std::function<double(const Point&)> boundary_distance,
                         std::function<bool(const Point&)> membership, Point reference, Vec lower, Vec upper)
    : dim_(dim), boundary_distance_(std::move(boundary_distance)), membership_(std::move(membership)),
      reference_(std::move(reference)), lower_(std::move(lower)), upper_(std::move(upper)) {
    if (dim_ < 1 || dim_ > kMaxDim) throw ArgumentError("chart dimension must be in [1, 8]");
    if (reference_.size() != dim_ || lower_.size() != dim_ || upper_.size() != dim_)
        throw ArgumentError("chart data has inconsistent dimension");
}

ChartDomain ChartDomain::interval(double lo, double hi, double reference) {
    if (!(lo < hi)) throw ArgumentError("interval requires lo < hi");
    auto bd = [lo, hi](const Point& x) {
        double d = kInf;
        if (std::isfinite(lo)) d = std::min(d, x[0] - lo);
        if (std::isfinite(hi)) d = std::min(d, hi - x[0]);
        return d;
    };
    Vec l(1), u(1);
    l[0] = lo;
    u[0] = hi;
    ChartDomain dom(1, bd, {}, point1(reference), l, u);
    dom.interval_ = std::make_pair(lo, hi);
    return dom;
}

ChartDomain ChartDomain::box(const Vec& lower, const Vec& upper, const Point& reference) {
    auto bd = [lower, upper](const Point& x) {
        double d = kInf;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (std::isfinite(lower[i])) d = std::min(d, x[i] - lower[i]);
            if (std::isfinite(upper[i])) d = std::min(d, upper[i] - x[i]);
        }
        return d;
    };
    return ChartDomain(static_cast<int>(lower.size()), bd, {}, reference, lower, upper);
}

ChartDomain ChartDomain::euclidean_space(int dim, const Point& reference) {
    Vec l = Vec::Constant(dim, -kInf);
    Vec u = Vec::Constant(dim, kInf);
    return ChartDomain(dim, [](const Point&) { return kInf; }, {}, reference, l, u);
}

ChartDomain ChartDomain::with_metric(CustomMetric metric) const {
    ChartDomain out = *this;
    out.metric_ = std::make_shared<const CustomMetric>(std::move(metric));
    return out;
}

bool ChartDomain::contains(const Point& x) const {
    if (x.size() != dim_ || !all_finite(x)) return false;
    for (int i = 0; i < dim_; ++i) {
        if (!(x[i] > lower_[i] && x[i] < upper_[i])) return false;
    }
    if (membership_ && !membership_(x)) return false;
    return boundary_distance_(x) > 0.0;
}

bool ChartDomain::bounded() const {
    return lower_.allFinite() && upper_.allFinite();
}

double ChartDomain::distance(const Point& x, const Point& y) const {
    if (metric_ && metric_->distance) return metric_->distance(x, y);
    return (x - y).norm();
}

// ---------------------------------------------------------------------------
// d0 and d*

D0Value d0_detail(const ChartDomain& domain, const Point& x) {
    if (!domain.contains(x)) throw DomainError("d0: point outside M \\ boundary");
    const double bd = domain.boundary_distance(x);
    const double r = domain.distance(x, domain.reference());
    const double inv = r > 0.0 ? 1.0 / r : kInf;
    if (inv < bd) return {inv, D0Branch::infinity};
    return {bd, D0Branch::boundary};
}

double d0(const ChartDomain& domain, const Point& x) { return d0_detail(domain, x).value; }

double d_star(const ChartDomain& domain, const Point& x) { return std::min(d0(domain, x), 1.0); }

// ---------------------------------------------------------------------------
// Separated nets

namespace {

bool lex_less(const Point& a, const Point& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (b[i] < a[i]) return false;
    }
    return false;
}

} // namespace

std::vector<std::size_t> separated_net_indices(std::span<const Point> candidates, double eps,
                                               const std::function<bool(const Point&)>& region, NetOrder order,
                                               const ChartDomain* metric_domain) {
    if (!(eps > 0.0)) throw ArgumentError("separated_net: eps must be positive");
    std::vector<std::size_t> idx;
    idx.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!region || region(candidates[i])) idx.push_back(i);
    }
    if (order == NetOrder::lexicographic) {
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return lex_less(candidates[a], candidates[b]); });
    }
    const bool custom = metric_domain != nullptr && !metric_domain->euclidean();
    const bool windowed = order == NetOrder::lexicographic && !custom;
    auto dist = [&](const Point& a, const Point& b) {
        return custom ? metric_domain->distance(a, b) : (a - b).norm();
    };

    std::vector<std::size_t> net;
    for (std::size_t k : idx) {
        const Point& p = candidates[k];
        bool separated = true;
        // In lexicographic order the accepted anchors are sorted by their first
        // coordinate, so only the trailing window |a0 - p0| <= eps can conflict.
        for (auto it = net.rbegin(); it != net.rend(); ++it) {
            const Point& a = candidates[*it];
            if (windowed && a[0] < p[0] - eps) break;
            if (!(dist(a, p) > eps)) {
                separated = false;
                break;
            }
        }
        if (separated) net.push_back(k);
    }
    return net;
}

std::vector<Point> separated_net(std::span<const Point> candidates, double eps,
                                 const std::function<bool(const Point&)>& region, NetOrder order,
                                 const ChartDomain* metric_domain) {
    std::vector<Point> out;
    for (std::size_t i : separated_net_indices(candidates, eps, region, order, metric_domain)) out.push_back(candidates[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Covering bounds

double log_covering_count_bound(double r, double eps, double c01, int d) {
    if (!(eps > 0.0) || !(r > 0.0)) throw ArgumentError("covering_count_bound: r and eps must be positive");
    const double k = std::ceil(r / eps);
    return std::log(c01) + d * std::log(k);
}

std::uint64_t covering_count_bound(double r, double eps, double c01, int d) {
    const double lg = log_covering_count_bound(r, eps, c01, d);
    if (lg >= std::log(18446744073709551615.0)) return std::numeric_limits<std::uint64_t>::max();
    long double v = static_cast<long double>(c01);
    const long double k = std::ceil(static_cast<long double>(r) / eps);
    for (int i = 0; i < d; ++i) v *= k;
    return static_cast<std::uint64_t>(std::llround(v));
}

double default_c01(double b, int d) {
    return std::pow(2.0 * std::ceil(b * std::sqrt(static_cast<double>(d))) + 1.0, d);
}

// ---------------------------------------------------------------------------
// Regular radius

namespace {

// Halton radical inverse.
double radical_inverse(std::size_t i, int base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

constexpr int kPrimes[kMaxDim] = {2, 3, 5, 7, 11, 13, 17, 19};

// Deterministic tangent vectors filling the ball of radius r.
std::vector<Vec> ball_directions(int d, double r, int per_axis) {
    std::vector<Vec> out;
    if (d == 1) {
        // Closed ball: the grid includes both ends.
        const int k_max = std::max(per_axis, 2) - 1;
        for (int k = 0; k <= k_max; ++k) {
            Vec v(1);
            v[0] = r * (-1.0 + 2.0 * k / k_max);
            out.push_back(v);
        }
        return out;
    }
    // Interior points plus as many points projected onto the sphere.
    const std::size_t want = static_cast<std::size_t>(per_axis) * static_cast<std::size_t>(per_axis);
    std::vector<Vec> sphere;
    for (std::size_t i = 1; out.size() < want && i < 64 * want; ++i) {
        Vec v(d);
        for (int a = 0; a < d; ++a) v[a] = 2.0 * radical_inverse(i, kPrimes[a]) - 1.0;
        const double n = v.norm();
        if (n < 1.0 && n > 0.0) {
            out.push_back(r * v);
            sphere.push_back(r * v / n);
        }
    }
    out.insert(out.end(), sphere.begin(), sphere.end());
    return out;
}

bool custom_radius_admissible(const ChartDomain& domain, const RegularRadiusConfig& cfg, const Point& y, double r) {
    const CustomMetric& g = *domain.metric();
    std::vector<Point> pts;
    for (const Vec& v : ball_directions(domain.dim(), r, cfg.ball_samples)) {
        Point p = g.exp(y, v);
        if (domain.contains(p)) pts.push_back(std::move(p));
    }
    pts.push_back(y);
    for (const Point& x1 : pts) {
        for (const Point& x2 : pts) {
            const Vec w = g.exp_inverse(x1, x2);
            if (g.exp_derivative_norm(x1, w) > cfg.b) return false;
            if (g.exp_inverse_derivative_norm(x1, x2) > cfg.b) return false;
        }
    }
    return true;
}

} // namespace

double regular_radius_point(const ChartDomain& domain, const RegularRadiusConfig& cfg, const Point& y) {
    if (!domain.contains(y)) throw DomainError("regular_radius_point: point outside M \\ boundary");
    double r = 1.0;
    if (!domain.euclidean()) {
        if (!custom_radius_admissible(domain, cfg, y, 1.0)) {
            if (!custom_radius_admissible(domain, cfg, y, cfg.resolution))
                throw ResolutionError("regular_radius_point: no admissible radius above resolution", cfg.resolution);
            double lo = cfg.resolution, hi = 1.0;
            while (hi - lo > cfg.tolerance) {
                const double mid = 0.5 * (lo + hi);
                if (custom_radius_admissible(domain, cfg, y, mid)) lo = mid;
                else hi = mid;
            }
            r = lo;
        }
    }
    if (cfg.policy == RadiusPolicy::clip) r = std::min(r, domain.boundary_distance(y));
    return r;
}

namespace {

struct Grid {
    Vec lo, hi;
    std::vector<std::size_t> counts;
    std::size_t total = 1;
    double spacing = 0.0;
};

// Box containing {d0 >= c} intersected with the chart bounds.
std::pair<Vec, Vec> sublevel_box(const ChartDomain& domain, double threshold) {
    const double reach = 1.0 / threshold;
    Vec lo = domain.lower(), hi = domain.upper();
    for (int i = 0; i < domain.dim(); ++i) {
        lo[i] = std::max(lo[i], domain.reference()[i] - reach);
        hi[i] = std::min(hi[i], domain.reference()[i] + reach);
    }
    return {lo, hi};
}

// Cell-centred nodes, `per_axis[i]` along axis i, enumerated lexicographically
// with axis 0 most significant.
template <class F>
void for_each_node(const Vec& lo, const Vec& hi, const std::vector<std::size_t>& per_axis, F&& visit) {
    const int d = static_cast<int>(lo.size());
    std::vector<std::size_t> q(d, 0);
    std::size_t total = 1;
    for (auto c : per_axis) total *= c;
    Point p(d);
    for (std::size_t n = 0; n < total; ++n) {
        std::size_t rem = n;
        for (int i = d - 1; i >= 0; --i) {
            q[i] = rem % per_axis[i];
            rem /= per_axis[i];
        }
        for (int i = 0; i < d; ++i) {
            p[i] = lo[i] + (static_cast<double>(q[i]) + 0.5) * (hi[i] - lo[i]) / static_cast<double>(per_axis[i]);
        }
        visit(p);
    }
}

struct SublevelScan {
    double min_radius = kInf;
    std::size_t points = 0;
    double resolution = 0.0;
};

SublevelScan scan_sublevel(const ChartDomain& domain, const RegularRadiusConfig& cfg, double threshold,
                           std::size_t sample_budget) {
    if (!(threshold > 0.0)) throw ArgumentError("sublevel threshold must be positive");
    if (sample_budget < 1) throw ArgumentError("sample_budget must be >= 1");
    const int d = domain.dim();
    auto [lo, hi] = sublevel_box(domain, threshold);
    SublevelScan out;
    for (int i = 0; i < d; ++i) {
        if (!(lo[i] < hi[i])) return out;
    }
    const auto k = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(sample_budget), 1.0 / d))));
    std::vector<std::size_t> per_axis(d, k);
    for (int i = 0; i < d; ++i) out.resolution = std::max(out.resolution, (hi[i] - lo[i]) / static_cast<double>(k));
    const bool trivial = domain.euclidean() && cfg.policy == RadiusPolicy::pure_norm;
    for_each_node(lo, hi, per_axis, [&](const Point& y) {
        if (!domain.contains(y) || d0(domain, y) < threshold) return;
        ++out.points;
        out.min_radius = std::min(out.min_radius, trivial ? 1.0 : regular_radius_point(domain, cfg, y));
    });
    return out;
}

} // namespace

SublevelEstimate regular_radius_sublevel_at(const ChartDomain& domain, const RegularRadiusConfig& cfg,
                                            double threshold, std::size_t sample_budget) {
    const SublevelScan s = scan_sublevel(domain, cfg, threshold, sample_budget);
    if (s.points == 0) throw DomainError("regular_radius_sublevel: empty sublevel sample");
    return {s.min_radius, s.resolution, s.points};
}

SublevelEstimate regular_radius_sublevel(const ChartDomain& domain, const RegularRadiusConfig& cfg, const Point& x,
                                         std::size_t sample_budget) {
    const double c = d0(domain, x);
    const SublevelScan s = scan_sublevel(domain, cfg, c, sample_budget);
    if (s.points == 0) {
        // Grid missed the (small) sublevel set; x itself belongs to it.
        return {regular_radius_point(domain, cfg, x), s.resolution, 1};
    }
    return {s.min_radius, s.resolution, s.points};
}

// ---------------------------------------------------------------------------
// Tankage

TankageEstimate tankage_at(const ChartDomain& domain, double threshold, double radius, double grid_resolution) {
    if (!(grid_resolution > 0.0) || grid_resolution >= radius)
        throw ResolutionError("tankage: grid resolution must be below the regular radius", grid_resolution);
    const int d = domain.dim();
    auto [lo, hi] = sublevel_box(domain, threshold);
    std::vector<std::size_t> per_axis(d, 1);
    double total = 1.0;
    for (int i = 0; i < d; ++i) {
        if (!(lo[i] < hi[i])) throw DomainError("tankage: empty sublevel set");
        per_axis[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((hi[i] - lo[i]) / grid_resolution)));
        total *= static_cast<double>(per_axis[i]);
    }
    if (total > 2.0e7) throw ResolutionError("tankage: sublevel grid too large", grid_resolution);

    // Greedy cover by open balls: the first uncovered node (lexicographic)
    // seeds a ball whose centre is shifted along the positive diagonal.
    const double shift = 0.999 * radius / std::sqrt(static_cast<double>(d));
    std::vector<Point> centres;
    TankageEstimate out;
    out.radius = radius;
    out.resolution = grid_resolution;
    for_each_node(lo, hi, per_axis, [&](const Point& p) {
        if (!domain.contains(p) || d0(domain, p) < threshold) return;
        ++out.points;
        for (auto it = centres.rbegin(); it != centres.rend(); ++it) {
            if ((*it)[0] <= p[0] - radius) break;
            if (((*it) - p).norm() < radius) return;
        }
        centres.push_back(p + Vec::Constant(d, shift));
    });
    if (out.points == 0) throw DomainError("tankage: empty sublevel sample");
    out.count = centres.size();
    return out;
}

TankageEstimate tankage(const ChartDomain& domain, const RegularRadiusConfig& cfg, const Point& x,
                        double grid_resolution) {
    const double c = d0(domain, x);
    const SublevelEstimate rho = regular_radius_sublevel(domain, cfg, x, 1u << 16);
    if (grid_resolution >= rho.value)
        throw ResolutionError("tankage: grid resolution must be below the regular radius", grid_resolution);
    TankageEstimate t = tankage_at(domain, c, rho.value, grid_resolution);
    t.count = std::max<std::uint64_t>(t.count, 1);
    return t;
}

// ---------------------------------------------------------------------------
// Boxes

BoxElement BoxElement::cube(const Point& anchor, double half_width, int level, std::int64_t net_index) {
    const auto d = anchor.size();
    BoxElement b;
    b.anchor = anchor;
    b.frame = Mat::Identity(d, d);
    b.center_offset = Vec::Zero(d);
    b.half_widths = Vec::Constant(d, half_width);
    b.level = level;
    b.net_index = net_index;
    return b;
}

Vec box_local(const ChartDomain& domain, const BoxElement& box, const Point& x) {
    const Vec v = domain.euclidean() ? Vec(x - box.anchor) : domain.metric()->exp_inverse(box.anchor, x);
    return box.frame.transpose() * v - box.center_offset;
}

bool box_contains(const ChartDomain& domain, const BoxElement& box, const Point& x) {
    const Vec u = box_local(domain, box, x);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (!(std::abs(u[i]) <= box.half_widths[i])) return false;
    }
    return true;
}

double box_volume(const BoxElement& box) {
    double v = 1.0;
    for (Eigen::Index i = 0; i < box.half_widths.size(); ++i) v *= 2.0 * box.half_widths[i];
    return v;
}

std::vector<BoxElement> subdivide_box(const BoxElement& box, int l) {
    if (l <= 0) throw ArgumentError("subdivide_box: l must be >= 1");
    const int d = static_cast<int>(box.half_widths.size());
    const double a = box.half_widths[0];
    for (int i = 1; i < d; ++i) {
        if (std::abs(box.half_widths[i] - a) > kGeomTol * std::max(1.0, a))
            throw ArgumentError("subdivide_box: box is not a cube");
    }
    if (l * d > 24) throw ArgumentError("subdivide_box: too many cells to enumerate");
    const std::int64_t side = std::int64_t{1} << l;
    const std::int64_t count = std::int64_t{1} << (l * d);
    const double h = a / static_cast<double>(side);
    std::vector<BoxElement> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t idx = 0; idx < count; ++idx) {
        BoxElement c = box;
        c.half_widths = Vec::Constant(d, h);
        std::int64_t rem = idx;
        for (int i = d - 1; i >= 0; --i) {
            const std::int64_t q = rem % side;
            rem /= side;
            const std::int64_t k = 2 * q + 1 - side;
            c.center_offset[i] = box.center_offset[i] + static_cast<double>(k) * h;
        }
        c.cell_index = idx;
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// RegularityProfile

RegularityProfile::RegularityProfile(double b, std::function<double(const Point&)> rho_point,
                                     std::function<double(const Point&)> rho_sublevel,
                                     std::function<std::uint64_t(const Point&)> tankage, Mode mode)
    : b_(b), rho_point_(std::move(rho_point)), rho_sublevel_(std::move(rho_sublevel)),
      tankage_(std::move(tankage)), mode_(mode) {
    if (b_ < 1.0) throw ArgumentError("regularity profile requires b >= 1");
}

RegularityProfile RegularityProfile::for_interval(const ChartDomain& domain, double b, RadiusPolicy policy) {
    if (!domain.interval_ends() || !domain.euclidean())
        throw ArgumentError("for_interval requires a euclidean interval domain");
    const auto [lo, hi] = *domain.interval_ends();
    const double x0 = domain.reference()[0];

    // {d0 >= c} = [max(lo + c, x0 - 1/c), min(hi - c, x0 + 1/c)]
    auto sublevel = [lo, hi, x0](double c) {
        const double a = std::max(std::isfinite(lo) ? lo + c : -kInf, x0 - 1.0 / c);
        const double z = std::min(std::isfinite(hi) ? hi - c : kInf, x0 + 1.0 / c);
        return std::make_pair(a, z);
    };
    auto rho_point = [domain, policy](const Point& y) {
        if (!domain.contains(y)) throw DomainError("rho_point: point outside M \\ boundary");
        return policy == RadiusPolicy::clip ? std::min(1.0, domain.boundary_distance(y)) : 1.0;
    };
    auto rho_sub = [domain, policy, sublevel, lo, hi](const Point& x) {
        const double c = d0(domain, x);
        if (policy == RadiusPolicy::pure_norm) return 1.0;
        const auto [a, z] = sublevel(c);
        const double clearance = std::min(std::isfinite(lo) ? a - lo : kInf, std::isfinite(hi) ? hi - z : kInf);
        return std::min(1.0, clearance);
    };
    auto tank = [domain, sublevel, rho_sub](const Point& x) -> std::uint64_t {
        const double c = d0(domain, x);
        const auto [a, z] = sublevel(c);
        const double length = std::max(0.0, z - a);
        const double r = rho_sub(x);
        // Open balls of radius r cover a closed interval of length L with
        // floor(L / 2r) + 1 balls at best.
        return static_cast<std::uint64_t>(std::floor(length / (2.0 * r))) + 1;
    };
    return RegularityProfile(b, rho_point, rho_sub, tank, Mode::analytic);
}

RegularityProfile RegularityProfile::tabulated(const ChartDomain& domain, const RegularRadiusConfig& cfg,
                                               double min_threshold, std::size_t sample_budget,
                                               double grid_resolution) {
    struct Entry {
        double threshold;
        double rho;
        std::uint64_t tankage;
    };
    auto table = std::make_shared<std::vector<Entry>>();
    // Descending ladder c_k = 2^{8 - k/4}.
    for (int k = 0;; ++k) {
        const double c = std::ldexp(1.0, 8) * std::pow(2.0, -0.25 * k);
        if (c < min_threshold) break;
        const SublevelScan s = scan_sublevel(domain, cfg, c, sample_budget);
        if (s.points == 0) continue;
        const double res = std::min(grid_resolution, 0.25 * s.min_radius);
        TankageEstimate t;
        try {
            t = tankage_at(domain, c, s.min_radius, res);
        } catch (const DomainError&) {
            continue;
        }
        table->push_back({c, s.min_radius, std::max<std::uint64_t>(t.count, 1)});
    }
    if (table->empty()) throw DomainError("tabulated profile: no sublevel set was sampled");

    auto lookup = [table](double c) -> const Entry& {
        for (const Entry& e : *table) {
            if (e.threshold <= c) return e;
        }
        return table->back();
    };
    auto rho_point = [domain, cfg](const Point& y) { return regular_radius_point(domain, cfg, y); };
    auto rho_sub = [domain, lookup](const Point& x) { return lookup(d0(domain, x)).rho; };
    auto tank = [domain, lookup](const Point& x) { return lookup(d0(domain, x)).tankage; };
    return RegularityProfile(cfg.b, rho_point, rho_sub, tank, Mode::estimated);
}

} // namespace ruelle
