#include "doctest.h"

#include "ruelle/errors.hpp"
#include "ruelle/geometry.hpp"
#include "ruelle/rng.hpp"

#include <algorithm>
#include <cmath>

using namespace ruelle;

namespace {

ChartDomain half_line() { return ChartDomain::interval(0.0, kInf, 1.0); }
ChartDomain unit() { return ChartDomain::interval(0.0, 1.0, 0.5); }

} // namespace

TEST_CASE("d0 on a half-line and the unit interval") {
    CHECK(d0(half_line(), point1(0.1)) == doctest::Approx(0.1));
    CHECK(d0(half_line(), point1(100.0)) == doctest::Approx(1.0 / 99.0));
    CHECK(d0(unit(), point1(0.5)) == doctest::Approx(0.5));
    CHECK(d0_detail(half_line(), point1(100.0)).branch == D0Branch::infinity);
    CHECK(d0_detail(half_line(), point1(0.1)).branch == D0Branch::boundary);
}

TEST_CASE("d_star clips at one") {
    CHECK(d_star(unit(), point1(0.5)) == doctest::Approx(0.5));
    CHECK(d_star(half_line(), point1(3.0)) == doctest::Approx(0.5));
    const ChartDomain wide = ChartDomain::interval(-10.0, 10.0, 0.0);
    CHECK(d_star(wide, point1(0.5)) == 1.0);
}

TEST_CASE("d_star lies in (0, 1] and d0 is continuous") {
    CounterRng rng(stream(1, "test"));
    const ChartDomain dom = half_line();
    for (int i = 0; i < 2000; ++i) {
        const double x = -std::log(rng.uniform()) * 5.0;
        if (!(x > 0)) continue;
        const double v = d_star(dom, point1(x));
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
        // Lipschitz constant 1 on the boundary branch, d0^2 on the other.
        const double h = 1e-9;
        const double v0 = d0(dom, point1(x));
        CHECK(std::abs(d0(dom, point1(x + h)) - v0) <= 1.01 * h * std::max(1.0, 4.0 * v0 * v0) + 1e-15);
    }
}

TEST_CASE("points outside the domain are rejected") {
    CHECK_THROWS_AS(d0(unit(), point1(1.5)), DomainError);
    CHECK_THROWS_AS(d0(unit(), point1(0.0)), DomainError);
}

TEST_CASE("separated_net small examples") {
    std::vector<Point> c{point1(0.0), point1(0.4), point1(0.9)};
    const auto net = separated_net(c, 0.5, {}, NetOrder::given);
    REQUIRE(net.size() == 2);
    CHECK(net[0][0] == 0.0);
    CHECK(net[1][0] == 0.9);
    std::vector<Point> one{point1(0.3)};
    CHECK(separated_net(one, 10.0).size() == 1);
}

TEST_CASE("separated_net on a grid: separation and covering by brute force") {
    std::vector<Point> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(point1(i / 100.0));
    const auto net = separated_net(grid, 0.1);
    CHECK(net.size() >= 10);
    CHECK(net.size() <= 11);
    for (std::size_t i = 0; i < net.size(); ++i)
        for (std::size_t j = i + 1; j < net.size(); ++j) CHECK(std::abs(net[i][0] - net[j][0]) > 0.1);
    for (const auto& p : grid) {
        double best = kInf;
        for (const auto& q : net) best = std::min(best, std::abs(p[0] - q[0]));
        CHECK(best <= 0.1 + 1e-12);
    }
}

TEST_CASE("separated_net in the plane with a region predicate") {
    CounterRng rng(stream(3, "test"));
    std::vector<Point> cand;
    for (int i = 0; i < 3000; ++i) cand.push_back(point2(rng.uniform(), rng.uniform()));
    const double eps = 0.07;
    auto region = [](const Point& p) { return p[0] < 0.8; };
    const auto net = separated_net(cand, eps, region);
    std::size_t violations = 0;
    for (std::size_t i = 0; i < net.size(); ++i) {
        CHECK(region(net[i]));
        for (std::size_t j = i + 1; j < net.size(); ++j) violations += (net[i] - net[j]).norm() <= eps;
    }
    CHECK(violations == 0);
    std::size_t uncovered = 0;
    for (const auto& p : cand) {
        if (!region(p)) continue;
        double best = kInf;
        for (const auto& q : net) best = std::min(best, (p - q).norm());
        uncovered += best > eps;
    }
    CHECK(uncovered == 0);
}

TEST_CASE("covering_count_bound") {
    CHECK(covering_count_bound(1.0, 0.25, 3.0, 1) == 12);
    CHECK(covering_count_bound(1.0, 2.0, 9.0, 2) == 9);
    CHECK(covering_count_bound(1.0, 0.5, 9.0, 2) == 36);
    // Packing oracle: a greedy 0.25-separated set on the segment [-1, 1].
    std::vector<Point> seg;
    for (int i = 0; i <= 20000; ++i) seg.push_back(point1(-1.0 + i * 1e-4));
    CHECK(separated_net(seg, 0.25).size() <= 12);
    CHECK(log_covering_count_bound(1.0, 0.25, 3.0, 1) == doctest::Approx(std::log(12.0)));
}

TEST_CASE("regular radius in euclidean charts") {
    RegularRadiusConfig pure;
    RegularRadiusConfig clip;
    clip.policy = RadiusPolicy::clip;
    const ChartDomain plane = ChartDomain::euclidean_space(2, point2(0, 0));
    CHECK(regular_radius_point(plane, pure, point2(3.0, -7.0)) == 1.0);
    CHECK(regular_radius_point(unit(), clip, point1(0.25)) == doctest::Approx(0.25));
    CHECK(regular_radius_point(unit(), pure, point1(0.25)) == 1.0);
    CounterRng rng(stream(5, "test"));
    for (int i = 0; i < 200; ++i) {
        const double y = rng.uniform();
        CHECK(regular_radius_point(unit(), clip, point1(y)) == doctest::Approx(std::min({1.0, y, 1.0 - y})));
    }
}

TEST_CASE("regular radius of a cubic-distortion metric") {
    // exp_x(v) = x + v + v^3; ‖D exp‖ = 1 + 3 v^2, inverse derivative <= 1.
    CustomMetric g;
    auto solve = [](double t) {
        double v = t;
        for (int k = 0; k < 60; ++k) v -= (v + v * v * v - t) / (1.0 + 3.0 * v * v);
        return v;
    };
    g.exp = [](const Point& x, const Vec& v) { return point1(x[0] + v[0] + v[0] * v[0] * v[0]); };
    g.exp_inverse = [solve](const Point& x, const Point& y) {
        Vec v(1);
        v[0] = solve(y[0] - x[0]);
        return v;
    };
    g.exp_derivative_norm = [](const Point&, const Vec& w) { return 1.0 + 3.0 * w[0] * w[0]; };
    g.exp_inverse_derivative_norm = [solve](const Point& x, const Point& y) {
        const double v = solve(y[0] - x[0]);
        return 1.0 / (1.0 + 3.0 * v * v);
    };
    g.distance = [solve](const Point& x, const Point& y) { return std::abs(solve(y[0] - x[0])); };
    const ChartDomain dom = ChartDomain::euclidean_space(1, point1(0.0)).with_metric(g);
    RegularRadiusConfig cfg;
    cfg.b = 1.3;
    // Oracle: the widest pair in B(y, r) is 2(r + r^3) apart; it must keep
    // 1 + 3 w^2 <= b for w + w^3 = 2(r + r^3).
    const double w_star = std::sqrt((cfg.b - 1.0) / 3.0);
    const double target = 0.5 * (w_star + w_star * w_star * w_star);
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (mid + mid * mid * mid <= target ? lo : hi) = mid;
    }
    CHECK(std::abs(regular_radius_point(dom, cfg, point1(0.3)) - lo) <= 1e-3);
}

TEST_CASE("regular radius over sublevel sets") {
    RegularRadiusConfig clip;
    clip.policy = RadiusPolicy::clip;
    const auto est = regular_radius_sublevel(unit(), clip, point1(0.1), 20000);
    // Brute-force oracle: the clip is the boundary distance, minimised over
    // the grid of {y : d0(y) >= 0.1} = [0.1, 0.9].
    double oracle = kInf;
    for (int i = 0; i <= 100000; ++i) {
        const double y = 1e-5 * i;
        if (y <= 0 || y >= 1) continue;
        if (d0(unit(), point1(y)) >= 0.1) oracle = std::min(oracle, std::min(y, 1.0 - y));
    }
    CHECK(std::abs(est.value - oracle) <= est.resolution + 1e-9);
    CHECK(est.value == doctest::Approx(0.1).epsilon(0.02));
    const ChartDomain plane = ChartDomain::euclidean_space(1, point1(0.0));
    RegularRadiusConfig pure;
    CHECK(regular_radius_sublevel(plane, pure, point1(0.4), 2000).value == 1.0);

    double prev = -1.0;
    for (double x : {0.02, 0.05, 0.1, 0.2, 0.3, 0.45}) {
        const double v = regular_radius_sublevel_at(unit(), clip, d0(unit(), point1(x)), 20000).value;
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
}

TEST_CASE("tankage against the interval covering oracle") {
    for (double c : {0.05, 0.1, 0.2, 0.3}) {
        for (double r : {0.01, 0.03, 0.1}) {
            const auto t = tankage_at(unit(), c, r, 1e-3);
            const double L = 1.0 - 2.0 * c;
            const double oracle = std::ceil(L / (2.0 * r));
            CHECK(static_cast<double>(t.count) <= 2.0 * oracle + 1.0);
            CHECK(static_cast<double>(t.count) >= 0.5 * oracle);
        }
    }
    CHECK(tankage_at(unit(), 0.45, 0.5, 1e-3).count == 1);
    std::uint64_t prev = 0;
    for (double c : {0.4, 0.3, 0.2, 0.1, 0.05, 0.01}) {
        const auto t = tankage_at(unit(), c, 0.02, 1e-3);
        CHECK(t.count >= prev);
        prev = t.count;
    }
}

TEST_CASE("subdivide_box") {
    const BoxElement b = BoxElement::cube(point1(0.0), 1.0);
    const auto cells = subdivide_box(b, 1);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].center_offset[0] == doctest::Approx(-0.5));
    CHECK(cells[1].center_offset[0] == doctest::Approx(0.5));
    CHECK(cells[0].half_widths[0] == doctest::Approx(0.5));
    CHECK(subdivide_box(BoxElement::cube(point2(0, 0), 1.0), 1).size() == 4);

    const ChartDomain plane = ChartDomain::euclidean_space(2, point2(0, 0));
    const BoxElement parent = BoxElement::cube(point2(0.3, -0.2), 0.25);
    for (int l : {1, 2, 3}) {
        const auto sub = subdivide_box(parent, l);
        CHECK(sub.size() == (std::size_t{1} << (2 * l)));
        double vol = 0.0;
        for (const auto& s : sub) vol += box_volume(s);
        CHECK(std::abs(vol - box_volume(parent)) <= 1e-12);
        CounterRng rng(stream(l, "test"));
        for (int i = 0; i < 500; ++i) {
            const Point p = point2(0.3 + 0.5 * (rng.uniform() - 0.5), -0.2 + 0.5 * (rng.uniform() - 0.5));
            int inside = 0;
            for (const auto& s : sub) {
                const Vec u = box_local(plane, s, p) - s.center_offset;
                bool strict = true;
                for (int k = 0; k < 2; ++k) strict = strict && std::abs(u[k]) < s.half_widths[k];
                inside += strict;
            }
            CHECK(inside <= 1);
            int closed = 0;
            for (const auto& s : sub) closed += box_contains(plane, s, p);
            CHECK(closed >= 1);
        }
    }
}

TEST_CASE("regularity profiles") {
    const RegularityProfile p = RegularityProfile::for_interval(unit(), 1.0, RadiusPolicy::pure_norm);
    CHECK(p.rho_point(point1(0.3)) == 1.0);
    CHECK(p.tankage(point1(0.3)) >= 1);
    const RegularityProfile q = RegularityProfile::for_interval(unit(), 1.0, RadiusPolicy::clip);
    CHECK(q.rho_sublevel(point1(0.3)) <= q.rho_sublevel(point1(0.4)) + 1e-12);
    CHECK(q.tankage(point1(0.05)) >= q.tankage(point1(0.4)));
    const ChartDomain sq = ChartDomain::box(Vec::Zero(2), Vec::Ones(2), point2(0.5, 0.5));
    RegularRadiusConfig cfg;
    cfg.policy = RadiusPolicy::clip;
    const RegularityProfile t = RegularityProfile::tabulated(sq, cfg, 1e-2, 2000, 0.02);
    CHECK(t.rho_sublevel(point2(0.1, 0.5)) <= t.rho_sublevel(point2(0.4, 0.5)) + 1e-12);
    CHECK(t.tankage(point2(0.1, 0.5)) >= t.tankage(point2(0.4, 0.5)));
}
