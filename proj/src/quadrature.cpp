#include "ruelle/quadrature.hpp"

#include "ruelle/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

namespace ruelle {

namespace {

template <int N>
GaussLegendre<N> make_rule() {
    GaussLegendre<N> r;
    for (int i = 0; i < N; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= N; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = N * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.x[i] = z;
        r.w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return r;
}

struct Panel {
    double lo, hi, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

} // namespace

const GaussLegendre<8>& gauss_legendre8() {
    static const GaussLegendre<8> rule = make_rule<8>();
    return rule;
}

const GaussLegendre<16>& gauss_legendre16() {
    static const GaussLegendre<16> rule = make_rule<16>();
    return rule;
}

double EndpointMap::x(double t) const {
    const double s = t * t * (3.0 - 2.0 * t);
    if (std::isfinite(b)) return a + (b - a) * s;
    return a + s / (1.0 - s);
}

double EndpointMap::jacobian(double t) const {
    const double s = t * t * (3.0 - 2.0 * t);
    const double ds = 6.0 * t * (1.0 - t);
    if (std::isfinite(b)) return (b - a) * ds;
    const double q = 1.0 - s;
    return ds / (q * q);
}

QuadResult integrate_mapped(const std::function<double(double)>& f, const EndpointMap& map, double lo_t,
                            double hi_t, const QuadOptions& options) {
    const auto& g8 = gauss_legendre8();
    const auto& g16 = gauss_legendre16();
    QuadResult out;

    auto g = [&](double t) {
        const double x = map.x(t);
        if (!(x > map.a) || !(x < map.b)) return 0.0;
        const double v = f(x) * map.jacobian(t);
        return std::isfinite(v) ? v : 0.0;
    };
    auto panel = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        double s8 = 0.0, s16 = 0.0;
        for (int i = 0; i < 8; ++i) s8 += g8.w[i] * g(c + h * g8.x[i]);
        for (int i = 0; i < 16; ++i) s16 += g16.w[i] * g(c + h * g16.x[i]);
        out.evals += 24;
        return Panel{lo, hi, h * s16, std::abs(h * (s16 - s8))};
    };

    std::priority_queue<Panel> heap;
    constexpr int kInitial = 8;
    for (int k = 0; k < kInitial; ++k) {
        heap.push(panel(lo_t + (hi_t - lo_t) * k / kInitial, lo_t + (hi_t - lo_t) * (k + 1) / kInitial));
    }
    auto totals = [&] {
        // Sum in a fixed order so the result does not depend on heap layout.
        std::vector<Panel> all;
        auto copy = heap;
        while (!copy.empty()) {
            all.push_back(copy.top());
            copy.pop();
        }
        std::sort(all.begin(), all.end(), [](const Panel& p, const Panel& q) { return p.lo < q.lo; });
        double v = 0.0, e = 0.0;
        for (const auto& p : all) {
            v += p.value;
            e += p.error;
        }
        return std::make_pair(v, e);
    };
    double value = 0.0, error = 0.0;
    for (auto [v, e] = totals();; std::tie(v, e) = totals()) {
        value = v;
        error = e;
        if (error <= std::max(options.abs_tol, options.rel_tol * std::abs(value))) {
            out.converged = true;
            break;
        }
        if (out.evals + 48 > options.max_evals) break;
        // Refine a batch of the worst panels before re-summing.
        const int batch = std::max<int>(1, static_cast<int>(heap.size() / 8));
        for (int k = 0; k < batch && out.evals + 48 <= options.max_evals; ++k) {
            const Panel p = heap.top();
            heap.pop();
            const double mid = 0.5 * (p.lo + p.hi);
            if (!(mid > p.lo && mid < p.hi)) {
                heap.push(Panel{p.lo, p.hi, p.value, 0.0});
                continue;
            }
            heap.push(panel(p.lo, mid));
            heap.push(panel(mid, p.hi));
        }
    }
    out.value = value;
    out.error = error;
    return out;
}

QuadResult integrate_interval(const std::function<double(double)>& f, double a, double b,
                              const QuadOptions& options) {
    return integrate_mapped(f, EndpointMap{a, b}, 0.0, 1.0, options);
}

DivergenceCheck check_divergence(const std::function<double(double)>& f, double a, double b,
                                 const QuadOptions& options, int levels) {
    DivergenceCheck out;
    const EndpointMap map{a, b};
    QuadOptions sub = options;
    sub.max_evals = std::max<std::size_t>(2000, options.max_evals / static_cast<std::size_t>(levels));
    for (int k = 1; k <= levels; ++k) {
        const double delta = std::pow(10.0, -k);
        out.truncated.push_back(integrate_mapped(f, map, delta, 1.0 - delta, sub).value);
    }
    int streak = 0;
    for (std::size_t k = 1; k < out.truncated.size(); ++k) {
        const double prev = std::abs(out.truncated[k - 1]);
        const double cur = std::abs(out.truncated[k]);
        if (cur > 1.1 * prev && cur > 1e-300) {
            if (++streak >= 3) out.diverged = true;
        } else {
            streak = 0;
        }
    }
    return out;
}

} // namespace ruelle
