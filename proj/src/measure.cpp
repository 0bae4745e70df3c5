#include "ruelle/measure.hpp"

#include "ruelle/errors.hpp"
#include "ruelle/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ruelle {

// Piecewise CDF in the endpoint-map variable t, K panels.
struct InvariantMeasure::CdfTable {
    EndpointMap map{0.0, 1.0};
    std::vector<double> t;
    std::vector<double> F;
};

namespace {

constexpr std::size_t kCdfPanels = 2048;

double panel_integral(const std::function<double(double)>& g, double lo, double hi) {
    const auto& r = gauss_legendre16();
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    double s = 0.0;
    for (int i = 0; i < 16; ++i) s += r.w[i] * g(c + h * r.x[i]);
    return h * s;
}

} // namespace

InvariantMeasure InvariantMeasure::analytic(std::string name, std::function<double(double)> density, double lo,
                                            double hi) {
    if (!(lo < hi) || !std::isfinite(lo)) throw ArgumentError("analytic measure needs finite lo < hi (hi may be +inf)");
    InvariantMeasure m;
    m.kind_ = Kind::analytic;
    m.name_ = std::move(name);
    m.dim_ = 1;
    m.lo_ = lo;
    m.hi_ = hi;
    m.raw_density_ = density;

    QuadOptions qo;
    qo.max_evals = 200000;
    const QuadResult q = integrate_interval(density, lo, hi, qo);
    const DivergenceCheck dc = check_divergence(density, lo, hi, qo);
    if (dc.diverged || !std::isfinite(q.value) || !(q.value > 0.0))
        throw DomainError("density '" + m.name_ + "' is not normalizable");
    m.norm_ = q.value;

    auto table = std::make_shared<CdfTable>();
    table->map = EndpointMap{lo, hi};
    const EndpointMap map = table->map;
    auto g = [&](double t) {
        const double x = map.x(t);
        if (!(x > lo) || !(x < hi)) return 0.0;
        const double v = density(x) * map.jacobian(t);
        return std::isfinite(v) ? v : 0.0;
    };
    table->t.resize(kCdfPanels + 1);
    table->F.resize(kCdfPanels + 1);
    table->F[0] = 0.0;
    for (std::size_t k = 0; k <= kCdfPanels; ++k) table->t[k] = static_cast<double>(k) / kCdfPanels;
    for (std::size_t k = 0; k < kCdfPanels; ++k) table->F[k + 1] = table->F[k] + panel_integral(g, table->t[k], table->t[k + 1]);
    const double total = table->F.back();
    for (double& f : table->F) f /= total;
    m.cdf_ = table;
    return m;
}

InvariantMeasure InvariantMeasure::product(std::vector<InvariantMeasure> factors) {
    if (factors.empty()) throw ArgumentError("product measure needs at least one factor");
    InvariantMeasure m;
    m.kind_ = Kind::product;
    m.dim_ = 0;
    for (const auto& f : factors) {
        if (f.kind() == Kind::empirical) throw ArgumentError("product factors must be analytic");
        m.dim_ += f.dim();
        m.name_ += (m.name_.empty() ? "" : "x") + f.name();
    }
    if (m.dim_ > kMaxDim) throw ArgumentError("product measure dimension exceeds 8");
    m.factors_ = std::move(factors);
    return m;
}

InvariantMeasure InvariantMeasure::empirical(std::vector<Point> points, std::string name) {
    if (points.empty()) throw DomainError("empirical measure needs at least one point");
    InvariantMeasure m;
    m.kind_ = Kind::empirical;
    m.name_ = std::move(name);
    m.dim_ = static_cast<int>(points.front().size());
    for (const auto& p : points) {
        if (p.size() != m.dim_ || !all_finite(p)) throw ArgumentError("empirical points must be finite and of equal dimension");
    }
    m.points_ = std::move(points);
    return m;
}

double InvariantMeasure::density(double x) const {
    if (kind_ != Kind::analytic) throw ArgumentError("density is defined for analytic measures only");
    if (!(x > lo_ && x < hi_)) return 0.0;
    return raw_density_(x) / norm_;
}

Point InvariantMeasure::draw(CounterRng& rng) const {
    switch (kind_) {
    case Kind::empirical:
        return points_[rng.below(points_.size())];
    case Kind::product: {
        Point p(dim_);
        int off = 0;
        for (const auto& f : factors_) {
            const Point q = f.draw(rng);
            for (int i = 0; i < f.dim(); ++i) p[off + i] = q[i];
            off += f.dim();
        }
        return p;
    }
    case Kind::analytic:
        break;
    }
    const CdfTable& tab = *cdf_;
    const double u = rng.uniform();
    const auto it = std::upper_bound(tab.F.begin(), tab.F.end(), u);
    std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - tab.F.begin())) - 1;
    k = std::min(k, kCdfPanels - 1);
    const EndpointMap map = tab.map;
    const double total = norm_;
    auto g = [&](double t) {
        const double x = map.x(t);
        if (!(x > lo_) || !(x < hi_)) return 0.0;
        const double v = raw_density_(x) * map.jacobian(t) / total;
        return std::isfinite(v) ? v : 0.0;
    };
    // Newton on t with a bisection safeguard inside the panel.
    double a = tab.t[k], b = tab.t[k + 1];
    const double base = tab.F[k], width = tab.F[k + 1] - tab.F[k];
    double t = width > 0.0 ? a + (b - a) * (u - base) / width : 0.5 * (a + b);
    for (int it2 = 0; it2 < 60; ++it2) {
        const double G = base + panel_integral(g, tab.t[k], t) - u;
        if (G > 0.0) b = t;
        else a = t;
        const double gt = g(t);
        double next = gt > 0.0 ? t - G / gt : 0.5 * (a + b);
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        if (std::abs(G) < 1e-15 || std::abs(next - t) < 1e-13 * std::max(t, 1e-300) || b - a < 1e-15) {
            t = next;
            break;
        }
        t = next;
    }
    double x = map.x(t);
    if (!(x > lo_)) x = std::nextafter(lo_, hi_);
    if (!(x < hi_)) x = std::nextafter(hi_, lo_);
    return point1(x);
}

std::vector<Point> InvariantMeasure::sample(std::size_t n, std::uint64_t seed, const Exec& exec) const {
    return sample(n, seed, "sample", exec);
}

std::vector<Point> InvariantMeasure::sample(std::size_t n, std::uint64_t seed, std::string_view stage,
                                            const Exec& exec) const {
    if (n < 1) throw ArgumentError("sample: n must be >= 1");
    std::vector<Point> out(n);
    const std::uint64_t label = stage_label(stage);
    parallel_for(exec, n, [&](std::size_t i) {
        CounterRng rng(StreamId{seed, label, i});
        out[i] = draw(rng);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Registry and loading

std::vector<Point> load_samples_csv(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open sample file: " + path);
    std::vector<Point> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        Point p(dim);
        for (int i = 0; i < dim; ++i) {
            if (!(row >> p[i])) throw Error("malformed row in " + path + ": " + line);
        }
        out.push_back(p);
    }
    return out;
}

std::vector<Point> load_samples_binary(const std::string& path, int dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open sample file: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t row = sizeof(double) * static_cast<std::size_t>(dim);
    if (bytes.size() % row != 0) throw Error("binary sample file size is not a multiple of the row size: " + path);
    std::vector<Point> out(bytes.size() / row, Point(dim));
    for (std::size_t r = 0; r < out.size(); ++r) {
        for (int i = 0; i < dim; ++i) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b)
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[r * row + static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)])) << (8 * b);
            double v;
            std::memcpy(&v, &bits, sizeof v);
            out[r][i] = v;
        }
    }
    return out;
}

InvariantMeasure make_measure(const std::string& name, const nlohmann::json& params) {
    if (name == "uniform") {
        const double lo = params.value("lo", 0.0), hi = params.value("hi", 1.0);
        return InvariantMeasure::analytic("uniform", [](double) { return 1.0; }, lo, hi);
    }
    if (name == "gauss")
        return InvariantMeasure::analytic("gauss", [](double x) { return 1.0 / ((1.0 + x) * std::numbers::ln2); }, 0.0, 1.0);
    if (name == "arcsine")
        return InvariantMeasure::analytic("arcsine", [](double x) { return 1.0 / (std::numbers::pi * std::sqrt(x * (1.0 - x))); }, 0.0, 1.0);
    if (name == "gauss_noncompact")
        return InvariantMeasure::analytic(
            "gauss_noncompact", [](double y) { return 1.0 / (y * (y + 1.0) * std::numbers::ln2); }, 1.0, kInf);
    if (name == "uniform2d") return InvariantMeasure::product({make_measure("uniform"), make_measure("uniform")});
    if (name == "empirical") {
        const std::string path = params.at("path").get<std::string>();
        const int dim = params.value("dim", 1);
        const std::string format = params.value("format", std::string("csv"));
        auto pts = format == "binary" ? load_samples_binary(path, dim) : load_samples_csv(path, dim);
        return InvariantMeasure::empirical(std::move(pts), "empirical:" + path);
    }
    throw ArgumentError("unknown measure: " + name);
}

InvariantMeasure measure_from_config(const nlohmann::json& config) {
    return make_measure(config.at("name").get<std::string>(), config.value("params", nlohmann::json::object()));
}

InvariantMeasure birkhoff_measure(const SmoothSystem& sys, const Point& x, std::size_t burn_in, std::size_t n) {
    Point y = iterate(sys, x, static_cast<int>(burn_in));
    std::vector<Point> pts;
    pts.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        pts.push_back(y);
        y = iterate(sys, y, 1);
    }
    return InvariantMeasure::empirical(std::move(pts), "birkhoff:" + sys.name);
}

// ---------------------------------------------------------------------------
// Integration

namespace {

Estimate monte_carlo(const InvariantMeasure& mu, const std::function<double(const Point&)>& phi,
                     const IntegrateOptions& o, std::string_view stage) {
    const std::size_t n = std::max<std::size_t>(o.mc_samples, 100);
    std::vector<double> vals(n);
    const std::uint64_t label = stage_label(stage);
    parallel_for(o.exec, n, [&](std::size_t i) {
        CounterRng rng(StreamId{o.seed, label, i});
        vals[i] = phi(mu.draw(rng));
    });
    Estimate e;
    e.method = "monte-carlo";
    e.evaluations = n;
    for (double v : vals) {
        if (!std::isfinite(v)) {
            e.diverged = true;
            e.value = kInf;
            return e;
        }
    }
    const MeanStderr ms = mean_stderr(vals);
    e.value = ms.mean;
    e.std_error = ms.std_error;
    // Running means over doubling prefixes; sustained >10% growth of the
    // mean of |φ| is read as divergence.
    std::vector<double> absval(n);
    for (std::size_t i = 0; i < n; ++i) absval[i] = std::abs(vals[i]);
    int streak = 0;
    double prev = -1.0;
    for (std::size_t len = n >> 6; len >= 64 && len <= n; len *= 2) {
        const double m = pairwise_sum(std::span<const double>(absval).first(len)) / static_cast<double>(len);
        if (prev > 0.0 && m > 1.1 * prev) {
            if (++streak >= 3) e.diverged = true;
        } else {
            streak = 0;
        }
        prev = m;
    }
    return e;
}

Estimate quadrature(const InvariantMeasure& mu, const std::function<double(const Point&)>& phi,
                    const IntegrateOptions& o) {
    auto f = [&](double x) { return phi(point1(x)) * mu.density(x); };
    QuadOptions qo;
    qo.max_evals = std::max<std::size_t>(o.quad_max_evals, 100);
    std::vector<double> cuts{mu.lower()};
    for (double b : o.breakpoints) {
        if (b > mu.lower() && b < mu.upper()) cuts.push_back(b);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.push_back(mu.upper());
    Estimate e;
    e.method = "quadrature";
    QuadOptions piece = qo;
    piece.max_evals = std::max<std::size_t>(400, qo.max_evals / (cuts.size() - 1));
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const QuadResult q = integrate_interval(f, cuts[k], cuts[k + 1], piece);
        e.value += q.value;
        e.std_error += q.error;
        e.evaluations += q.evals;
    }
    if (o.check_divergence) {
        const DivergenceCheck dc = check_divergence(f, mu.lower(), mu.upper(), qo);
        e.evaluations += qo.max_evals;
        if (dc.diverged) {
            e.diverged = true;
            e.value = kInf;
        }
    }
    return e;
}

} // namespace

Estimate integrate(const InvariantMeasure& mu, const std::function<double(const Point&)>& phi,
                   const IntegrateOptions& options) {
    if (mu.quadrature_capable() && !options.force_monte_carlo) return quadrature(mu, phi, options);
    return monte_carlo(mu, phi, options, "integrate");
}

std::vector<TestFunction> default_test_functions(const ChartDomain& domain) {
    const Vec lo = domain.lower(), hi = domain.upper();
    auto squash = [lo, hi](const Point& x, int i) {
        if (std::isfinite(lo[i]) && std::isfinite(hi[i])) return (x[i] - lo[i]) / (hi[i] - lo[i]);
        if (std::isfinite(lo[i])) return 1.0 / (1.0 + x[i] - lo[i]);
        if (std::isfinite(hi[i])) return 1.0 / (1.0 + hi[i] - x[i]);
        return 0.5 + std::atan(x[i]) / std::numbers::pi;
    };
    std::vector<TestFunction> out;
    const double pi = std::numbers::pi;
    for (int i = 0; i < domain.dim(); ++i) {
        const std::string ax = domain.dim() > 1 ? "[" + std::to_string(i) + "]" : "";
        for (int p = 1; p <= 3; ++p) {
            out.push_back({"s" + ax + "^" + std::to_string(p), [=](const Point& x) { return std::pow(squash(x, i), p); }});
        }
        out.push_back({"cos(pi s" + ax + ")", [=](const Point& x) { return std::cos(pi * squash(x, i)); }});
        out.push_back({"cos(2pi s" + ax + ")", [=](const Point& x) { return std::cos(2.0 * pi * squash(x, i)); }});
        out.push_back({"sin(2pi s" + ax + ")", [=](const Point& x) { return std::sin(2.0 * pi * squash(x, i)); }});
        for (double c : {0.25, 0.5, 0.75}) {
            std::ostringstream nm;
            nm << "bump(s" << ax << "," << c << ")";
            out.push_back({nm.str(), [=](const Point& x) {
                               const double z = (squash(x, i) - c) / 0.1;
                               return std::exp(-0.5 * z * z);
                           }});
        }
    }
    return out;
}

InvarianceReport check_invariance(const InvariantMeasure& mu, const SmoothSystem& sys,
                                  const std::vector<TestFunction>& tests, const IntegrateOptions& options) {
    if (tests.empty()) throw ArgumentError("check_invariance: no test functions");
    InvarianceReport rep;
    const bool quad = mu.quadrature_capable() && !options.force_monte_carlo;
    rep.method = quad ? "quadrature" : "monte-carlo";
    rep.tolerance = quad ? 1e-3 : 0.0;

    auto image = [&sys](const Point& x, bool& escaped) {
        escaped = false;
        if (!sys.in_U(x)) {
            escaped = true;
            return x;
        }
        Point y = sys.map(x);
        if (!sys.domain.contains(y)) escaped = true;
        return y;
    };
    IntegrateOptions o = options;
    o.check_divergence = false;
    if (o.breakpoints.empty()) o.breakpoints = sys.breakpoints;
    rep.excluded_mass = integrate(mu, [&](const Point& x) {
                            bool esc;
                            image(x, esc);
                            return esc ? 1.0 : 0.0;
                        }, o).value;

    bool all_pass = true;
    for (const auto& tf : tests) {
        auto defect = [&](const Point& x) {
            bool esc;
            const Point y = image(x, esc);
            return esc ? 0.0 : tf.fn(y) - tf.fn(x);
        };
        Estimate e = quad ? integrate(mu, defect, o) : monte_carlo(mu, defect, o, "invariance");
        e.value = std::abs(e.value);
        const double tol = quad ? 1e-3 : 3.0 * e.std_error;
        if (!(e.value <= tol)) all_pass = false;
        rep.tolerance = std::max(rep.tolerance, tol);
        rep.max_defect = std::max(rep.max_defect, e.value);
        rep.defects.emplace_back(tf.name, e);
    }
    rep.passes = all_pass;
    return rep;
}

IntegrabilityReport condition_B_report(const InvariantMeasure& mu, const SmoothSystem& sys,
                                       const RegularityProfile& profile, const IntegrateOptions& options) {
    IntegrabilityReport rep;
    const bool quad = mu.quadrature_capable() && !options.force_monte_carlo;
    rep.method = quad ? "quadrature" : "monte-carlo";

    // Integrand values at x; NaN marks points outside U (excluded mass).
    auto terms = [&](const Point& x) -> std::array<double, 4> {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (!sys.in_U(x)) return {nan, nan, nan, nan};
        try {
            return {std::max(0.0, std::log(spectral_norm(sys.jacobian(x)))), std::abs(std::log(d0(sys.domain, x))),
                    std::abs(std::log(profile.rho_sublevel(x))), std::log(static_cast<double>(profile.tankage(x)))};
        } catch (const DomainError&) {
            return {nan, nan, nan, nan};
        }
    };
    IntegrateOptions o = options;
    if (o.breakpoints.empty()) o.breakpoints = sys.breakpoints;
    const char* names[4] = {"log+|Df|", "|log d0|", "|log rho_b|", "log N_b"};
    bool pass = true;
    for (int k = 0; k < 4; ++k) {
        auto phi = [&, k](const Point& x) {
            const double v = terms(x)[static_cast<std::size_t>(k)];
            return std::isnan(v) ? 0.0 : v;
        };
        Estimate e = integrate(mu, phi, o);
        if (e.diverged || !std::isfinite(e.value)) {
            pass = false;
            if (rep.failed_component.empty()) rep.failed_component = names[k];
        }
        rep.components.push_back({names[k], e});
    }
    rep.max_integral = integrate(mu, [&](const Point& x) {
        const auto t = terms(x);
        if (std::isnan(t[0])) return 0.0;
        return std::max(std::max(t[0], t[1]), std::max(t[2], t[3]));
    }, o);
    if (rep.max_integral.diverged || !std::isfinite(rep.max_integral.value)) {
        pass = false;
        if (rep.failed_component.empty()) rep.failed_component = "max";
    }
    IntegrateOptions oe = o;
    oe.check_divergence = false;
    rep.excluded_mass = integrate(mu, [&](const Point& x) { return std::isnan(terms(x)[0]) ? 1.0 : 0.0; }, oe).value;
    rep.pass = pass;
    return rep;
}

BranchCoverage d0_branch_coverage(const InvariantMeasure& mu, const ChartDomain& domain, std::size_t n,
                                  std::uint64_t seed) {
    BranchCoverage out;
    const auto pts = mu.sample(n, seed, "d0-branch");
    std::size_t inf = 0;
    for (const auto& p : pts) {
        if (!domain.contains(p)) continue;
        ++out.samples;
        if (d0_detail(domain, p).branch == D0Branch::infinity) ++inf;
    }
    out.infinity_fraction = out.samples ? static_cast<double>(inf) / static_cast<double>(out.samples) : 0.0;
    return out;
}

} // namespace ruelle
