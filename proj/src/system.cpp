#include "ruelle/system.hpp"

#include "ruelle/errors.hpp"
#include "ruelle/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace ruelle {

void DistortionParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("distortion: alpha must lie in (0,1)");
    if (!(C > 1.0)) throw ArgumentError("distortion: C must exceed 1");
    if (!(a > 1.0)) throw ArgumentError("distortion: a must exceed 1");
}

namespace {

// Uniform in (0,1), a pure function of x's bit pattern.
double hash_unit(double x) {
    const std::uint64_t h = splitmix64(std::bit_cast<std::uint64_t>(x));
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Slope-2 piecewise affine maps lose one mantissa bit per step in floating
// point and reach 0 after ~53 steps. Orbits are kept on the grid 2^-53 Z:
// the map acts exactly on k = x 2^53 and a hash-derived bit fills the
// vacated low position, so the result is a 2^-53 pseudo-orbit.
constexpr std::int64_t kGrid = std::int64_t{1} << 53;

std::int64_t grid_index(double x) { return std::clamp<std::int64_t>(std::llround(std::ldexp(x, 53)), 0, kGrid); }
std::int64_t hash_bit(double x) { return static_cast<std::int64_t>(splitmix64(std::bit_cast<std::uint64_t>(x)) >> 63); }

double from_grid(std::int64_t k) { return std::ldexp(static_cast<double>(std::clamp<std::int64_t>(k, 1, kGrid - 1)), -53); }

double doubling_step(double x) { return from_grid(((2 * grid_index(x)) % kGrid) | hash_bit(x)); }

double tent_step(double x) {
    const std::int64_t k = grid_index(x);
    return from_grid(2 * k < kGrid ? 2 * k + hash_bit(x) : 2 * (kGrid - k) - hash_bit(x));
}

Mat scalar_mat(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return m;
}

bool near_any(double x, std::initializer_list<double> marks, double h) {
    for (double m : marks) {
        if (std::abs(x - m) < h) return true;
    }
    return false;
}

// Branches of the Gauss map resolved explicitly by quadrature.
constexpr int kBranchCount = 2000;

ChartDomain unit_interval() { return ChartDomain::interval(0.0, 1.0, 0.5); }

SmoothSystem doubling() {
    SmoothSystem s{"doubling", unit_interval(), {}, {}, {}, {}, {0.9, 1.5, 1.1}, {}};
    s.map = [](const Point& x) {
        return point1(doubling_step(x[0]));
    };
    s.jacobian = [](const Point&) { return scalar_mat(2.0); };
    s.near_singular = [](const Point& x, double h) { return near_any(x[0], {0.0, 0.5, 1.0}, h); };
    s.breakpoints = {0.5};
    return s;
}

SmoothSystem tent() {
    SmoothSystem s{"tent", unit_interval(), {}, {}, {}, {}, {0.9, 1.5, 1.1}, {}};
    s.map = [](const Point& x) {
        return point1(tent_step(x[0]));
    };
    s.jacobian = [](const Point& x) { return scalar_mat(x[0] < 0.5 ? 2.0 : -2.0); };
    s.near_singular = [](const Point& x, double h) { return near_any(x[0], {0.0, 0.5, 1.0}, h); };
    s.breakpoints = {0.5};
    return s;
}

// Distortion constants: over |y - x| <= d0(x)^2 the sampled quotient peaks at
// 0.75 of the bound with C = 8; C = 4 is exceeded.
SmoothSystem gauss() {
    SmoothSystem s{"gauss", unit_interval(), {}, {}, {}, {}, {0.5, 8.0, 2.0}, {}};
    s.map = [](const Point& x) {
        const double r = 1.0 / x[0];
        return point1(r - std::floor(r));
    };
    s.jacobian = [](const Point& x) { return scalar_mat(-1.0 / (x[0] * x[0])); };
    s.near_singular = [](const Point& x, double h) {
        if (x[0] < 10.0 * h || x[0] > 1.0 - h) return true;
        const double k = std::round(1.0 / x[0]);
        return near_any(x[0], {1.0 / (k - 1.0), 1.0 / k, 1.0 / (k + 1.0)}, h);
    };
    for (int k = kBranchCount; k >= 2; --k) s.breakpoints.push_back(1.0 / k);
    return s;
}

SmoothSystem logistic4() {
    SmoothSystem s{"logistic4", unit_interval(), {}, {}, {}, {}, {0.5, 8.0, 1.1}, {}};
    s.map = [](const Point& x) {
        double y = 4.0 * x[0] * (1.0 - x[0]);
        // 4x(1-x) rounds to 1 within ~4e-9 of 1/2; the next step would land
        // on the fixed point 0.
        if (y >= 1.0) y = 1.0 - hash_unit(x[0]) * 0x1.0p-40;
        return point1(y);
    };
    s.jacobian = [](const Point& x) { return scalar_mat(4.0 - 8.0 * x[0]); };
    s.near_singular = [](const Point& x, double h) { return near_any(x[0], {0.0, 1.0}, h); };
    return s;
}

// Gauss map conjugated by x -> 1/x onto (1, ∞): F(y) = 1/frac(y).
SmoothSystem gauss_noncompact() {
    SmoothSystem s{"gauss_noncompact", ChartDomain::interval(1.0, kInf, 2.0), {}, {}, {}, {}, {0.5, 8.0, 2.0}, {}};
    s.map = [](const Point& y) {
        const double fr = y[0] - std::floor(y[0]);
        return point1(1.0 / fr);
    };
    s.jacobian = [](const Point& y) {
        const double fr = y[0] - std::floor(y[0]);
        return scalar_mat(-1.0 / (fr * fr));
    };
    s.in_open_set = [dom = s.domain](const Point& y) {
        return dom.contains(y) && y[0] != std::floor(y[0]);
    };
    s.near_singular = [](const Point& y, double h) {
        return std::abs(y[0] - std::round(y[0])) < h * std::max(1.0, y[0] * y[0]);
    };
    for (int k = 2; k <= kBranchCount; ++k) s.breakpoints.push_back(k);
    return s;
}

SmoothSystem doubling2d() {
    Vec lo = Vec::Zero(2), hi = Vec::Ones(2);
    SmoothSystem s{"doubling2d", ChartDomain::box(lo, hi, point2(0.5, 0.5)), {}, {}, {}, {}, {0.9, 1.5, 1.1}, {}};
    s.map = [](const Point& x) {
        Point y(2);
        y[0] = doubling_step(x[0]);
        // Distinct hash input so the two coordinates get independent bits.
        y[1] = from_grid(((2 * grid_index(x[1])) % kGrid) | hash_bit(x[1] + x[0]));
        return y;
    };
    s.jacobian = [](const Point&) {
        Mat m = Mat::Zero(2, 2);
        m(0, 0) = m(1, 1) = 2.0;
        return m;
    };
    s.near_singular = [](const Point& x, double h) {
        return near_any(x[0], {0.0, 0.5, 1.0}, h) || near_any(x[1], {0.0, 0.5, 1.0}, h);
    };
    return s;
}

SmoothSystem identity(int dim) {
    Vec lo = Vec::Zero(dim), hi = Vec::Ones(dim);
    ChartDomain dom = dim == 1 ? unit_interval() : ChartDomain::box(lo, hi, Vec::Constant(dim, 0.5));
    SmoothSystem s{"identity", dom, {}, {}, {}, {}, {0.5, 2.0, 2.0}, {}};
    s.map = [](const Point& x) { return x; };
    s.jacobian = [dim](const Point&) { return Mat(Mat::Identity(dim, dim)); };
    return s;
}

SmoothSystem linear(const Mat& A) {
    const int d = static_cast<int>(A.rows());
    if (A.cols() != d || d < 1 || d > kMaxDim) throw ArgumentError("linear system needs a square matrix, d <= 8");
    SmoothSystem s{"linear", ChartDomain::euclidean_space(d, Vec::Zero(d)), {}, {}, {}, {}, {0.5, 2.0, 2.0}, {}};
    s.map = [A](const Point& x) { return Point(A * x); };
    s.jacobian = [A](const Point&) { return A; };
    return s;
}

Mat matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.size();
    if (rows == 0 || rows > static_cast<std::size_t>(kMaxDim)) throw ArgumentError("matrix must have 1..8 rows");
    Mat A(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != rows) throw ArgumentError("matrix must be square");
        for (std::size_t c = 0; c < rows; ++c) A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
    return A;
}

double poly(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

double poly_derivative(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) v = v * x + static_cast<double>(k) * c[k];
    return v;
}

} // namespace

std::vector<std::string> builtin_system_names() {
    return {"doubling", "tent", "gauss", "logistic4", "gauss_noncompact", "doubling2d", "identity", "linear"};
}

SmoothSystem make_system(const std::string& name) { return make_system(name, nlohmann::json::object()); }

SmoothSystem make_system(const std::string& name, const nlohmann::json& params) {
    SmoothSystem s = [&]() -> SmoothSystem {
        if (name == "doubling") return doubling();
        if (name == "tent") return tent();
        if (name == "gauss") return gauss();
        if (name == "logistic4") return logistic4();
        if (name == "gauss_noncompact") return gauss_noncompact();
        if (name == "doubling2d") return doubling2d();
        if (name == "identity") return identity(params.value("dim", 1));
        if (name == "linear") {
            if (!params.contains("matrix")) throw ArgumentError("linear system requires params.matrix");
            return linear(matrix_from_json(params.at("matrix")));
        }
        throw ArgumentError("unknown system: " + name);
    }();
    if (params.contains("distortion")) {
        const auto& d = params.at("distortion");
        s.distortion = {d.value("alpha", s.distortion.alpha), d.value("C", s.distortion.C), d.value("a", s.distortion.a)};
    }
    return s;
}

SmoothSystem system_from_config(const nlohmann::json& config) {
    const std::string kind = config.value("kind", std::string("builtin"));
    if (kind == "builtin") return make_system(config.at("name").get<std::string>(), config.value("params", nlohmann::json::object()));
    if (kind == "linear") return make_system("linear", config);
    if (kind != "rational") throw ArgumentError("unknown system kind: " + kind);

    const auto num = config.at("numerator").get<std::vector<double>>();
    const auto den = config.value("denominator", std::vector<double>{1.0});
    const auto dom = config.at("domain").get<std::vector<double>>();
    if (dom.size() != 2) throw ArgumentError("rational system: domain must be [lo, hi]");
    const double lo = dom[0], hi = dom[1];
    const double ref = config.value("reference", std::isfinite(hi) ? 0.5 * (lo + hi) : lo + 1.0);
    const bool wrap = config.value("wrap", false);

    SmoothSystem s{config.value("name", std::string("rational")), ChartDomain::interval(lo, hi, ref), {}, {}, {}, {}, {}, {}};
    s.map = [num, den, wrap](const Point& x) {
        const double v = poly(num, x[0]) / poly(den, x[0]);
        return point1(wrap ? v - std::floor(v) : v);
    };
    s.jacobian = [num, den](const Point& x) {
        const double p = poly(num, x[0]), q = poly(den, x[0]);
        return scalar_mat((poly_derivative(num, x[0]) * q - p * poly_derivative(den, x[0])) / (q * q));
    };
    if (config.contains("distortion")) {
        const auto& d = config.at("distortion");
        s.distortion = {d.value("alpha", 0.5), d.value("C", 2.0), d.value("a", 2.0)};
    }
    return s;
}

double spectral_norm(const Mat& A) {
    if (A.rows() == 1) return std::abs(A(0, 0));
    Eigen::JacobiSVD<Mat> svd(A);
    return svd.singularValues()(0);
}

Point iterate(const SmoothSystem& sys, const Point& x, int m) {
    if (m < 0) throw ArgumentError("iterate: m must be >= 0");
    if (!sys.in_U(x)) throw EscapeError(0, x);
    Point y = x;
    for (int j = 0; j < m; ++j) {
        y = sys.map(y);
        const bool ok = sys.domain.contains(y) && (j + 1 == m || sys.in_U(y));
        if (!ok) throw EscapeError(j + 1, y);
    }
    return y;
}

std::vector<Point> orbit(const SmoothSystem& sys, const Point& x, int m) {
    if (m < 0) throw ArgumentError("orbit: m must be >= 0");
    if (!sys.in_U(x)) throw EscapeError(0, x);
    std::vector<Point> out{x};
    out.reserve(static_cast<std::size_t>(m) + 1);
    for (int j = 0; j < m; ++j) {
        Point y = sys.map(out.back());
        if (!sys.domain.contains(y) || (j + 1 < m && !sys.in_U(y))) throw EscapeError(j + 1, y);
        out.push_back(std::move(y));
    }
    return out;
}

CocycleNorms cocycle_jacobian_norms(const SmoothSystem& sys, const Point& x, int m) {
    const auto pts = orbit(sys, x, m);
    CocycleNorms out;
    for (int j = 0; j < m; ++j) {
        const double n = spectral_norm(sys.jacobian(pts[static_cast<std::size_t>(j)]));
        out.norms.push_back(n);
        out.log_starred_product += std::log(std::max(n, 1.0));
    }
    out.starred_product = std::exp(out.log_starred_product);
    return out;
}

double exterior_norm(const Mat& A) {
    Eigen::VectorXd sv;
    if (A.rows() == 1) {
        sv = Eigen::VectorXd::Constant(1, std::abs(A(0, 0)));
    } else {
        Eigen::JacobiSVD<Mat> svd(A);
        sv = svd.singularValues();
    }
    double best = sv(0), prod = 1.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        prod *= sv(k);
        best = std::max(best, prod);
    }
    return best;
}

namespace {

// Index subsets of {0..d-1} with κ elements, lexicographic.
std::vector<std::vector<int>> subsets(int d, int kappa) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(kappa));
    std::iota(cur.begin(), cur.end(), 0);
    if (kappa == 0 || kappa > d) return out;
    for (;;) {
        out.push_back(cur);
        int i = kappa - 1;
        while (i >= 0 && cur[static_cast<std::size_t>(i)] == d - kappa + i) --i;
        if (i < 0) break;
        ++cur[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < kappa; ++k) cur[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k - 1)] + 1;
    }
    return out;
}

} // namespace

Eigen::MatrixXd compound_matrix(const Eigen::MatrixXd& A, int kappa) {
    const int d = static_cast<int>(A.rows());
    if (kappa < 1 || kappa > d) throw ArgumentError("compound_matrix: kappa out of range");
    const auto sets = subsets(d, kappa);
    const auto n = static_cast<Eigen::Index>(sets.size());
    Eigen::MatrixXd out(n, n);
    Eigen::MatrixXd minor(kappa, kappa);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            for (int i = 0; i < kappa; ++i) {
                for (int j = 0; j < kappa; ++j) {
                    minor(i, j) = A(sets[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)],
                                    sets[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)]);
                }
            }
            out(r, c) = kappa == 1 ? minor(0, 0) : minor.determinant();
        }
    }
    return out;
}

double exterior_norm_growth(const SmoothSystem& sys, const Point& x, int m) {
    if (m < 1) throw ArgumentError("exterior_norm_growth: m must be >= 1");
    const auto pts = orbit(sys, x, m);
    const int d = sys.dim();
    if (d == 1) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += std::log(std::abs(sys.jacobian(pts[static_cast<std::size_t>(j)])(0, 0)));
        return s;
    }
    std::vector<Eigen::MatrixXd> jac;
    for (int j = 0; j < m; ++j) jac.emplace_back(sys.jacobian(pts[static_cast<std::size_t>(j)]));
    double best = kMinusInfinity;
    for (int kappa = 1; kappa <= d; ++kappa) {
        Eigen::MatrixXd acc;
        double log_scale = 0.0;
        bool degenerate = false;
        for (int j = 0; j < m; ++j) {
            const Eigen::MatrixXd ck = compound_matrix(jac[static_cast<std::size_t>(j)], kappa);
            acc = j == 0 ? ck : Eigen::MatrixXd(ck * acc);
            const double s = acc.norm();
            if (!(s > 0.0)) {
                degenerate = true;
                break;
            }
            acc /= s;
            log_scale += std::log(s);
        }
        if (degenerate) continue;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(acc);
        best = std::max(best, log_scale + std::log(svd.singularValues()(0)));
    }
    return best;
}

namespace {

double draw_axis(const ChartDomain& dom, int i, CounterRng& rng) {
    const double lo = dom.lower()[i], hi = dom.upper()[i], u = rng.uniform();
    if (std::isfinite(lo) && std::isfinite(hi)) return lo + (hi - lo) * u;
    if (std::isfinite(lo)) return lo + (1.0 / u - 1.0);
    if (std::isfinite(hi)) return hi - (1.0 / u - 1.0);
    return std::tan(3.14159265358979323846 * (u - 0.5));
}

// A base point, either uniform or log-spaced toward a face or infinity.
Point draw_base(const ChartDomain& dom, const DistortionPlan& plan, CounterRng& rng) {
    const int d = dom.dim();
    Point x(d);
    for (int i = 0; i < d; ++i) x[i] = draw_axis(dom, i, rng);
    if (rng.uniform() >= plan.boundary_fraction) return x;
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
    const bool upper = rng.uniform() < 0.5;
    const double end = upper ? dom.upper()[i] : dom.lower()[i];
    const double u = rng.uniform();
    if (std::isfinite(end)) {
        const double span = std::isfinite(dom.upper()[i] - dom.lower()[i]) ? dom.upper()[i] - dom.lower()[i] : 1.0;
        const double gap = std::min(1.0, span) * std::pow(10.0, -plan.decades * u);
        x[i] = upper ? end - gap : end + gap;
    } else {
        const double far = std::pow(10.0, 0.5 * plan.decades * u);
        x[i] = dom.reference()[i] + (upper ? far : -far);
    }
    return x;
}

} // namespace

DistortionReport check_distortion_A(const SmoothSystem& sys, const DistortionParams& params,
                                    const DistortionPlan& plan) {
    params.validate();
    struct Slot {
        double ratio = -1.0;
        Point x, y;
        bool skipped = true;
    };
    std::vector<Slot> slots(plan.samples);
    const int d = sys.dim();
    parallel_for(plan.exec, plan.samples, [&](std::size_t k) {
        CounterRng rng(stream(plan.seed, "distortion", k));
        const Point x = draw_base(sys.domain, plan, rng);
        if (!sys.in_U(x)) return;
        const double bd = sys.domain.boundary_distance(x);
        const double r = std::min(1.0, std::isfinite(bd) ? std::pow(bd, params.a) : 1.0);
        if (!(r > 0.0)) return;
        Vec w(d);
        for (int i = 0; i < d; ++i) w[i] = rng.normal();
        const double rad = r * std::pow(rng.uniform(), 1.0 / d);
        const Point y = x + rad * w / w.norm();
        if (!sys.in_U(y) || (y - x).norm() == 0.0) return;
        const double nx = spectral_norm(sys.jacobian(x));
        const double ny = spectral_norm(sys.jacobian(y));
        const double q = std::abs(nx - ny) / std::pow((y - x).norm(), params.alpha);
        const double bound = params.C * std::pow(d0(sys.domain, x), -params.a);
        slots[k] = {q / bound, x, y, false};
    });
    DistortionReport out;
    out.witness_x = sys.domain.reference();
    out.witness_y = sys.domain.reference();
    for (const Slot& s : slots) {
        if (s.skipped || !std::isfinite(s.ratio)) {
            ++out.skipped;
            continue;
        }
        ++out.evaluated;
        if (s.ratio > out.max_ratio) {
            out.max_ratio = s.ratio;
            out.witness_x = s.x;
            out.witness_y = s.y;
        }
    }
    out.passes = out.max_ratio <= 1.0;
    return out;
}

JacobianCheck check_jacobian(const SmoothSystem& sys, std::size_t points, std::uint64_t seed) {
    JacobianCheck out;
    const int d = sys.dim();
    CounterRng rng(stream(seed, "jacobian-check"));
    for (std::size_t k = 0, tries = 0; k < points && tries < 100 * points; ++tries) {
        Point x(d);
        for (int i = 0; i < d; ++i) x[i] = draw_axis(sys.domain, i, rng);
        double h = 0.0;
        for (int i = 0; i < d; ++i) h = std::max(h, 1e-7 * std::max(1e-2, std::abs(x[i])));
        if (!sys.in_U(x)) continue;
        if (sys.near_singular && sys.near_singular(x, 10.0 * h)) continue;
        bool ok = true;
        Mat fd(d, d);
        for (int c = 0; c < d && ok; ++c) {
            const double hc = 1e-7 * std::max(1e-2, std::abs(x[c]));
            Point xp = x, xm = x;
            xp[c] += hc;
            xm[c] -= hc;
            if (!sys.in_U(xp) || !sys.in_U(xm)) {
                ok = false;
                break;
            }
            fd.col(c) = (sys.map(xp) - sys.map(xm)) / (2.0 * hc);
        }
        if (!ok) continue;
        const Mat J = sys.jacobian(x);
        const double err = (fd - J).norm() / std::max(J.norm(), 1.0);
        if (err > out.max_relative_error) {
            out.max_relative_error = err;
            out.worst = x;
        }
        ++out.checked;
        ++k;
    }
    return out;
}

} // namespace ruelle
