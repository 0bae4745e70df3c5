#include "ruelle/partition.hpp"

#include "ruelle/errors.hpp"
#include "ruelle/rng.hpp"

#include <algorithm>
#include <numbers>
#include <cmath>
#include <sstream>

namespace ruelle {

namespace {

// Cubes are closed with this relative slack so that net coverage (checked
// with euclidean norms) always implies cube membership despite rounding.
constexpr double kCubeSlack = 1e-12;

double ceil_log2_positive(double v) { return std::max(0.0, std::ceil(v)); }

const ChartDomain& flat_chart(int d) {
    static const std::vector<ChartDomain> charts = [] {
        std::vector<ChartDomain> v;
        for (int k = 1; k <= 8; ++k) v.push_back(ChartDomain::euclidean_space(k, Point::Zero(k)));
        return v;
    }();
    return charts.at(static_cast<std::size_t>(d - 1));
}

} // namespace

LevelParams LevelParams::from(const DistortionParams& dp, int m, int n, int l1, int l, double b, int s_max) {
    LevelParams p;
    p.m = m;
    p.n = n;
    p.l1 = l1;
    p.l = l;
    p.b = b;
    p.alpha = dp.alpha;
    p.C = dp.C;
    p.a = dp.a;
    p.s_max = s_max;
    return p;
}

LevelProducts level_products(const SmoothSystem& sys, const RegularityProfile& profile, const Point& x, int m) {
    if (m < 1) throw ArgumentError("level_products: m must be >= 1");
    const auto pts = orbit(sys, x, m);
    LevelProducts p;
    for (int j = 0; j < m; ++j) {
        const Point& y = pts[static_cast<std::size_t>(j)];
        p.log2_df += std::log2(std::max(spectral_norm(sys.jacobian(y)), 1.0));
        p.log2_dstar += std::log2(d_star(sys.domain, y));
        p.log2_rho += std::log2(profile.rho_sublevel(y));
        p.log2_tank += std::log2(static_cast<double>(profile.tankage(y)));
    }
    return p;
}

int level_from_products(const LevelProducts& p) {
    const double s = std::max({ceil_log2_positive(p.log2_df), ceil_log2_positive(-p.log2_dstar),
                               ceil_log2_positive(-p.log2_rho), ceil_log2_positive(p.log2_tank)});
    if (!std::isfinite(s) || s > 1e9) throw DomainError("level_of: non-finite orbit products");
    return static_cast<int>(s);
}

int level_of(const SmoothSystem& sys, const RegularityProfile& profile, const Point& x, int m) {
    return level_from_products(level_products(sys, profile, x, m));
}

L1Check check_l1(int l1, int m, double alpha, double C, double a, int d, int n_check) {
    L1Check out;
    if (!(l1 > a)) return {false, 1, 0};
    const double gap = static_cast<double>(l1 - 2 * m);
    const double half_log2_d = 0.5 * std::log2(static_cast<double>(d));
    for (int n = 1; n <= n_check; ++n) {
        // 2^{-n gap} < 2^{-(n + 1 + log2 √d)}
        if (!(-n * gap < -(n + 1 + half_log2_d))) return {false, 2, n};
    }
    const double rhs = std::log2(std::exp2(1.0 / m) - 1.0);
    for (int n = 1; n <= n_check; ++n) {
        if (!(std::log2(C) - alpha * n * gap + a * n < rhs)) return {false, 3, n};
    }
    return out;
}

std::optional<int> minimal_l1(int m, double alpha, double C, double a, int d, int n_check, int l1_max) {
    for (int l1 = 1; l1 <= l1_max; ++l1) {
        if (check_l1(l1, m, alpha, C, a, d, n_check).ok) return l1;
    }
    return std::nullopt;
}

bool check_l(int l, int m, int L, double alpha, double C, double a) {
    const double t = static_cast<double>(l - 2 - m * (L + 1));
    const double inv_m = 1.0 / m;
    const double first = std::min(1.0 - std::exp2(-inv_m), std::exp2(-1.0 - inv_m));
    if (!(-t < std::log2(first) - L)) return false;
    return -alpha * t + std::log2(C) + a * L < std::log2(std::exp2(inv_m) - 1.0);
}

std::optional<int> minimal_l(int m, int L, double alpha, double C, double a, int l_max) {
    for (int l = 0; l <= l_max; ++l) {
        if (check_l(l, m, L, alpha, C, a)) return l;
    }
    return std::nullopt;
}

double epsilon_s(int s, int l1, int d) { return std::ldexp(1.0 / std::sqrt(static_cast<double>(d)), -s * l1); }

PartitionConstants partition_constants(double b, int d, std::optional<double> c01, std::optional<double> c) {
    PartitionConstants k;
    const double sd = std::sqrt(static_cast<double>(d));
    k.C01 = c01.value_or(default_c01(b, d));
    k.C0 = k.C01 * std::pow(std::ceil(4.0 * sd), d);
    k.C2 = k.C0 * std::pow(std::ceil(4.0 * b * sd) + 2.0, d);
    k.c = c.value_or(std::pow(4.0, d) * std::pow(sd, d));
    k.overlap = std::pow(4.0 * std::ceil(b * d), d);
    k.C3 = k.c * b * b * std::pow(std::ceil(4.0 * sd) + 2.0, d) * k.overlap;
    return k;
}

double log2_cell_bound(const PartitionConstants& k, int s, int l1, int l, int d) {
    return std::log2(k.C0) + static_cast<double>(s) * (1.0 + static_cast<double>(l1) * d) + static_cast<double>(l) * d;
}

// ---------------------------------------------------------------------------
// Symbols

Symbol Symbol::cell(int level, std::uint64_t net, std::uint64_t sub) {
    return {(static_cast<std::uint64_t>(level) << 40) | net, sub};
}

std::string Symbol::str() const {
    if (hi == kSpecial) {
        switch (lo) {
        case 1: return "truncation";
        case 2: return "uncovered";
        case 3: return "escape";
        default: return "special:" + std::to_string(lo);
        }
    }
    if (hi == 0) return "tag:" + std::to_string(lo);
    std::ostringstream os;
    os << "(" << level() << "," << net() << "," << sub() << ")";
    return os.str();
}

std::size_t SymbolHash::operator()(const Symbol& s) const noexcept {
    return static_cast<std::size_t>(splitmix64(s.hi ^ splitmix64(s.lo)));
}

Symbol parent_symbol(const Symbol& s, int l, int d) {
    if (s.is_special() || l < 1) return s;
    const std::uint64_t side = std::uint64_t{1} << l;
    std::uint64_t rem = s.lo, parent = 0, mult = 1;
    const std::uint64_t half = side >> 1;
    for (int i = 0; i < d; ++i) {
        const std::uint64_t q = rem % side;
        rem /= side;
        parent += (q >> 1) * mult;
        mult *= half;
    }
    return {s.hi, parent};
}

// ---------------------------------------------------------------------------
// AdaptivePartition

const PartitionLevel* AdaptivePartition::level(int s) const {
    if (s < params_.n || s > params_.s_max) return nullptr;
    return &levels_[static_cast<std::size_t>(s - params_.n)];
}

std::size_t AdaptivePartition::cell_count() const {
    std::size_t c = 0;
    for (const auto& lv : levels_) c += lv.occupied_cells;
    return c;
}

int AdaptivePartition::clipped_level(const SmoothSystem& sys, const RegularityProfile& profile,
                                     const Point& x) const {
    try {
        const int s = std::max(level_of(sys, profile, x, params_.m), params_.n);
        return s > params_.s_max ? params_.s_max + 1 : s;
    } catch (const EscapeError&) {
        return -1;
    } catch (const DomainError&) {
        return -1;
    }
}

namespace {

// Index of the first subcube (per axis) of [-eps, eps] split into 2^l
// pieces whose closed interval contains the offset delta.
std::uint64_t first_subcube(double delta, double eps, int l) {
    const std::int64_t side = std::int64_t{1} << l;
    const double h = eps / static_cast<double>(side);
    const double w = (delta / eps + 1.0) * static_cast<double>(side);
    std::int64_t q = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(0.5 * w)) - 1);
    q = std::min(q, side - 1);
    for (std::int64_t c = std::max<std::int64_t>(0, q - 1); c <= std::min(side - 1, q + 1); ++c) {
        const double centre = static_cast<double>(2 * c + 1 - side) * h;
        if (std::abs(delta - centre) <= h) return static_cast<std::uint64_t>(c);
    }
    return static_cast<std::uint64_t>(q);
}

bool in_cube(const Point& x, const Point& a, double eps) {
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (!(std::abs(x[k] - a[k]) <= eps)) return false;
    }
    return true;
}

} // namespace

Symbol AdaptivePartition::locate_at(const Point& x, int s) const {
    if (s < 0) return Symbol::escape();
    if (s > params_.s_max) return Symbol::truncation();
    const PartitionLevel* lv = level(s);
    if (lv == nullptr || lv->anchors.empty()) return Symbol::uncovered();
    const double eps = lv->eps * (1.0 + kCubeSlack);
    auto it = std::lower_bound(lv->by_first.begin(), lv->by_first.end(), std::make_pair(x[0] - eps, std::uint32_t{0}));
    std::uint32_t best = UINT32_MAX;
    for (; it != lv->by_first.end() && it->first <= x[0] + eps; ++it) {
        if (it->second < best && in_cube(x, lv->anchors[it->second], eps)) best = it->second;
    }
    if (best == UINT32_MAX) return Symbol::uncovered();
    const Point& a = lv->anchors[best];
    const int l = params_.l;
    std::uint64_t sub = 0;
    if (l > 0) {
        const std::uint64_t side = std::uint64_t{1} << l;
        for (int k = 0; k < dim_; ++k) sub = sub * side + first_subcube(x[k] - a[k], eps, l);
    }
    return Symbol::cell(s, best, sub);
}

Symbol AdaptivePartition::locate(const SmoothSystem& sys, const RegularityProfile& profile, const Point& x) const {
    return locate_at(x, clipped_level(sys, profile, x));
}

Symbol AdaptivePartition::locate_brute_force(const Point& x, int s) const {
    if (s < 0) return Symbol::escape();
    if (s > params_.s_max) return Symbol::truncation();
    const PartitionLevel* lv = level(s);
    if (lv == nullptr) return Symbol::uncovered();
    for (std::size_t i = 0; i < lv->anchors.size(); ++i) {
        const BoxElement c = cube(s, i);
        if (!box_contains(flat_chart(dim_), c, x)) continue;
        const int l = params_.l;
        if (l == 0) return Symbol::cell(s, i, 0);
        const std::int64_t side = std::int64_t{1} << l;
        const double h = c.half_widths[0] / static_cast<double>(side);
        std::uint64_t sub = 0;
        for (int k = 0; k < dim_; ++k) {
            const double delta = x[k] - c.anchor[k];
            auto hit = [&](std::int64_t q) { return std::abs(delta - static_cast<double>(2 * q + 1 - side) * h) <= h; };
            std::int64_t found = -1;
            if (l <= 12) {
                for (std::int64_t q = 0; q < side && found < 0; ++q) {
                    if (hit(q)) found = q;
                }
            } else {
                // Smallest q whose upper face is at or above delta.
                std::int64_t lo = 0, hi = side - 1;
                while (lo < hi) {
                    const std::int64_t mid = (lo + hi) / 2;
                    if (delta <= static_cast<double>(2 * mid + 1 - side) * h + h) hi = mid;
                    else lo = mid + 1;
                }
                for (std::int64_t q = std::max<std::int64_t>(0, lo - 1); q <= std::min(side - 1, lo + 1) && found < 0; ++q) {
                    if (hit(q)) found = q;
                }
            }
            if (found < 0) return Symbol::uncovered();
            sub = sub * static_cast<std::uint64_t>(side) + static_cast<std::uint64_t>(found);
        }
        return Symbol::cell(s, i, sub);
    }
    return Symbol::uncovered();
}

BoxElement AdaptivePartition::cube(int s, std::uint64_t net) const {
    const PartitionLevel* lv = level(s);
    if (lv == nullptr || net >= lv->anchors.size()) throw ArgumentError("cube: no such anchor");
    return BoxElement::cube(lv->anchors[net], lv->eps * (1.0 + kCubeSlack), s, static_cast<std::int64_t>(net));
}

BoxElement AdaptivePartition::cell_box(const Symbol& sym) const {
    if (sym.is_special()) throw ArgumentError("cell_box: special symbol");
    BoxElement b = cube(sym.level(), sym.net());
    const int l = params_.l;
    if (l == 0) {
        b.cell_index = 0;
        return b;
    }
    const std::int64_t side = std::int64_t{1} << l;
    const double h = b.half_widths[0] / static_cast<double>(side);
    std::uint64_t rem = sym.sub();
    for (int k = dim_ - 1; k >= 0; --k) {
        const auto q = static_cast<std::int64_t>(rem % static_cast<std::uint64_t>(side));
        rem /= static_cast<std::uint64_t>(side);
        b.center_offset[k] = static_cast<double>(2 * q + 1 - side) * h;
    }
    b.half_widths = Vec::Constant(dim_, h);
    b.cell_index = static_cast<std::int64_t>(sym.sub());
    return b;
}

AdaptivePartition build_partition(const SmoothSystem& sys, const InvariantMeasure& mu,
                                  const RegularityProfile& profile, const LevelParams& params,
                                  const BuildOptions& options) {
    if (options.sample_budget < 1) throw ArgumentError("build_partition: sample_budget must be positive");
    auto samples = mu.sample(options.sample_budget, options.seed, "partition-build", options.exec);
    return build_partition_from_samples(sys, profile, params, std::move(samples), options);
}

AdaptivePartition build_partition_from_samples(const SmoothSystem& sys, const RegularityProfile& profile,
                                               const LevelParams& params, std::vector<Point> samples,
                                               const BuildOptions& options) {
    const int d = sys.dim();
    if (!sys.domain.euclidean()) throw ArgumentError("build_partition: custom metrics are not supported");
    if (params.m < 1 || params.n < 0 || params.l < 0 || params.s_max < params.n)
        throw ArgumentError("build_partition: need m >= 1, n >= 0, l >= 0, s_max >= n");
    if (params.l * d > 62) throw ArgumentError("build_partition: l * d must be <= 62");
    if (params.s_max * params.l1 > 1000) throw ArgumentError("build_partition: s_max * l1 must be <= 1000");
    if (options.require_admissible_l1) {
        const L1Check c = check_l1(params.l1, params.m, params.alpha, params.C, params.a, d);
        if (!c.ok)
            throw ArgumentError("build_partition: l1 = " + std::to_string(params.l1) + " violates constraint " +
                                std::to_string(c.violated));
    }
    if (samples.empty()) throw ArgumentError("build_partition: no samples");

    AdaptivePartition P;
    P.params_ = params;
    P.dim_ = d;
    P.samples_ = std::move(samples);
    const std::size_t N = P.samples_.size();
    P.sample_levels_.assign(N, 0);
    parallel_for(options.exec, N, [&](std::size_t i) { P.sample_levels_[i] = P.clipped_level(sys, profile, P.samples_[i]); });

    // Nets per level, built serially: greedy order matters.
    for (int s = params.n; s <= params.s_max; ++s) {
        PartitionLevel lv;
        lv.s = s;
        lv.eps = epsilon_s(s, params.l1, d);
        std::vector<Point> pts;
        for (std::size_t i = 0; i < N; ++i) {
            if (P.sample_levels_[i] == s) pts.push_back(P.samples_[i]);
        }
        lv.samples = pts.size();
        for (std::size_t k : separated_net_indices(pts, lv.eps, {}, options.order)) lv.anchors.push_back(pts[k]);
        for (std::size_t k = 0; k < lv.anchors.size(); ++k)
            lv.by_first.emplace_back(lv.anchors[k][0], static_cast<std::uint32_t>(k));
        std::sort(lv.by_first.begin(), lv.by_first.end());
        P.levels_.push_back(std::move(lv));
    }

    P.sample_symbols_.assign(N, Symbol{});
    parallel_for(options.exec, N, [&](std::size_t i) { P.sample_symbols_[i] = P.locate_at(P.samples_[i], P.sample_levels_[i]); });

    std::size_t trunc = 0, esc = 0;
    std::vector<std::vector<Symbol>> per_level(P.levels_.size());
    for (std::size_t i = 0; i < N; ++i) {
        const int s = P.sample_levels_[i];
        if (s < 0) ++esc;
        else if (s > params.s_max) ++trunc;
        else per_level[static_cast<std::size_t>(s - params.n)].push_back(P.sample_symbols_[i]);
    }
    for (std::size_t k = 0; k < per_level.size(); ++k) {
        auto& v = per_level[k];
        std::sort(v.begin(), v.end());
        P.levels_[k].occupied_cells = static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
    }
    P.truncation_mass_ = static_cast<double>(trunc) / static_cast<double>(N);
    P.escape_mass_ = static_cast<double>(esc) / static_cast<double>(N);
    return P;
}

// ---------------------------------------------------------------------------
// Entropy

namespace {

double plug_in_entropy(std::vector<Symbol> symbols) {
    if (symbols.empty()) return 0.0;
    std::sort(symbols.begin(), symbols.end());
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < symbols.size();) {
        std::size_t j = i;
        while (j < symbols.size() && symbols[j] == symbols[i]) ++j;
        counts.push_back(j - i);
        i = j;
    }
    std::sort(counts.begin(), counts.end());
    const double n = static_cast<double>(symbols.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

PartitionEntropy entropy_from(const AdaptivePartition& P, const PartitionConstants& k, const std::vector<int>& levels,
                              const std::vector<Symbol>& symbols) {
    if (symbols.empty()) throw DomainError("partition_entropy: no samples");
    const auto& pr = P.params();
    PartitionEntropy e;
    e.samples = symbols.size();
    e.H = plug_in_entropy(symbols);
    const double n = static_cast<double>(symbols.size());
    std::vector<std::size_t> per(static_cast<std::size_t>(pr.s_max - pr.n + 1), 0);
    std::size_t trunc = 0, esc = 0;
    for (int s : levels) {
        if (s < 0) ++esc;
        else if (s > pr.s_max) ++trunc;
        else ++per[static_cast<std::size_t>(s - pr.n)];
    }
    for (int s = pr.n; s <= pr.s_max; ++s) {
        const double mass = static_cast<double>(per[static_cast<std::size_t>(s - pr.n)]) / n;
        if (mass > 0.0) e.bound += mass * log2_cell_bound(k, s, pr.l1, pr.l, P.dim()) * std::numbers::ln2;
    }
    e.truncation_correction = -xlogx(static_cast<double>(trunc) / n) - xlogx(static_cast<double>(esc) / n);
    e.gap = e.bound + e.truncation_correction - e.H;
    e.within_bound = e.H <= e.bound + e.truncation_correction + 1e-12;
    return e;
}

} // namespace

PartitionEntropy partition_entropy(const AdaptivePartition& partition, const PartitionConstants& k) {
    return entropy_from(partition, k, partition.sample_levels(), partition.sample_symbols());
}

PartitionEntropy partition_entropy(const AdaptivePartition& partition, const PartitionConstants& k,
                                   const SmoothSystem& sys, const RegularityProfile& profile,
                                   const InvariantMeasure& mu, std::size_t sample_budget, std::uint64_t seed,
                                   const Exec& exec) {
    const auto pts = mu.sample(sample_budget, seed, "partition-entropy", exec);
    std::vector<int> levels(pts.size());
    std::vector<Symbol> syms(pts.size());
    parallel_for(exec, pts.size(), [&](std::size_t i) {
        levels[i] = partition.clipped_level(sys, profile, pts[i]);
        syms[i] = partition.locate_at(pts[i], levels[i]);
    });
    return entropy_from(partition, k, levels, syms);
}

// ---------------------------------------------------------------------------
// Diagnostics

PartitionDiagnostics diagnose_partition(const AdaptivePartition& P, const PartitionConstants& k,
                                        std::size_t max_points, const Exec& exec) {
    PartitionDiagnostics out;
    out.overlap_bound = k.overlap;
    const auto& pr = P.params();
    const int d = P.dim();
    const double sd = std::sqrt(static_cast<double>(d));

    for (const auto& lv : P.levels()) {
        LevelDiagnostics ld;
        ld.s = lv.s;
        ld.eps = lv.eps;
        ld.samples = lv.samples;
        ld.anchors = lv.anchors.size();
        ld.occupied_cells = lv.occupied_cells;
        ld.log2_cells = lv.occupied_cells ? std::log2(static_cast<double>(lv.occupied_cells)) : 0.0;
        ld.log2_bound = log2_cell_bound(k, lv.s, pr.l1, pr.l, d);
        ld.cell_bound_ok = ld.log2_cells <= ld.log2_bound;

        // Separation: pairs with first coordinates more than eps apart are
        // separated already.
        for (std::size_t a = 0; a < lv.by_first.size(); ++a) {
            for (std::size_t b = a + 1; b < lv.by_first.size() && lv.by_first[b].first - lv.by_first[a].first <= lv.eps; ++b) {
                if (!((lv.anchors[lv.by_first[a].second] - lv.anchors[lv.by_first[b].second]).norm() > lv.eps))
                    ++ld.separation_violations;
            }
        }
        // Coverage and overlap over the level's samples.
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < P.samples().size(); ++i) {
            if (P.sample_levels()[i] == lv.s) idx.push_back(i);
        }
        std::vector<std::size_t> overlap(idx.size(), 0);
        std::vector<char> covered(idx.size(), 0);
        const double reach = lv.eps + sd * lv.eps;
        parallel_for(exec, idx.size(), [&](std::size_t t) {
            const Point& z = P.samples()[idx[t]];
            auto it = std::lower_bound(lv.by_first.begin(), lv.by_first.end(), std::make_pair(z[0] - reach, std::uint32_t{0}));
            std::size_t count = 0;
            bool cov = false;
            for (; it != lv.by_first.end() && it->first <= z[0] + reach; ++it) {
                const Point& a = lv.anchors[it->second];
                if ((a - z).norm() <= lv.eps) cov = true;
                // Distance from z to the cube around a.
                double dist2 = 0.0;
                for (int c = 0; c < d; ++c) {
                    const double g = std::max(0.0, std::abs(z[c] - a[c]) - lv.eps);
                    dist2 += g * g;
                }
                if (std::sqrt(dist2) <= sd * lv.eps) ++count;
            }
            overlap[t] = count;
            covered[t] = cov ? 1 : 0;
        });
        for (std::size_t t = 0; t < idx.size(); ++t) {
            ld.max_overlap = std::max(ld.max_overlap, overlap[t]);
            if (!covered[t]) ++ld.coverage_violations;
            if (static_cast<double>(overlap[t]) > k.overlap) ++out.overlap_violations;
        }
        if (!ld.cell_bound_ok || ld.separation_violations || ld.coverage_violations) out.ok = false;
        out.levels.push_back(ld);
    }

    // Locate vs brute-force scan on an evenly strided subset.
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < P.samples().size(); ++i) {
        const int s = P.sample_levels()[i];
        if (s >= pr.n && s <= pr.s_max) eligible.push_back(i);
    }
    const std::size_t stride = std::max<std::size_t>(1, eligible.size() / std::max<std::size_t>(1, max_points));
    std::vector<std::size_t> picks;
    for (std::size_t t = 0; t < eligible.size() && picks.size() < max_points; t += stride) picks.push_back(eligible[t]);
    std::vector<char> mismatch(picks.size(), 0), uncontained(picks.size(), 0);
    parallel_for(exec, picks.size(), [&](std::size_t t) {
        const std::size_t i = picks[t];
        const Point& x = P.samples()[i];
        const int s = P.sample_levels()[i];
        const Symbol fast = P.locate_at(x, s);
        const Symbol slow = P.locate_brute_force(x, s);
        mismatch[t] = fast != slow;
        uncontained[t] = fast.is_special() || !box_contains(flat_chart(d), P.cell_box(fast), x);
    });
    out.checked_points = picks.size();
    for (std::size_t t = 0; t < picks.size(); ++t) {
        out.locate_mismatches += static_cast<std::size_t>(mismatch[t]);
        out.containment_failures += static_cast<std::size_t>(uncontained[t]);
    }
    if (out.locate_mismatches || out.containment_failures || out.overlap_violations) out.ok = false;
    return out;
}

nlohmann::json partition_to_json(const AdaptivePartition& P, const PartitionEntropy& e, const PartitionDiagnostics& dg,
                                 bool include_anchors) {
    const auto& p = P.params();
    nlohmann::json j;
    j["params"] = {{"m", p.m}, {"n", p.n}, {"l1", p.l1}, {"l", p.l}, {"b", p.b},
                   {"alpha", p.alpha}, {"C", p.C}, {"a", p.a}, {"s_max", p.s_max}};
    j["dim"] = P.dim();
    j["samples"] = P.samples().size();
    j["truncation_mass"] = P.truncation_mass();
    j["escape_mass"] = P.escape_mass();
    j["cell_count"] = P.cell_count();
    nlohmann::json levels = nlohmann::json::array();
    for (std::size_t k = 0; k < P.levels().size(); ++k) {
        const auto& lv = P.levels()[k];
        if (lv.samples == 0) continue;
        nlohmann::json jl = {{"s", lv.s}, {"eps", lv.eps}, {"samples", lv.samples}, {"anchors", lv.anchors.size()},
                             {"occupied_cells", lv.occupied_cells}};
        for (const auto& ld : dg.levels) {
            if (ld.s != lv.s) continue;
            jl["log2_cells"] = ld.log2_cells;
            jl["log2_cell_bound"] = ld.log2_bound;
            jl["max_overlap"] = ld.max_overlap;
            jl["separation_violations"] = ld.separation_violations;
            jl["coverage_violations"] = ld.coverage_violations;
        }
        if (include_anchors) {
            nlohmann::json pts = nlohmann::json::array();
            for (const auto& a : lv.anchors) {
                std::vector<double> c(a.data(), a.data() + a.size());
                pts.push_back(c);
            }
            jl["anchor_points"] = pts;
        }
        levels.push_back(jl);
    }
    j["levels"] = levels;
    j["entropy"] = {{"H", e.H}, {"bound", e.bound}, {"truncation_correction", e.truncation_correction},
                    {"gap", e.gap}, {"within_bound", e.within_bound}, {"samples", e.samples}};
    j["diagnostics"] = {{"checked_points", dg.checked_points}, {"locate_mismatches", dg.locate_mismatches},
                        {"containment_failures", dg.containment_failures},
                        {"overlap_violations", dg.overlap_violations}, {"overlap_bound", dg.overlap_bound},
                        {"ok", dg.ok}};
    return j;
}

} // namespace ruelle
