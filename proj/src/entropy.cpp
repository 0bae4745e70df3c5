#include "ruelle/entropy.hpp"

#include "ruelle/errors.hpp"
#include "ruelle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace ruelle {

// ---------------------------------------------------------------------------
// Symbolizers

namespace {

std::uint64_t grid_cell(double u, int refine) {
    if (refine <= 0) return 0;
    const double side = std::ldexp(1.0, refine);
    const double k = std::floor(u * side);
    return static_cast<std::uint64_t>(std::clamp(k, 0.0, side - 1.0));
}

Symbolizer joined(std::function<std::uint64_t(const Point&)> base, int refine, bool unit_box) {
    if (refine < 0 || refine > 24) throw ArgumentError("reference_symbolizer: refine must be in [0, 24]");
    return [base = std::move(base), refine, unit_box](const Point& x) {
        std::uint64_t fine = 0;
        if (unit_box) {
            for (Eigen::Index k = 0; k < x.size(); ++k) fine = (fine << refine) | grid_cell(x[k], refine);
        }
        return Symbol::tag((base(x) << 40) | fine);
    };
}

} // namespace

bool has_reference_symbolizer(const std::string& name) {
    return name == "doubling" || name == "tent" || name == "logistic4" || name == "gauss" ||
           name == "gauss_noncompact" || name == "doubling2d";
}

Symbolizer reference_symbolizer(const std::string& name, int refine) {
    if (name == "doubling" || name == "tent" || name == "logistic4")
        return joined([](const Point& x) -> std::uint64_t { return x[0] < 0.5 ? 0 : 1; }, refine, true);
    if (name == "gauss")
        return joined(
            [](const Point& x) -> std::uint64_t {
                if (!(x[0] > 0.0)) return 64;
                return static_cast<std::uint64_t>(std::min(std::floor(1.0 / x[0]), 64.0));
            },
            refine, true);
    if (name == "gauss_noncompact") {
        if (refine < 0 || refine > 24) throw ArgumentError("reference_symbolizer: refine must be in [0, 24]");
        const double side = std::ldexp(1.0, refine);
        return [side](const Point& y) {
            return Symbol::tag(static_cast<std::uint64_t>(std::clamp(std::floor(y[0] * side), 0.0, 64.0 * side)));
        };
    }
    if (name == "doubling2d")
        return joined([](const Point& x) -> std::uint64_t { return (x[0] < 0.5 ? 0 : 2) + (x[1] < 0.5 ? 0 : 1); },
                      refine, true);
    throw ArgumentError("reference_symbolizer: no reference partition for '" + name + "'");
}

Symbolizer single_cell_symbolizer() {
    return [](const Point&) { return Symbol::tag(0); };
}

Symbolizer word_symbolizer(Symbolizer base, const SmoothSystem& sys, int m) {
    if (m < 1) throw ArgumentError("word_symbolizer: m must be >= 1");
    if (m == 1) return base;
    return [base = std::move(base), &sys, m](const Point& x0) {
        Point x = x0;
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (int i = 0; i < m; ++i) {
            if (i > 0) {
                try {
                    x = iterate(sys, x, 1);
                } catch (const EscapeError&) {
                    return Symbol::escape();
                }
            }
            const Symbol s = base(x);
            if (s.is_special()) return s;
            h = splitmix64(h ^ splitmix64(s.hi ^ splitmix64(s.lo)));
        }
        return Symbol::tag(h);
    };
}

Symbolizer adaptive_symbolizer(const AdaptivePartition& partition, const SmoothSystem& sys,
                               const RegularityProfile& profile) {
    return [&partition, &sys, &profile](const Point& x) { return partition.locate(sys, profile, x); };
}

std::vector<Itinerary> itineraries(const SmoothSystem& sys, const InvariantMeasure& mu, const Symbolizer& symbolize,
                                   const ItineraryOptions& options) {
    if (options.step < 1) throw ArgumentError("itineraries: step must be >= 1");
    if (options.length < 1) throw ArgumentError("itineraries: length must be >= 1");
    std::vector<Itinerary> out(options.n_orbits);
    parallel_for(options.exec, options.n_orbits, [&](std::size_t i) {
        CounterRng rng(stream(options.seed, "itinerary", i));
        Itinerary it;
        it.start = mu.draw(rng);
        it.symbols.reserve(options.length);
        Point x = it.start;
        for (std::size_t j = 0; j < options.length; ++j) {
            it.symbols.push_back(symbolize(x));
            if (j + 1 == options.length) break;
            try {
                x = iterate(sys, x, options.step);
            } catch (const EscapeError&) {
                it.symbols.push_back(Symbol::escape());
                it.escaped = true;
                break;
            }
        }
        out[i] = std::move(it);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Plug-in entropies

namespace {

double entropy_from_counts(std::vector<std::size_t> counts, std::size_t total) {
    if (total == 0) return 0.0;
    std::sort(counts.begin(), counts.end());
    const double n = static_cast<double>(total);
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

template <class T>
std::vector<std::size_t> run_lengths(const std::vector<T>& sorted) {
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        counts.push_back(j - i);
        i = j;
    }
    return counts;
}

// Words over concatenated itineraries; positions never cross an orbit end.
struct WordTable {
    std::vector<std::uint32_t> symbol_ids;
    std::vector<std::size_t> ends;
    std::size_t alphabet = 0;
};

WordTable word_table(const std::vector<Itinerary>& its, const std::vector<std::size_t>& which) {
    std::vector<Symbol> flat;
    WordTable w;
    for (std::size_t i : which) {
        flat.insert(flat.end(), its[i].symbols.begin(), its[i].symbols.end());
        for (std::size_t k = 0; k < its[i].symbols.size(); ++k) w.ends.push_back(flat.size());
    }
    std::vector<Symbol> alphabet = flat;
    std::sort(alphabet.begin(), alphabet.end());
    alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
    w.alphabet = alphabet.size();
    w.symbol_ids.resize(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i)
        w.symbol_ids[i] =
            static_cast<std::uint32_t>(std::lower_bound(alphabet.begin(), alphabet.end(), flat[i]) - alphabet.begin());
    return w;
}

// Rows for t = 1..t_max. Word ids at t+1 are dense ranks of (id_t, next symbol).
std::vector<BlockEntropyRow> word_rows(const WordTable& w, int t_max) {
    std::vector<BlockEntropyRow> rows;
    const std::size_t N = w.symbol_ids.size();
    std::vector<std::uint32_t> ids = w.symbol_ids;
    std::size_t id_count = w.alphabet;
    for (int t = 1; t <= t_max; ++t) {
        BlockEntropyRow r;
        r.t = t;
        std::vector<std::size_t> counts(id_count, 0);
        std::size_t words = 0;
        for (std::size_t p = 0; p < N; ++p) {
            if (p + static_cast<std::size_t>(t) <= w.ends[p]) {
                ++counts[ids[p]];
                ++words;
            }
        }
        r.words = words;
        r.distinct = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
        r.H = entropy_from_counts(std::move(counts), words);
        r.H_per_t = r.H / t;
        rows.push_back(r);
        if (t == t_max) break;
        std::vector<std::uint64_t> keys;
        keys.reserve(N);
        std::vector<std::uint64_t> key_of(N, 0);
        for (std::size_t p = 0; p < N; ++p) {
            if (p + static_cast<std::size_t>(t) < w.ends[p]) {
                key_of[p] = (static_cast<std::uint64_t>(ids[p]) << 32) | w.symbol_ids[p + static_cast<std::size_t>(t)];
                keys.push_back(key_of[p]);
            }
        }
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        for (std::size_t p = 0; p < N; ++p) {
            if (p + static_cast<std::size_t>(t) < w.ends[p])
                ids[p] = static_cast<std::uint32_t>(std::lower_bound(keys.begin(), keys.end(), key_of[p]) - keys.begin());
        }
        id_count = std::max<std::size_t>(keys.size(), 1);
    }
    for (std::size_t k = 0; k < rows.size(); ++k)
        rows[k].increment = k + 1 < rows.size() ? rows[k + 1].H - rows[k].H : std::numeric_limits<double>::quiet_NaN();
    return rows;
}

} // namespace

double plug_in_entropy(std::vector<std::uint64_t> ids) {
    std::sort(ids.begin(), ids.end());
    const std::size_t n = ids.size();
    return entropy_from_counts(run_lengths(ids), n);
}

double plug_in_entropy(std::vector<Symbol> symbols) {
    std::sort(symbols.begin(), symbols.end());
    const std::size_t n = symbols.size();
    return entropy_from_counts(run_lengths(symbols), n);
}

BlockEntropyEstimate block_entropy(const std::vector<Itinerary>& its, const BlockEntropyOptions& options) {
    if (options.t_max < 4) throw ArgumentError("block_entropy: t_max must be >= 4");
    if (options.batches < 2) throw ArgumentError("block_entropy: need at least two batches");
    if (its.empty()) throw ArgumentError("block_entropy: no itineraries");
    BlockEntropyEstimate e;
    for (const auto& it : its) e.escaped_orbits += it.escaped ? 1 : 0;
    if (2 * e.escaped_orbits > its.size()) throw EscapeStatisticsError(e.escaped_orbits, its.size());

    std::vector<std::size_t> all(its.size());
    for (std::size_t i = 0; i < its.size(); ++i) all[i] = i;
    const WordTable w = word_table(its, all);
    e.symbols = w.symbol_ids.size();
    e.rows = word_rows(w, options.t_max);

    std::size_t trunc = 0;
    for (const auto& it : its)
        trunc += static_cast<std::size_t>(std::count(it.symbols.begin(), it.symbols.end(), Symbol::truncation()));
    e.truncation_fraction = e.symbols ? static_cast<double>(trunc) / static_cast<double>(e.symbols) : 0.0;
    e.truncation_entropy = e.truncation_fraction > 0.0 ? -e.truncation_fraction * std::log(e.truncation_fraction) : 0.0;

    const auto& last = e.rows.back();
    e.undersampled = static_cast<double>(last.words) < 10.0 * static_cast<double>(last.distinct);
    e.slope_t = 0;
    for (int t = options.t_max - 1; t >= 1; --t) {
        const auto& next = e.rows[static_cast<std::size_t>(t)];
        if (static_cast<double>(next.words) >= options.sample_factor * static_cast<double>(next.distinct)) {
            e.slope_t = t;
            break;
        }
    }
    if (e.slope_t == 0) {
        e.slope_t = 1;
        e.slope_undersampled = true;
    }
    e.slope = e.rows[static_cast<std::size_t>(e.slope_t - 1)].increment;

    std::vector<double> batch;
    for (int b = 0; b < options.batches; ++b) {
        std::vector<std::size_t> which;
        for (std::size_t i = static_cast<std::size_t>(b); i < its.size(); i += static_cast<std::size_t>(options.batches))
            which.push_back(i);
        if (which.empty()) continue;
        const auto rows = word_rows(word_table(its, which), e.slope_t + 1);
        batch.push_back(rows[static_cast<std::size_t>(e.slope_t - 1)].increment);
    }
    if (batch.size() >= 2) {
        const MeanStderr ms = mean_stderr(batch);
        e.std_error = ms.std_error;
    }
    return e;
}

BlockEntropyEstimate block_entropy(const SmoothSystem& sys, const InvariantMeasure& mu, const Symbolizer& symbolize,
                                   const ItineraryOptions& itinerary, const BlockEntropyOptions& options) {
    return block_entropy(itineraries(sys, mu, symbolize, itinerary), options);
}

// ---------------------------------------------------------------------------
// Conditional entropy

double conditional_entropy_of_pairs(const std::vector<std::pair<Symbol, Symbol>>& pairs) {
    if (pairs.empty()) return 0.0;
    auto sorted = pairs;
    std::sort(sorted.begin(), sorted.end());
    std::vector<Symbol> firsts(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) firsts[i] = sorted[i].first;
    const double joint = entropy_from_counts(run_lengths(sorted), sorted.size());
    const double marginal = entropy_from_counts(run_lengths(firsts), firsts.size());
    return std::max(0.0, joint - marginal);
}

ConditionalEntropyEstimate conditional_entropy(const SmoothSystem& sys, const InvariantMeasure& mu,
                                               const Symbolizer& symbolize, int m, std::size_t n_samples,
                                               std::uint64_t seed, const Exec& exec, int batches) {
    if (m < 1) throw ArgumentError("conditional_entropy: m must be >= 1");
    if (n_samples < 2) throw ArgumentError("conditional_entropy: need at least two samples");
    std::vector<std::pair<Symbol, Symbol>> pairs(n_samples);
    std::vector<char> escaped(n_samples, 0);
    parallel_for(exec, n_samples, [&](std::size_t i) {
        CounterRng rng(stream(seed, "conditional", i));
        const Point x = mu.draw(rng);
        Symbol b;
        try {
            b = symbolize(iterate(sys, x, m));
        } catch (const EscapeError&) {
            b = Symbol::escape();
            escaped[i] = 1;
        }
        pairs[i] = {symbolize(x), b};
    });
    ConditionalEntropyEstimate e;
    e.step = m;
    e.pairs = n_samples;
    e.escaped = static_cast<std::size_t>(std::count(escaped.begin(), escaped.end(), 1));
    if (2 * e.escaped > n_samples) throw EscapeStatisticsError(e.escaped, n_samples);
    e.value = conditional_entropy_of_pairs(pairs);
    std::vector<double> batch;
    for (int b = 0; b < batches; ++b) {
        std::vector<std::pair<Symbol, Symbol>> sub;
        for (std::size_t i = static_cast<std::size_t>(b); i < n_samples; i += static_cast<std::size_t>(batches))
            sub.push_back(pairs[i]);
        if (!sub.empty()) batch.push_back(conditional_entropy_of_pairs(sub));
    }
    if (batch.size() >= 2) e.std_error = mean_stderr(batch).std_error;
    return e;
}

// ---------------------------------------------------------------------------
// Decomposition

namespace {

struct PairRecord {
    Symbol F;        // cell of x
    int sx = 0;      // level of x
    int sg = 0;      // level of g x (-1 escape)
    Symbol B;        // cell of g x
};

enum class Term { I, II11, II12, II2 };

Term ii_term(int sx, int sg, int n) {
    if (sg == n) return sx == n ? Term::II11 : Term::II12;
    return Term::II2;
}

// Plug-in terms over the given records.
std::pair<DecompositionTerms, double> terms_of(const std::vector<PairRecord>& recs, int n) {
    DecompositionTerms t;
    if (recs.empty()) return {t, 0.0};
    const double N = static_cast<double>(recs.size());

    std::vector<std::tuple<Symbol, int, Symbol, int>> v;
    v.reserve(recs.size());
    for (const auto& r : recs) v.emplace_back(r.F, r.sg, r.B, r.sx);
    std::sort(v.begin(), v.end());

    // I = H(sg | F): Σ_F Σ_sg -p(F,sg) log(p(F,sg)/p(F)).
    // II = Σ_{F,sg} Σ_B -p(F,sg,B) log(p(F,sg,B)/p(F,sg)).
    // H(B | F) computed directly for the chain-rule check.
    double cond = 0.0;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        while (j < v.size() && std::get<0>(v[j]) == std::get<0>(v[i])) ++j;
        const double nF = static_cast<double>(j - i);
        // within F, grouped by sg then B
        for (std::size_t a = i; a < j;) {
            std::size_t b = a;
            while (b < j && std::get<1>(v[b]) == std::get<1>(v[a])) ++b;
            const double nFs = static_cast<double>(b - a);
            t.I -= nFs / N * std::log(nFs / nF);
            const Term term = ii_term(std::get<3>(v[a]), std::get<1>(v[a]), n);
            for (std::size_t c = a; c < b;) {
                std::size_t e = c;
                while (e < b && std::get<2>(v[e]) == std::get<2>(v[c])) ++e;
                const double nB = static_cast<double>(e - c);
                const double contrib = -nB / N * std::log(nB / nFs);
                if (term == Term::II11) t.II11 += contrib;
                else if (term == Term::II12) t.II12 += contrib;
                else t.II2 += contrib;
                c = e;
            }
            a = b;
        }
        // H(B | F) over the same block, regrouped by B.
        std::vector<Symbol> bs;
        for (std::size_t k = i; k < j; ++k) bs.push_back(std::get<2>(v[k]));
        std::sort(bs.begin(), bs.end());
        for (std::size_t c : run_lengths(bs)) cond -= static_cast<double>(c) / N * std::log(static_cast<double>(c) / nF);
        i = j;
    }
    return {t, cond};
}

} // namespace

DecompositionReport decomposition_report(const SmoothSystem& sys, const RegularityProfile& profile,
                                         const AdaptivePartition& P, const PartitionConstants& k,
                                         const DecompositionOptions& options) {
    const auto& pr = P.params();
    const int m = pr.m, n = pr.n;
    const auto& xs = P.samples();
    const std::size_t N = xs.size();

    std::vector<PairRecord> recs(N);
    std::vector<char> usable(N, 0);
    parallel_for(options.exec, N, [&](std::size_t i) {
        const int sx = P.sample_levels()[i];
        if (sx < 0) return;
        PairRecord r;
        r.F = P.sample_symbols()[i];
        r.sx = sx;
        try {
            const Point gx = iterate(sys, xs[i], m);
            r.sg = P.clipped_level(sys, profile, gx);
            r.B = P.locate_at(gx, r.sg);
            // Keep the level visible in uncovered images so the cell of gx
            // determines its level.
            if (r.B == Symbol::uncovered()) r.B.lo += static_cast<std::uint64_t>(r.sg) << 8;
        } catch (const EscapeError&) {
            r.sg = -1;
            r.B = Symbol::escape();
        }
        recs[i] = r;
        usable[i] = 1;
    });
    std::vector<PairRecord> used;
    std::vector<std::size_t> origin;
    for (std::size_t i = 0; i < N; ++i) {
        if (usable[i]) {
            used.push_back(recs[i]);
            origin.push_back(i);
        }
    }
    if (used.empty()) throw DomainError("decomposition_report: no usable samples");

    DecompositionReport rep;
    rep.m = m;
    rep.constants = k;
    rep.pairs = used.size();
    for (const auto& r : used) {
        rep.escaped_images += r.sg < 0 ? 1 : 0;
        rep.truncated_images += r.sg > pr.s_max ? 1 : 0;
        rep.uncovered_images += r.B.is_special() && (r.B.lo & 0xff) == 2 ? 1 : 0;
    }
    std::tie(rep.terms, rep.conditional) = terms_of(used, n);

    // Batch standard errors.
    std::vector<double> bI, b11, b12, b2, bc;
    for (int b = 0; b < options.batches; ++b) {
        std::vector<PairRecord> sub;
        for (std::size_t i = static_cast<std::size_t>(b); i < used.size(); i += static_cast<std::size_t>(options.batches))
            sub.push_back(used[i]);
        if (sub.empty()) continue;
        const auto [t, c] = terms_of(sub, n);
        bI.push_back(t.I);
        b11.push_back(t.II11);
        b12.push_back(t.II12);
        b2.push_back(t.II2);
        bc.push_back(c);
    }
    if (bI.size() >= 2) {
        rep.std_errors.I = mean_stderr(bI).std_error;
        rep.std_errors.II11 = mean_stderr(b11).std_error;
        rep.std_errors.II12 = mean_stderr(b12).std_error;
        rep.std_errors.II2 = mean_stderr(b2).std_error;
        rep.conditional_std_error = mean_stderr(bc).std_error;
    }

    // s_B per cell: smallest image level among its samples.
    std::vector<std::pair<Symbol, int>> by_cell;
    for (const auto& r : used) by_cell.emplace_back(r.F, r.sg);
    std::sort(by_cell.begin(), by_cell.end());
    std::vector<int> sB_of_sample;
    int jump = 0;
    for (std::size_t i = 0; i < by_cell.size();) {
        std::size_t j = i;
        int sB = INT32_MAX;
        while (j < by_cell.size() && by_cell[j].first == by_cell[i].first) {
            if (by_cell[j].second >= 0) sB = std::min(sB, by_cell[j].second);
            ++j;
        }
        ++rep.cells;
        if (j - i < options.min_cell_samples) {
            ++rep.undersampled_cells;
            rep.undersampled_mass += static_cast<double>(j - i);
        }
        if (sB != INT32_MAX) {
            for (std::size_t q = i; q < j; ++q) {
                if (by_cell[q].second < 0) continue;
                jump = std::max(jump, by_cell[q].second - sB);
                sB_of_sample.push_back(sB);
            }
        }
        i = j;
    }
    rep.undersampled_mass /= static_cast<double>(used.size());
    rep.max_level_jump = jump;
    rep.C1 = std::max(1, (jump + m - 1) / m);
    if (!sB_of_sample.empty()) {
        std::sort(sB_of_sample.begin(), sB_of_sample.end());
        const auto rank = static_cast<std::size_t>(std::ceil(options.level_percentile * static_cast<double>(sB_of_sample.size())));
        rep.L = sB_of_sample[std::min(sB_of_sample.size(), std::max<std::size_t>(rank, 1)) - 1];
    }
    rep.l_min = minimal_l(m, rep.L, pr.alpha, pr.C, pr.a);
    rep.l_admissible = rep.l_min.has_value() && pr.l >= *rep.l_min;

    // ∫ log ‖(D g)^∧‖ dμ over a strided subset of the build samples.
    const std::size_t stride = std::max<std::size_t>(1, origin.size() / std::max<std::size_t>(1, options.exterior_samples));
    std::vector<std::size_t> picks;
    for (std::size_t q = 0; q < origin.size() && picks.size() < options.exterior_samples; q += stride) picks.push_back(origin[q]);
    std::vector<double> ext(picks.size(), 0.0);
    std::vector<char> ext_ok(picks.size(), 0);
    parallel_for(options.exec, picks.size(), [&](std::size_t q) {
        try {
            ext[q] = exterior_norm_growth(sys, xs[picks[q]], m);
            ext_ok[q] = std::isfinite(ext[q]) ? 1 : 0;
        } catch (const EscapeError&) {
        }
    });
    std::vector<double> ext_vals;
    for (std::size_t q = 0; q < picks.size(); ++q) {
        if (ext_ok[q]) ext_vals.push_back(ext[q]);
    }
    if (ext_vals.size() >= 2) {
        const MeanStderr ms = mean_stderr(ext_vals);
        rep.exterior_integral = ms.mean;
        rep.exterior_integral_std_error = ms.std_error;
    }

    rep.I_bound = 1.0 + (rep.C1 * m + 1.0) / std::numbers::e;
    rep.II2_bound = std::log(k.C2) + 4.0;
    rep.II12_bound = std::log(k.C2) + 4.0;
    rep.II11_bound = std::log(k.C3) + rep.exterior_integral;
    rep.I_exceeds = rep.terms.I > rep.I_bound + 3.0 * rep.std_errors.I;
    rep.II2_exceeds = rep.terms.II2 > rep.II2_bound + 3.0 * rep.std_errors.II2;
    rep.II12_exceeds = rep.terms.II12 > rep.II12_bound + 3.0 * rep.std_errors.II12;
    rep.II11_exceeds = rep.terms.II11 > rep.II11_bound + 3.0 * (rep.std_errors.II11 + rep.exterior_integral_std_error);
    return rep;
}

// ---------------------------------------------------------------------------
// Box counting

namespace {

struct Parallelotope {
    Vec centre;
    std::vector<Vec> edges; // full edge vectors
};

Parallelotope image_of(const Mat& A, const BoxElement& box) {
    const int d = static_cast<int>(box.anchor.size());
    Parallelotope p;
    p.centre = A * (box.anchor + box.frame * box.center_offset);
    for (int i = 0; i < d; ++i) p.edges.push_back(A * box.frame.col(i) * (2.0 * box.half_widths[i]));
    return p;
}

Vec cross3(const Vec& a, const Vec& b) {
    Vec c(3);
    c << a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0];
    return c;
}

} // namespace

double box_count_bound(const Mat& A, const BoxElement& box, double beta, double c) {
    const Parallelotope p = image_of(A, box);
    double prod = c;
    for (const auto& e : p.edges) prod *= std::max(e.norm() / beta, 1.0);
    return prod;
}

BoxCount box_intersection_count(const Mat& A, const BoxElement& box, double beta, std::size_t max_cells) {
    if (!(beta > 0.0)) throw ArgumentError("box_intersection_count: beta must be positive");
    const int d = static_cast<int>(box.anchor.size());
    if (A.rows() != d || A.cols() != d) throw ArgumentError("box_intersection_count: dimension mismatch");
    const Parallelotope P = image_of(A, box);

    Vec lo = P.centre, hi = P.centre;
    for (int k = 0; k < d; ++k) {
        double r = 0.0;
        for (const auto& e : P.edges) r += 0.5 * std::abs(e[k]);
        lo[k] -= r;
        hi[k] += r;
    }
    std::vector<std::int64_t> qlo(static_cast<std::size_t>(d)), qhi(static_cast<std::size_t>(d));
    double total = 1.0;
    for (int k = 0; k < d; ++k) {
        qlo[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(std::floor(lo[k] / beta));
        qhi[static_cast<std::size_t>(k)] =
            std::max(qlo[static_cast<std::size_t>(k)], static_cast<std::int64_t>(std::ceil(hi[k] / beta)) - 1);
        total *= static_cast<double>(qhi[static_cast<std::size_t>(k)] - qlo[static_cast<std::size_t>(k)] + 1);
    }

    if (d == 1) {
        if (hi[0] <= lo[0]) return {1, false};
        return {static_cast<std::size_t>(qhi[0] - qlo[0] + 1), true};
    }

    if (d <= 3) {
        if (total > static_cast<double>(max_cells)) throw ArgumentError("box_intersection_count: too many grid cells");
        Eigen::MatrixXd E(d, d);
        double scale = 1.0;
        for (int i = 0; i < d; ++i) {
            E.col(i) = P.edges[static_cast<std::size_t>(i)];
            scale *= std::max(P.edges[static_cast<std::size_t>(i)].norm(), 1e-300);
        }
        const bool solid = std::abs(E.determinant()) > 1e-12 * scale;

        std::vector<Vec> axes;
        for (int k = 0; k < d; ++k) axes.push_back(Vec::Unit(d, k));
        if (d == 2) {
            for (const auto& e : P.edges) {
                Vec n(2);
                n << -e[1], e[0];
                axes.push_back(n);
            }
        } else {
            for (int i = 0; i < 3; ++i) axes.push_back(cross3(P.edges[static_cast<std::size_t>(i)], P.edges[static_cast<std::size_t>((i + 1) % 3)]));
            for (const auto& e : P.edges) {
                for (int k = 0; k < 3; ++k) axes.push_back(cross3(e, Vec::Unit(3, k)));
            }
        }
        std::vector<Vec> kept;
        for (auto& a : axes) {
            const double nn = a.norm();
            if (nn > 1e-14 * std::max(1.0, std::sqrt(scale))) kept.push_back(a / nn);
        }
        // Projection radii of P per axis.
        std::vector<double> pc(kept.size()), pr(kept.size());
        for (std::size_t a = 0; a < kept.size(); ++a) {
            pc[a] = kept[a].dot(P.centre);
            double r = 0.0;
            for (const auto& e : P.edges) r += 0.5 * std::abs(kept[a].dot(e));
            pr[a] = r;
        }

        std::size_t count = 0;
        std::vector<std::int64_t> q(qlo);
        Vec cc(d);
        while (true) {
            for (int k = 0; k < d; ++k) cc[k] = (static_cast<double>(q[static_cast<std::size_t>(k)]) + 0.5) * beta;
            bool meets = true;
            for (std::size_t a = 0; a < kept.size() && meets; ++a) {
                const double c = kept[a].dot(cc);
                const double cr = 0.5 * beta * kept[a].cwiseAbs().sum();
                const double overlap = std::min(pc[a] + pr[a], c + cr) - std::max(pc[a] - pr[a], c - cr);
                const double tol = 1e-12 * std::max({1.0, std::abs(pc[a]), std::abs(c), pr[a], cr});
                meets = solid ? overlap > tol : overlap >= -tol;
            }
            count += meets ? 1 : 0;
            int k = d - 1;
            while (k >= 0 && q[static_cast<std::size_t>(k)] == qhi[static_cast<std::size_t>(k)]) {
                q[static_cast<std::size_t>(k)] = qlo[static_cast<std::size_t>(k)];
                --k;
            }
            if (k < 0) break;
            ++q[static_cast<std::size_t>(k)];
        }
        return {count, solid};
    }

    // d > 3: midpoint sampling on a K^d grid in parameter space, refined
    // until the count stops growing.
    std::size_t prev = 0;
    int K = std::max(2, static_cast<int>(std::pow(4096.0, 1.0 / d)));
    while (true) {
        std::vector<std::vector<std::int64_t>> cells;
        std::vector<int> j(static_cast<std::size_t>(d), 0);
        Vec pt(d);
        while (true) {
            pt = P.centre;
            for (int i = 0; i < d; ++i) {
                const double u = (j[static_cast<std::size_t>(i)] + 0.5) / K - 0.5;
                pt += u * P.edges[static_cast<std::size_t>(i)];
            }
            std::vector<std::int64_t> c(static_cast<std::size_t>(d));
            for (int k = 0; k < d; ++k) c[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(std::floor(pt[k] / beta));
            cells.push_back(std::move(c));
            int i = d - 1;
            while (i >= 0 && j[static_cast<std::size_t>(i)] == K - 1) {
                j[static_cast<std::size_t>(i)] = 0;
                --i;
            }
            if (i < 0) break;
            ++j[static_cast<std::size_t>(i)];
        }
        std::sort(cells.begin(), cells.end());
        const auto count = static_cast<std::size_t>(std::unique(cells.begin(), cells.end()) - cells.begin());
        if (count == prev || std::pow(2.0 * K, d) > 2e5) return {std::max(count, prev), false};
        prev = count;
        K *= 2;
    }
}

// ---------------------------------------------------------------------------
// Reachable cells

ReachableCount count_reachable_cells(const SmoothSystem& sys, const RegularityProfile& profile,
                                     const AdaptivePartition& P, const Symbol& cell, std::size_t n_probe, double C3,
                                     std::uint64_t seed) {
    if (cell.is_special()) throw ArgumentError("count_reachable_cells: special symbol");
    const int m = P.params().m;
    const int n = P.params().n;
    const BoxElement box = P.cell_box(cell);
    const int d = P.dim();
    ReachableCount rc;
    rc.cell = cell;
    CounterRng rng(stream(seed, "probe", splitmix64(cell.hi ^ splitmix64(cell.lo))));
    std::vector<Symbol> hits;
    std::optional<Point> inside;
    for (std::size_t k = 0; k < n_probe; ++k) {
        Vec u(d);
        for (int i = 0; i < d; ++i) u[i] = (2.0 * rng.uniform() - 1.0) * box.half_widths[i];
        const Point p = box.anchor + box.frame * (box.center_offset + u);
        if (!sys.domain.contains(p) || !sys.in_U(p) || P.locate(sys, profile, p) != cell) continue;
        ++rc.probes;
        if (!inside) inside = p;
        try {
            hits.push_back(P.locate(sys, profile, iterate(sys, p, m)));
        } catch (const EscapeError&) {
            ++rc.escaped;
        }
    }
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    rc.hits = hits.size();
    rc.hits_at_n = static_cast<std::size_t>(
        std::count_if(hits.begin(), hits.end(), [n](const Symbol& s) { return !s.is_special() && s.level() == n; }));
    const Point centre = box.anchor + box.frame * box.center_offset;
    const Point& at = sys.domain.contains(centre) && sys.in_U(centre) ? centre : inside.value_or(box.anchor);
    try {
        rc.exterior_norm = std::exp(exterior_norm_growth(sys, at, m));
    } catch (const EscapeError&) {
        rc.exterior_norm = kInf;
    }
    rc.bound = C3 * rc.exterior_norm;
    rc.within = static_cast<double>(rc.hits_at_n) <= rc.bound;
    return rc;
}

ReachableSurvey survey_reachable_cells(const SmoothSystem& sys, const RegularityProfile& profile,
                                       const AdaptivePartition& P, double C3, std::size_t n_cells,
                                       std::size_t n_probe, std::uint64_t seed, const Exec& exec) {
    const int n = P.params().n;
    std::vector<std::pair<std::uint64_t, std::size_t>> order;
    for (std::size_t i = 0; i < P.samples().size(); ++i) {
        if (P.sample_levels()[i] == n && !P.sample_symbols()[i].is_special())
            order.emplace_back(splitmix64(seed ^ splitmix64(i)), i);
    }
    std::sort(order.begin(), order.end());
    std::vector<Symbol> cells;
    std::vector<Symbol> seen;
    for (const auto& [h, i] : order) {
        if (cells.size() >= n_cells) break;
        const Symbol s = P.sample_symbols()[i];
        auto it = std::lower_bound(seen.begin(), seen.end(), s);
        if (it != seen.end() && *it == s) continue;
        seen.insert(it, s);
        cells.push_back(s);
    }
    ReachableSurvey out;
    out.rows.resize(cells.size());
    parallel_for(exec, cells.size(),
                 [&](std::size_t k) { out.rows[k] = count_reachable_cells(sys, profile, P, cells[k], n_probe, C3, seed); });
    for (const auto& r : out.rows) {
        out.violations += r.within ? 0 : 1;
        if (r.bound > 0.0) out.max_ratio = std::max(out.max_ratio, static_cast<double>(r.hits_at_n) / r.bound);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output

namespace {

nlohmann::json num(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

} // namespace

nlohmann::json to_json(const BlockEntropyEstimate& e) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : e.rows)
        rows.push_back({{"t", r.t}, {"H", r.H}, {"H_per_t", r.H_per_t}, {"increment", num(r.increment)},
                        {"words", r.words}, {"distinct", r.distinct}});
    return {{"rows", rows},
            {"slope_t", e.slope_t},
            {"slope", e.slope},
            {"stderr", e.std_error},
            {"undersampled", e.undersampled},
            {"slope_undersampled", e.slope_undersampled},
            {"truncation_fraction", e.truncation_fraction},
            {"truncation_entropy", e.truncation_entropy},
            {"symbols", e.symbols},
            {"escaped_orbits", e.escaped_orbits}};
}

nlohmann::json to_json(const ConditionalEntropyEstimate& e) {
    return {{"value", e.value}, {"stderr", e.std_error}, {"pairs", e.pairs}, {"escaped", e.escaped}, {"step", e.step}};
}

nlohmann::json to_json(const DecompositionReport& r) {
    nlohmann::json j;
    j["terms"] = {{"I", r.terms.I}, {"II11", r.terms.II11}, {"II12", r.terms.II12}, {"II2", r.terms.II2}};
    j["stderr"] = {{"I", r.std_errors.I}, {"II11", r.std_errors.II11}, {"II12", r.std_errors.II12}, {"II2", r.std_errors.II2}};
    j["total"] = r.terms.total();
    j["conditional"] = r.conditional;
    j["conditional_stderr"] = r.conditional_std_error;
    j["bounds"] = {{"I", r.I_bound}, {"II2", r.II2_bound}, {"II12", r.II12_bound}, {"II11", num(r.II11_bound)}};
    j["exterior_integral"] = r.exterior_integral;
    j["exterior_integral_stderr"] = r.exterior_integral_std_error;
    j["exceeds"] = {{"I", r.I_exceeds}, {"II2", r.II2_exceeds}, {"II12", r.II12_exceeds}, {"II11", r.II11_exceeds}};
    j["within_bounds"] = r.within_bounds();
    j["constants"] = {{"C0", r.constants.C0}, {"C01", r.constants.C01}, {"C1", r.C1}, {"C2", r.constants.C2},
                      {"C3", r.constants.C3}, {"c", r.constants.c}};
    j["m"] = r.m;
    j["max_level_jump"] = r.max_level_jump;
    j["L"] = r.L;
    j["L_method"] = "percentile";
    j["l_min"] = r.l_min ? nlohmann::json(*r.l_min) : nlohmann::json(nullptr);
    j["l_admissible"] = r.l_admissible;
    j["pairs"] = r.pairs;
    j["escaped_images"] = r.escaped_images;
    j["truncated_images"] = r.truncated_images;
    j["uncovered_images"] = r.uncovered_images;
    j["cells"] = r.cells;
    j["undersampled_cells"] = r.undersampled_cells;
    j["undersampled_mass"] = r.undersampled_mass;
    return j;
}

nlohmann::json to_json(const ReachableSurvey& s) {
    std::size_t probes = 0, hits_max = 0, hits_n_max = 0;
    for (const auto& r : s.rows) {
        probes += r.probes;
        hits_max = std::max(hits_max, r.hits);
        hits_n_max = std::max(hits_n_max, r.hits_at_n);
    }
    return {{"cells", s.rows.size()}, {"violations", s.violations}, {"max_ratio", s.max_ratio},
            {"max_hits", hits_max}, {"max_hits_at_n", hits_n_max}, {"probes", probes}};
}

void write_block_entropy_csv(std::ostream& out, const BlockEntropyEstimate& e) {
    out << "t,H_t,H_t_over_t,increment,words,distinct\n";
    out.precision(17);
    for (const auto& r : e.rows) {
        out << r.t << ',' << r.H << ',' << r.H_per_t << ',';
        if (std::isfinite(r.increment)) out << r.increment;
        out << ',' << r.words << ',' << r.distinct << '\n';
    }
}

} // namespace ruelle
