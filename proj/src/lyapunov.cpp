#include "ruelle/lyapunov.hpp"

#include "ruelle/errors.hpp"
#include "ruelle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace ruelle {

double positive_sum(const std::vector<double>& exponents) {
    double s = 0.0;
    for (double l : exponents) {
        if (l > 0.0) s += l;
    }
    return s;
}

namespace {

// Modified Gram–Schmidt in place; returns the diagonal of R (all >= 0).
Vec mgs(Mat& M, std::vector<bool>& degenerate) {
    const auto d = M.cols();
    Vec r(d);
    for (Eigen::Index c = 0; c < d; ++c) {
        for (Eigen::Index p = 0; p < c; ++p) M.col(c) -= M.col(p).dot(M.col(c)) * M.col(p);
        const double n = M.col(c).norm();
        r[c] = n;
        if (n > 1e-300 && std::isfinite(n)) {
            M.col(c) /= n;
            continue;
        }
        degenerate[static_cast<std::size_t>(c)] = true;
        // Complete the frame with a standard basis vector.
        for (Eigen::Index e = 0; e < d; ++e) {
            Vec v = Vec::Zero(d);
            v[e] = 1.0;
            for (Eigen::Index p = 0; p < c; ++p) v -= M.col(p).dot(v) * M.col(p);
            if (v.norm() > 1e-6) {
                M.col(c) = v / v.norm();
                break;
            }
        }
    }
    return r;
}

} // namespace

SpectrumEstimate spectrum(const SmoothSystem& sys, const Point& x, long n, int reorth_every,
                          const SpectrumOptions& options) {
    if (reorth_every < 1) throw ArgumentError("spectrum: reorth_every must be >= 1");
    if (n < 10L * reorth_every) throw ArgumentError("spectrum: n must be >= 10 * reorth_every");
    if (options.blocks < 2) throw ArgumentError("spectrum: need at least two blocks");
    const int d = sys.dim();
    Point y = iterate(sys, x, options.burn_in);

    std::vector<double> logs(static_cast<std::size_t>(d), 0.0);
    std::vector<std::vector<double>> block_logs(static_cast<std::size_t>(options.blocks),
                                                std::vector<double>(static_cast<std::size_t>(d), 0.0));
    std::vector<long> block_len(static_cast<std::size_t>(options.blocks), 0);
    std::vector<bool> degenerate(static_cast<std::size_t>(d), false);
    auto block_of = [&](long j) { return static_cast<std::size_t>(j * options.blocks / n); };

    auto advance = [&](long j) {
        Point z = sys.map(y);
        if (!sys.domain.contains(z) || (j + 1 < n && !sys.in_U(z)))
            throw EscapeError(static_cast<int>(std::min<long>(options.burn_in + j + 1, INT32_MAX)), z);
        y = std::move(z);
    };

    if (d == 1) {
        // Scalar cocycle: the Birkhoff sum of log|f'| is exact.
        for (long j = 0; j < n; ++j) {
            const double v = std::abs(sys.jacobian(y)(0, 0));
            const double lv = v > 1e-300 ? std::log(v) : 0.0;
            if (!(v > 1e-300)) degenerate[0] = true;
            logs[0] += lv;
            block_logs[block_of(j)][0] += lv;
            ++block_len[block_of(j)];
            advance(j);
        }
    } else {
        Mat M = Mat::Identity(d, d);
        long since = 0;
        for (long j = 0; j < n; ++j) {
            M = sys.jacobian(y) * M;
            advance(j);
            ++block_len[block_of(j)];
            ++since;
            bool due = since >= reorth_every || j + 1 == n;
            if (!due) {
                for (int c = 0; c < d; ++c) {
                    const double cn = M.col(c).norm();
                    if (cn > 1e150 || cn < 1e-150) due = true;
                }
            }
            if (!due) continue;
            const Vec r = mgs(M, degenerate);
            for (int c = 0; c < d; ++c) {
                const double lr = r[c] > 1e-300 && std::isfinite(r[c]) ? std::log(r[c]) : 0.0;
                logs[static_cast<std::size_t>(c)] += lr;
                block_logs[block_of(j)][static_cast<std::size_t>(c)] += lr;
            }
            since = 0;
        }
    }

    SpectrumEstimate est;
    est.horizon = n;
    est.reorth_every = reorth_every;
    std::vector<std::pair<double, double>> pairs;
    for (int c = 0; c < d; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        std::vector<double> rates;
        for (int b = 0; b < options.blocks; ++b) {
            const auto bb = static_cast<std::size_t>(b);
            if (block_len[bb] > 0) rates.push_back(block_logs[bb][cc] / static_cast<double>(block_len[bb]));
        }
        const double lam = degenerate[cc] ? kMinusInfinity : logs[cc] / static_cast<double>(n);
        const double se = degenerate[cc] ? 0.0 : mean_stderr(rates).std_error;
        pairs.emplace_back(lam, se);
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [l, s] : pairs) {
        est.exponents.push_back(l);
        est.std_errors.push_back(s);
    }
    est.positive_sum = positive_sum(est.exponents);
    return est;
}

EnsembleEstimate positive_sum_integral(const SmoothSystem& sys, const InvariantMeasure& mu,
                                       const EnsembleOptions& options) {
    if (options.n_orbits < 10) throw ArgumentError("positive_sum_integral: n_orbits must be >= 10");
    EnsembleEstimate out;
    out.rows.resize(options.n_orbits);
    parallel_for(options.exec, options.n_orbits, [&](std::size_t i) {
        CounterRng rng(stream(options.seed, "rhs-start", i));
        OrbitRow row;
        row.index = i;
        row.start = mu.draw(rng);
        try {
            const SpectrumEstimate s = spectrum(sys, row.start, options.horizon, options.reorth_every, options.spectrum);
            row.exponents = s.exponents;
            row.positive_sum = s.positive_sum;
        } catch (const EscapeError&) {
            row.escaped = true;
        }
        out.rows[i] = std::move(row);
    });
    std::vector<double> vals;
    for (const auto& r : out.rows) {
        if (r.escaped) ++out.escaped;
        else vals.push_back(r.positive_sum);
    }
    if (2 * out.escaped > options.n_orbits) throw EscapeStatisticsError(out.escaped, options.n_orbits);
    const MeanStderr ms = mean_stderr(vals);
    out.mean = ms.mean;
    out.std_error = ms.std_error;
    out.used = vals.size();
    return out;
}

EnsembleEstimate exterior_growth_integral(const SmoothSystem& sys, const InvariantMeasure& mu, int m,
                                          std::size_t n_samples, std::uint64_t seed, const Exec& exec) {
    if (m < 1) throw ArgumentError("exterior_growth_integral: m must be >= 1");
    if (n_samples < 2) throw ArgumentError("exterior_growth_integral: need at least two samples");
    EnsembleEstimate out;
    out.rows.resize(n_samples);
    parallel_for(exec, n_samples, [&](std::size_t i) {
        CounterRng rng(stream(seed, "exterior", i));
        OrbitRow row;
        row.index = i;
        row.start = mu.draw(rng);
        try {
            row.positive_sum = exterior_norm_growth(sys, row.start, m) / m;
        } catch (const EscapeError&) {
            row.escaped = true;
        }
        out.rows[i] = std::move(row);
    });
    std::vector<double> vals;
    for (const auto& r : out.rows) {
        if (r.escaped) ++out.escaped;
        else vals.push_back(r.positive_sum);
    }
    if (2 * out.escaped > n_samples) throw EscapeStatisticsError(out.escaped, n_samples);
    const MeanStderr ms = mean_stderr(vals);
    out.mean = ms.mean;
    out.std_error = ms.std_error;
    out.used = vals.size();
    return out;
}

void write_spectrum_csv(std::ostream& out, const EnsembleEstimate& e, std::uint64_t seed) {
    const int d = e.rows.empty() ? 0 : static_cast<int>(e.rows.front().start.size());
    out << "index,seed";
    for (int i = 0; i < d; ++i) out << ",x0_" << i;
    for (int i = 0; i < d; ++i) out << ",lambda_" << i;
    out << ",positive_sum,escaped\n";
    out.precision(17);
    for (const auto& r : e.rows) {
        out << r.index << ',' << seed;
        for (int i = 0; i < d; ++i) out << ',' << r.start[i];
        for (int i = 0; i < d; ++i) {
            out << ',';
            if (static_cast<std::size_t>(i) < r.exponents.size()) {
                if (std::isinf(r.exponents[static_cast<std::size_t>(i)])) out << "-inf";
                else out << r.exponents[static_cast<std::size_t>(i)];
            }
        }
        out << ',' << r.positive_sum << ',' << (r.escaped ? 1 : 0) << '\n';
    }
}

nlohmann::json spectrum_summary_json(const EnsembleEstimate& e, long horizon) {
    return {{"mean", e.mean}, {"stderr", e.std_error}, {"horizon", horizon}, {"orbits_used", e.used},
            {"orbits_escaped", e.escaped}};
}

} // namespace ruelle
