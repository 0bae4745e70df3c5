#include "ruelle/harness.hpp"

#include "ruelle/errors.hpp"
#include "ruelle/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace ruelle {

// ---------------------------------------------------------------------------
// Specs

void BenchmarkSpec::validate() const {
    if (name.empty()) throw ArgumentError("spec: name is empty");
    if (system.empty() && !system_config) throw ArgumentError("spec: no system");
    if (measure.empty()) throw ArgumentError("spec: no measure");
    if (!(b >= 1.0)) throw ArgumentError("spec: b must be >= 1");
    if (m < 1 || n < 0 || s_max < n) throw ArgumentError("spec: need m >= 1, n >= 0, s_max >= n");
    if (profile != "interval" && profile != "tabulated") throw ArgumentError("spec: profile must be interval or tabulated");
    const auto positive = [](std::size_t v, const char* what) {
        if (v == 0) throw ArgumentError(std::string("spec: budget '") + what + "' must be positive");
    };
    positive(rhs_orbits, "rhs_orbits");
    positive(itinerary_orbits, "itinerary_orbits");
    positive(itinerary_length, "itinerary_length");
    positive(conditional_samples, "conditional_samples");
    positive(partition_samples, "partition_samples");
    positive(diagnose_points, "diagnose_points");
    positive(reachable_probes, "reachable_probes");
    positive(exterior_samples, "exterior_samples");
    positive(distortion_samples, "distortion_samples");
    positive(mc_samples, "mc_samples");
    if (horizon < 10L * reorth_every) throw ArgumentError("spec: horizon must be >= 10 * reorth_every");
    if (t_max < 4) throw ArgumentError("spec: t_max must be >= 4");
    for (int v : sweep_m) {
        if (v < 1) throw ArgumentError("spec: sweep m values must be >= 1");
    }
}

std::vector<std::string> benchmark_names() {
    return {"doubling", "tent", "gauss", "logistic4", "gauss_noncompact", "doubling2d"};
}

BenchmarkSpec benchmark(const std::string& name) {
    BenchmarkSpec s;
    s.name = name;
    s.system = name;
    s.reference = name;
    if (name == "doubling" || name == "tent") {
        s.measure = "uniform";
    } else if (name == "gauss") {
        s.measure = "gauss";
    } else if (name == "logistic4") {
        s.measure = "arcsine";
    } else if (name == "gauss_noncompact") {
        s.measure = "gauss_noncompact";
    } else if (name == "doubling2d") {
        s.measure = "uniform2d";
        s.profile = "tabulated";
        s.t_max = 6;
    } else {
        throw ArgumentError("unknown benchmark '" + name + "'");
    }
    return s;
}

namespace {

const char* policy_name(RadiusPolicy p) { return p == RadiusPolicy::clip ? "clip" : "pure_norm"; }

RadiusPolicy policy_from(const std::string& s) {
    if (s == "clip") return RadiusPolicy::clip;
    if (s == "pure_norm") return RadiusPolicy::pure_norm;
    throw ArgumentError("spec: unknown radius policy '" + s + "'");
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

} // namespace

nlohmann::json spec_to_json(const BenchmarkSpec& s) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = s.name;
    j["system"] = s.system;
    j["system_params"] = s.system_params;
    if (s.system_config) j["system_config"] = *s.system_config;
    j["measure"] = s.measure;
    j["measure_params"] = s.measure_params;
    j["reference"] = s.reference;
    j["profile"] = {{"kind", s.profile},
                    {"b", s.b},
                    {"policy", policy_name(s.policy)},
                    {"tabulated_min_threshold", s.tabulated_min_threshold},
                    {"tabulated_samples", s.tabulated_samples},
                    {"tabulated_resolution", s.tabulated_resolution}};
    j["levels"] = {{"m", s.m}, {"n", s.n}, {"l1", s.l1}, {"l", s.l}, {"s_max", s.s_max}};
    j["budgets"] = {{"horizon", s.horizon},
                    {"rhs_orbits", s.rhs_orbits},
                    {"reorth_every", s.reorth_every},
                    {"itinerary_orbits", s.itinerary_orbits},
                    {"itinerary_length", s.itinerary_length},
                    {"t_max", s.t_max},
                    {"conditional_samples", s.conditional_samples},
                    {"partition_samples", s.partition_samples},
                    {"diagnose_points", s.diagnose_points},
                    {"reachable_cells", s.reachable_cells},
                    {"reachable_probes", s.reachable_probes},
                    {"exterior_samples", s.exterior_samples},
                    {"distortion_samples", s.distortion_samples},
                    {"mc_samples", s.mc_samples}};
    j["sweep"] = {{"n", s.sweep_n}, {"l", s.sweep_l}, {"m", s.sweep_m}};
    j["seed"] = s.seed;
    return j;
}

BenchmarkSpec spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ArgumentError("config: expected a JSON object");
    if (!j.contains("schema_version")) throw ArgumentError("config: missing schema_version");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw ArgumentError("config: unsupported schema_version " + j.at("schema_version").dump());
    static const std::vector<std::string> known = {"schema_version", "benchmark", "name", "system", "system_params",
                                                   "system_config", "measure", "measure_params", "reference",
                                                   "profile", "levels", "budgets", "sweep", "seed"};
    for (const auto& [k, v] : j.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ArgumentError("config: unknown key '" + k + "'");
    }
    BenchmarkSpec s;
    try {
        if (j.contains("benchmark")) s = benchmark(j.at("benchmark").get<std::string>());
        take(j, "name", s.name);
        if (j.contains("system")) {
            s.system = j.at("system").get<std::string>();
            if (!j.contains("reference")) s.reference = has_reference_symbolizer(s.system) ? s.system : "";
        }
        take(j, "system_params", s.system_params);
        if (j.contains("system_config")) {
            s.system_config = j.at("system_config");
            if (s.system.empty()) s.system = s.system_config->value("name", std::string("custom"));
            if (!j.contains("reference")) s.reference.clear();
        }
        take(j, "measure", s.measure);
        take(j, "measure_params", s.measure_params);
        take(j, "reference", s.reference);
        if (j.contains("profile")) {
            const auto& p = j.at("profile");
            take(p, "kind", s.profile);
            take(p, "b", s.b);
            if (p.contains("policy")) s.policy = policy_from(p.at("policy").get<std::string>());
            take(p, "tabulated_min_threshold", s.tabulated_min_threshold);
            take(p, "tabulated_samples", s.tabulated_samples);
            take(p, "tabulated_resolution", s.tabulated_resolution);
        }
        if (j.contains("levels")) {
            const auto& p = j.at("levels");
            take(p, "m", s.m);
            take(p, "n", s.n);
            take(p, "l1", s.l1);
            take(p, "l", s.l);
            take(p, "s_max", s.s_max);
        }
        if (j.contains("budgets")) {
            const auto& p = j.at("budgets");
            take(p, "horizon", s.horizon);
            take(p, "rhs_orbits", s.rhs_orbits);
            take(p, "reorth_every", s.reorth_every);
            take(p, "itinerary_orbits", s.itinerary_orbits);
            take(p, "itinerary_length", s.itinerary_length);
            take(p, "t_max", s.t_max);
            take(p, "conditional_samples", s.conditional_samples);
            take(p, "partition_samples", s.partition_samples);
            take(p, "diagnose_points", s.diagnose_points);
            take(p, "reachable_cells", s.reachable_cells);
            take(p, "reachable_probes", s.reachable_probes);
            take(p, "exterior_samples", s.exterior_samples);
            take(p, "distortion_samples", s.distortion_samples);
            take(p, "mc_samples", s.mc_samples);
        }
        if (j.contains("sweep")) {
            const auto& p = j.at("sweep");
            take(p, "n", s.sweep_n);
            take(p, "l", s.sweep_l);
            take(p, "m", s.sweep_m);
        }
        take(j, "seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("config: ") + e.what());
    }
    if (s.name.empty()) s.name = s.system;
    s.validate();
    return s;
}

BenchmarkSpec resolve_spec(const std::string& name_or_path) {
    const auto names = benchmark_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return benchmark(name_or_path);
    std::ifstream in(name_or_path);
    if (!in) throw ArgumentError("'" + name_or_path + "' is neither a benchmark nor a readable config file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError("config " + name_or_path + ": " + e.what());
    }
    return spec_from_json(j);
}

SmoothSystem build_system(const BenchmarkSpec& spec) {
    if (spec.system_config) return system_from_config(*spec.system_config);
    return make_system(spec.system, spec.system_params);
}

InvariantMeasure build_measure(const BenchmarkSpec& spec) { return make_measure(spec.measure, spec.measure_params); }

RegularityProfile build_profile(const BenchmarkSpec& spec, const SmoothSystem& sys) {
    if (spec.profile == "interval") {
        if (sys.dim() != 1) throw ArgumentError("profile 'interval' needs a 1-D system");
        return RegularityProfile::for_interval(sys.domain, spec.b, spec.policy);
    }
    RegularRadiusConfig cfg;
    cfg.b = spec.b;
    cfg.policy = spec.policy;
    return RegularityProfile::tabulated(sys.domain, cfg, spec.tabulated_min_threshold, spec.tabulated_samples,
                                        spec.tabulated_resolution);
}

// ---------------------------------------------------------------------------
// Partition selection shared by the pipeline and the sweep

namespace {

struct PartitionChoice {
    AdaptivePartition partition;
    int l1 = 0;
    int l = 0;
    std::optional<int> l_min;
    int L = 0;
    bool l_capped = false;
};

PartitionChoice choose_partition(const BenchmarkSpec& spec, const SmoothSystem& sys, const InvariantMeasure& mu,
                                 const RegularityProfile& profile, int n, int l, int m, const Exec& exec) {
    const int d = sys.dim();
    const DistortionParams& dp = sys.distortion;
    PartitionChoice c;
    if (spec.l1 > 0) {
        c.l1 = spec.l1;
    } else {
        const auto l1 = minimal_l1(m, dp.alpha, dp.C, dp.a, d);
        if (!l1) throw DomainError("no admissible l1 <= 128 for m = " + std::to_string(m));
        c.l1 = *l1;
    }
    BuildOptions bo;
    bo.sample_budget = spec.partition_samples;
    bo.seed = spec.seed;
    bo.exec = exec;
    const PartitionConstants k = partition_constants(spec.b, d);
    const int s_max = std::max(spec.s_max, n);
    if (l >= 0) {
        c.l = l;
        c.partition = build_partition(sys, mu, profile, LevelParams::from(dp, m, n, c.l1, l, spec.b, s_max), bo);
        return c;
    }
    // l from the l-constraints at the measured L; nets do not depend on l,
    // so the coarse build only serves to measure s_B.
    AdaptivePartition coarse = build_partition(sys, mu, profile, LevelParams::from(dp, m, n, c.l1, 0, spec.b, s_max), bo);
    DecompositionOptions dopt;
    dopt.exec = exec;
    dopt.exterior_samples = 2;
    const DecompositionReport pre = decomposition_report(sys, profile, coarse, k, dopt);
    c.L = pre.L;
    c.l_min = pre.l_min;
    const int cap = 62 / d;
    c.l = std::min(pre.l_min.value_or(cap), cap);
    c.l_capped = !pre.l_min || *pre.l_min > cap;
    c.partition = build_partition(sys, mu, profile, LevelParams::from(dp, m, n, c.l1, c.l, spec.b, s_max), bo);
    return c;
}

double uncovered_fraction(const std::vector<Itinerary>& its) {
    std::size_t total = 0, uncovered = 0;
    for (const auto& it : its) {
        for (const auto& s : it.symbols) {
            ++total;
            uncovered += s == Symbol::uncovered();
        }
    }
    return total ? static_cast<double>(uncovered) / static_cast<double>(total) : 0.0;
}

nlohmann::json estimate_json(const Estimate& e) {
    nlohmann::json j = {{"value", e.value}, {"stderr", e.std_error}, {"diverged", e.diverged}, {"method", e.method}};
    if (!std::isfinite(e.value)) j["value"] = nullptr;
    return j;
}

nlohmann::json point_json(const Point& p) { return std::vector<double>(p.data(), p.data() + p.size()); }

} // namespace

// ---------------------------------------------------------------------------
// Sweep

SweepResult sweep(const BenchmarkSpec& spec, const std::vector<int>& ns, const std::vector<int>& ls,
                  const std::vector<int>& ms, const Exec& exec) {
    SweepResult out;
    if (ns.empty() || ls.empty() || ms.empty()) return out;
    const SmoothSystem sys = build_system(spec);
    const InvariantMeasure mu = build_measure(spec);
    const RegularityProfile profile = build_profile(spec, sys);
    const PartitionConstants k = partition_constants(spec.b, sys.dim());

    for (int m : ms) {
        // Reference rate per application of f, independent of (n, l).
        double ref_rate = 0.0, ref_se = 0.0;
        bool ref_under = true;
        std::string ref_error;
        if (!spec.reference.empty()) {
            try {
                ItineraryOptions io;
                io.n_orbits = spec.itinerary_orbits;
                io.length = spec.itinerary_length;
                io.step = m;
                io.seed = spec.seed;
                io.exec = exec;
                BlockEntropyOptions bo;
                bo.t_max = spec.t_max;
                const auto be = block_entropy(sys, mu, word_symbolizer(reference_symbolizer(spec.reference), sys, m), io, bo);
                ref_rate = be.slope / m;
                ref_se = be.std_error / m;
                ref_under = be.slope_undersampled;
            } catch (const std::exception& e) {
                ref_error = e.what();
            }
        }
        for (int n : ns) {
            for (int l : ls) {
                SweepRow row;
                row.n = n;
                row.l = l;
                row.m = m;
                row.reference_rate = ref_rate;
                row.reference_rate_std_error = ref_se;
                row.reference_undersampled = ref_under;
                try {
                    if (!ref_error.empty()) throw Error(ref_error);
                    PartitionChoice c = choose_partition(spec, sys, mu, profile, n, l, m, exec);
                    row.l = c.l;
                    row.l1 = c.l1;
                    const AdaptivePartition& P = c.partition;
                    const PartitionLevel* lv = P.level(n);
                    row.empty = lv == nullptr || lv->samples == 0;
                    row.cells = P.cell_count();
                    row.truncation_mass = P.truncation_mass();
                    const PartitionEntropy pe = partition_entropy(P, k);
                    row.H = pe.H;
                    row.H_bound = pe.bound + pe.truncation_correction;
                    {
                        ItineraryOptions io;
                        io.n_orbits = spec.itinerary_orbits;
                        io.length = spec.itinerary_length;
                        io.step = m;
                        io.seed = spec.seed;
                        io.exec = exec;
                        BlockEntropyOptions bo;
                        bo.t_max = spec.t_max;
                        const auto its = itineraries(sys, mu, adaptive_symbolizer(P, sys, profile), io);
                        const auto be = block_entropy(its, bo);
                        row.adaptive_rate = be.slope / m;
                        row.adaptive_rate_std_error = be.std_error / m;
                        row.adaptive_undersampled = be.slope_undersampled;
                        row.adaptive_uncovered_fraction = uncovered_fraction(its);
                    }
                    DecompositionOptions dopt;
                    dopt.exec = exec;
                    dopt.seed = spec.seed;
                    dopt.exterior_samples = spec.exterior_samples;
                    const DecompositionReport dr = decomposition_report(sys, profile, P, k, dopt);
                    row.conditional = dr.conditional;
                    row.conditional_std_error = dr.conditional_std_error;
                    row.exterior_rate = dr.exterior_integral / m;
                    row.exterior_rate_std_error = dr.exterior_integral_std_error / m;
                    row.l_min = dr.l_min;
                    row.l_admissible = dr.l_admissible;
                    row.terms = dr.terms;
                    row.decomposition_within = dr.within_bounds();
                } catch (const std::exception& e) {
                    row.ok = false;
                    row.error = e.what();
                }
                out.rows.push_back(row);
            }
        }
    }

    // Trend annotations.
    std::map<std::pair<int, int>, std::vector<const SweepRow*>> by_nm;
    for (const auto& r : out.rows) {
        if (r.ok) by_nm[{r.n, r.m}].push_back(&r);
        if (r.empty) {
            const std::string a = "n=" + std::to_string(r.n) + " m=" + std::to_string(r.m) +
                                  ": level n holds no samples (empty partition level)";
            if (std::find(out.annotations.begin(), out.annotations.end(), a) == out.annotations.end())
                out.annotations.push_back(a);
        }
    }
    for (auto& [key, rows] : by_nm) {
        std::sort(rows.begin(), rows.end(), [](const SweepRow* a, const SweepRow* b) { return a->l < b->l; });
        bool monotone = true;
        for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i]->H >= rows[i - 1]->H - 1e-12;
        out.annotations.push_back("n=" + std::to_string(key.first) + " m=" + std::to_string(key.second) +
                                  (monotone ? ": partition entropy nondecreasing in l" : ": partition entropy NOT monotone in l"));
    }
    std::map<int, std::pair<double, double>> rate_by_m;
    for (const auto& r : out.rows) {
        if (r.ok && !r.reference_undersampled) rate_by_m[r.m] = {r.reference_rate, r.reference_rate_std_error};
    }
    if (rate_by_m.size() >= 2) {
        bool agree = true;
        for (const auto& [ma, a] : rate_by_m) {
            for (const auto& [mb, b] : rate_by_m) {
                if (ma < mb) agree = agree && std::abs(a.first - b.first) <= 3.0 * std::hypot(a.second, b.second) + 1e-12;
            }
        }
        out.annotations.push_back(agree ? "reference rates per application agree across m within 3 sigma"
                                        : "reference rates per application differ across m beyond 3 sigma");
    }
    return out;
}

nlohmann::json to_json(const SweepResult& s) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : s.rows) {
        rows.push_back({{"n", r.n},
                        {"l", r.l},
                        {"m", r.m},
                        {"l1", r.l1},
                        {"ok", r.ok},
                        {"empty", r.empty},
                        {"error", r.error},
                        {"cells", r.cells},
                        {"truncation_mass", r.truncation_mass},
                        {"H", r.H},
                        {"H_bound", r.H_bound},
                        {"conditional", r.conditional},
                        {"conditional_stderr", r.conditional_std_error},
                        {"reference_rate", r.reference_rate},
                        {"reference_rate_stderr", r.reference_rate_std_error},
                        {"reference_undersampled", r.reference_undersampled},
                        {"adaptive_rate", r.adaptive_rate},
                        {"adaptive_rate_stderr", r.adaptive_rate_std_error},
                        {"adaptive_undersampled", r.adaptive_undersampled},
                        {"adaptive_uncovered_fraction", r.adaptive_uncovered_fraction},
                        {"exterior_rate", r.exterior_rate},
                        {"exterior_rate_stderr", r.exterior_rate_std_error},
                        {"l_min", r.l_min ? nlohmann::json(*r.l_min) : nlohmann::json(nullptr)},
                        {"l_admissible", r.l_admissible},
                        {"I", r.terms.I},
                        {"II11", r.terms.II11},
                        {"II12", r.terms.II12},
                        {"II2", r.terms.II2},
                        {"decomposition_within_bounds", r.decomposition_within}});
    }
    return {{"rows", rows}, {"annotations", s.annotations}};
}

void write_sweep_csv(std::ostream& out, const SweepResult& s) {
    out << "n,l,m,l1,ok,empty,cells,truncation_mass,H,H_bound,conditional,conditional_stderr,reference_rate,"
           "reference_rate_stderr,adaptive_rate,adaptive_rate_stderr,adaptive_undersampled,adaptive_uncovered_fraction,exterior_rate,exterior_rate_stderr,l_admissible,I,II11,II12,II2\n";
    out.precision(12);
    for (const auto& r : s.rows) {
        out << r.n << ',' << r.l << ',' << r.m << ',' << r.l1 << ',' << r.ok << ',' << r.empty << ',' << r.cells << ','
            << r.truncation_mass << ',' << r.H << ',' << r.H_bound << ',' << r.conditional << ','
            << r.conditional_std_error << ',' << r.reference_rate << ',' << r.reference_rate_std_error << ','
            << r.adaptive_rate << ',' << r.adaptive_rate_std_error << ',' << r.adaptive_undersampled << ','
            << r.adaptive_uncovered_fraction << ','
            << r.exterior_rate << ',' << r.exterior_rate_std_error << ',' << r.l_admissible << ',' << r.terms.I << ','
            << r.terms.II11 << ',' << r.terms.II12 << ',' << r.terms.II2 << '\n';
    }
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

constexpr double kMaxUncoveredForLhs = 0.05;

class Stopwatch {
public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_;
};

std::string utc_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

} // namespace

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json j = body;
    nlohmann::json t = nlohmann::json::array();
    double total = 0.0;
    for (const auto& s : timings) {
        t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
        total += s.seconds;
    }
    j["runtime"] = {{"workers", workers}, {"timestamp", utc_timestamp()}, {"stages", t}, {"total_seconds", total}};
    return j;
}

VerificationReport run_verification(const BenchmarkSpec& spec, const RunOptions& options) {
    spec.validate();
    VerificationReport rep;
    rep.spec = spec;
    rep.workers = options.exec.workers;
    const Exec& exec = options.exec;
    auto& body = rep.body;
    body["schema_version"] = kSchemaVersion;
    body["benchmark"] = spec_to_json(spec);
    body["stages"] = nlohmann::json::object();
    auto& stages = body["stages"];

    auto wanted = [&](const std::string& s) {
        return options.stages.empty() || std::find(options.stages.begin(), options.stages.end(), s) != options.stages.end();
    };

    std::optional<SmoothSystem> sys;
    std::optional<InvariantMeasure> mu;
    std::optional<RegularityProfile> profile;
    std::optional<PartitionChoice> choice;
    std::optional<ConditionalEntropyEstimate> ref_cond, adaptive_cond;
    bool have_rhs = false;
    double adaptive_uncovered = 1.0;

    IntegrateOptions io;
    io.mc_samples = spec.mc_samples;
    io.seed = spec.seed;
    io.exec = exec;

    auto run_stage = [&](const std::string& name, auto&& fn) -> bool {
        if (rep.fatal_stage) return false;
        Stopwatch sw;
        try {
            fn();
        } catch (const std::exception& e) {
            rep.fatal_stage = name;
            rep.fatal_message = e.what();
        }
        rep.timings.push_back({name, sw.seconds()});
        return !rep.fatal_stage;
    };

    run_stage("setup", [&] {
        sys = build_system(spec);
        mu = build_measure(spec);
        if (mu->dim() != sys->dim()) throw ArgumentError("measure and system dimensions differ");
        profile = build_profile(spec, *sys);
    });

    if (wanted("invariance"))
        run_stage("invariance", [&] {
            const InvarianceReport r = check_invariance(*mu, *sys, default_test_functions(sys->domain), io);
            nlohmann::json defects = nlohmann::json::object();
            for (const auto& [name, e] : r.defects) defects[name] = estimate_json(e);
            stages["invariance"] = {{"max_defect", r.max_defect}, {"tolerance", r.tolerance}, {"passes", r.passes},
                                    {"method", r.method},         {"excluded_mass", r.excluded_mass}, {"defects", defects}};
        });

    if (wanted("condition_B"))
        run_stage("condition_B", [&] {
            const IntegrabilityReport r = condition_B_report(*mu, *sys, *profile, io);
            nlohmann::json comps = nlohmann::json::object();
            for (const auto& c : r.components) comps[c.name] = estimate_json(c.estimate);
            const BranchCoverage bc = d0_branch_coverage(*mu, sys->domain, 100000, spec.seed);
            stages["condition_B"] = {{"components", comps},
                                     {"max_integral", estimate_json(r.max_integral)},
                                     {"method", r.method},
                                     {"pass", r.pass},
                                     {"failed_component", r.failed_component},
                                     {"excluded_mass", r.excluded_mass},
                                     {"d0_infinity_branch_fraction", bc.infinity_fraction}};
        });

    if (wanted("condition_A"))
        run_stage("condition_A", [&] {
            DistortionPlan plan;
            plan.samples = spec.distortion_samples;
            plan.seed = spec.seed;
            plan.exec = exec;
            const DistortionReport r = check_distortion_A(*sys, sys->distortion, plan);
            stages["condition_A"] = {{"params", {{"alpha", sys->distortion.alpha}, {"C", sys->distortion.C}, {"a", sys->distortion.a}}},
                                     {"max_ratio", r.max_ratio},
                                     {"passes", r.passes},
                                     {"status", r.passes ? "not refuted" : "refuted"},
                                     {"evaluated", r.evaluated},
                                     {"skipped", r.skipped},
                                     {"witness_x", r.witness_x.size() ? point_json(r.witness_x) : nlohmann::json(nullptr)},
                                     {"witness_y", r.witness_y.size() ? point_json(r.witness_y) : nlohmann::json(nullptr)}};
        });

    if (wanted("spectrum"))
        run_stage("spectrum", [&] {
            EnsembleOptions eo;
            eo.horizon = spec.horizon;
            eo.n_orbits = spec.rhs_orbits;
            eo.reorth_every = spec.reorth_every;
            eo.seed = spec.seed;
            eo.exec = exec;
            rep.spectrum = positive_sum_integral(*sys, *mu, eo);
            rep.rhs = rep.spectrum.mean;
            rep.rhs_std_error = rep.spectrum.std_error;
            have_rhs = true;
            nlohmann::json j = spectrum_summary_json(rep.spectrum, spec.horizon);
            // Mean exponents across orbits.
            std::vector<double> mean_exp;
            std::size_t used = 0;
            for (const auto& r : rep.spectrum.rows) {
                if (r.escaped) continue;
                if (mean_exp.empty()) mean_exp.assign(r.exponents.size(), 0.0);
                for (std::size_t i = 0; i < r.exponents.size(); ++i) mean_exp[i] += r.exponents[i];
                ++used;
            }
            for (double& v : mean_exp) v = used ? v / static_cast<double>(used) : 0.0;
            j["mean_exponents"] = mean_exp;
            if (sys->dim() == 1 && mu->quadrature_capable()) {
                IntegrateOptions qo = io;
                qo.breakpoints = sys->breakpoints;
                const SmoothSystem& s = *sys;
                const Estimate q =
                    integrate(*mu, [&s](const Point& x) { return std::log(std::abs(s.jacobian(x)(0, 0))); }, qo);
                const double oracle = std::max(q.value, 0.0);
                j["quadrature_check"] = {{"integral_log_derivative", q.value},
                                         {"positive_part", oracle},
                                         {"relative_difference", oracle > 0 ? std::abs(rep.rhs - oracle) / oracle : 0.0}};
            }
            stages["spectrum"] = j;
        });

    if (wanted("partition"))
        run_stage("partition", [&] {
            choice = choose_partition(spec, *sys, *mu, *profile, spec.n, spec.l, spec.m, exec);
            const PartitionConstants k = partition_constants(spec.b, sys->dim());
            const PartitionEntropy pe = partition_entropy(choice->partition, k);
            const PartitionDiagnostics dg = diagnose_partition(choice->partition, k, spec.diagnose_points, exec);
            nlohmann::json j = partition_to_json(choice->partition, pe, dg, false);
            j["l_selection"] = {{"l", choice->l},
                                {"l1", choice->l1},
                                {"L", choice->L},
                                {"L_method", "99.9th percentile of s_B"},
                                {"l_min", choice->l_min ? nlohmann::json(*choice->l_min) : nlohmann::json(nullptr)},
                                {"l_capped", choice->l_capped},
                                {"requested_l", spec.l}};
            j["constants"] = {{"C01", k.C01}, {"C0", k.C0}, {"C2", k.C2}, {"C3", k.C3}, {"c", k.c}, {"overlap", k.overlap}};
            stages["partition"] = j;
            rep.partition = choice->partition;
        });

    if (wanted("entropy"))
        run_stage("entropy", [&] {
            nlohmann::json j;
            ItineraryOptions it;
            it.n_orbits = spec.itinerary_orbits;
            it.length = spec.itinerary_length;
            it.seed = spec.seed;
            it.exec = exec;
            BlockEntropyOptions bo;
            bo.t_max = spec.t_max;
            if (!spec.reference.empty()) {
                const Symbolizer ref = reference_symbolizer(spec.reference);
                rep.reference_block = block_entropy(*sys, *mu, ref, it, bo);
                ref_cond = conditional_entropy(*sys, *mu, ref, 1, spec.conditional_samples, spec.seed, exec);
                j["reference"] = {{"partition", spec.reference},
                                  {"block", ruelle::to_json(*rep.reference_block)},
                                  {"conditional", ruelle::to_json(*ref_cond)},
                                  {"chain_check",
                                   ref_cond->value >= rep.reference_block->slope -
                                                          3.0 * std::hypot(ref_cond->std_error, rep.reference_block->std_error)}};
            }
            if (choice) {
                const Symbolizer ad = adaptive_symbolizer(choice->partition, *sys, *profile);
                ItineraryOptions ia = it;
                ia.step = spec.m;
                const auto its = itineraries(*sys, *mu, ad, ia);
                rep.adaptive_block = block_entropy(its, bo);
                const double unc = uncovered_fraction(its);
                adaptive_uncovered = unc;
                adaptive_cond = conditional_entropy(*sys, *mu, ad, spec.m, spec.conditional_samples, spec.seed, exec);
                j["adaptive"] = {{"block", ruelle::to_json(*rep.adaptive_block)},
                                 {"conditional", ruelle::to_json(*adaptive_cond)},
                                 {"step", spec.m},
                                 {"uncovered_fraction", unc},
                                 {"chain_check",
                                  adaptive_cond->value >= rep.adaptive_block->slope -
                                                              3.0 * std::hypot(adaptive_cond->std_error, rep.adaptive_block->std_error)}};
            }
            stages["entropy"] = j;
        });

    if (wanted("decomposition") && choice)
        run_stage("decomposition", [&] {
            const PartitionConstants k = partition_constants(spec.b, sys->dim());
            DecompositionOptions dopt;
            dopt.seed = spec.seed;
            dopt.exec = exec;
            dopt.exterior_samples = spec.exterior_samples;
            const DecompositionReport dr = decomposition_report(*sys, *profile, choice->partition, k, dopt);
            const ReachableSurvey rs = survey_reachable_cells(*sys, *profile, choice->partition, k.C3, spec.reachable_cells,
                                                              spec.reachable_probes, spec.seed, exec);
            nlohmann::json j = ruelle::to_json(dr);
            j["reachable"] = ruelle::to_json(rs);
            j["L_note"] = "L is a sampled percentile surrogate for the tail condition";
            stages["decomposition"] = j;
        });

    if (wanted("sweep") && options.run_sweep)
        run_stage("sweep", [&] {
            std::vector<int> ns = spec.sweep_n.empty() ? std::vector<int>{spec.n} : spec.sweep_n;
            std::vector<int> ls = spec.sweep_l.empty() ? std::vector<int>{0, -1} : spec.sweep_l;
            rep.sweep = sweep(spec, ns, ls, spec.sweep_m, exec);
            stages["sweep"] = to_json(rep.sweep);
        });

    // Also runs after a fatal stage so the record always carries lhs / rhs / margin.
    auto margin = [&] {
        struct Candidate {
            std::string source;
            double value, se;
        };
        std::vector<Candidate> cands;
        if (rep.reference_block && !rep.reference_block->slope_undersampled)
            cands.push_back({"block_reference", rep.reference_block->slope, rep.reference_block->std_error});
        // Adaptive cells come from finitely many build samples; when most
        // orbit points fall outside every net cube the estimate describes
        // the lumped remainder rather than the partition.
        if (rep.adaptive_block && !rep.adaptive_block->slope_undersampled &&
            adaptive_uncovered <= kMaxUncoveredForLhs)
            cands.push_back({"block_adaptive", rep.adaptive_block->slope / spec.m, rep.adaptive_block->std_error / spec.m});
        if (cands.empty() && rep.reference_block)
            cands.push_back({"block_reference_undersampled", rep.reference_block->slope, rep.reference_block->std_error});
        nlohmann::json lhs = nlohmann::json::object();
        nlohmann::json cj = nlohmann::json::array();
        for (const auto& c : cands) cj.push_back({{"source", c.source}, {"value", c.value}, {"stderr", c.se}});
        lhs["candidates"] = cj;
        if (!cands.empty()) {
            const auto best = std::max_element(cands.begin(), cands.end(),
                                               [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
            rep.lhs_source = best->source;
            rep.lhs_best = best->value;
            rep.lhs_std_error = best->se;
        } else {
            rep.lhs_source = "none";
        }
        lhs["best"] = rep.lhs_best;
        lhs["stderr"] = rep.lhs_std_error;
        lhs["source"] = rep.lhs_source;
        if (ref_cond) lhs["conditional_reference"] = ref_cond->value;
        if (adaptive_cond) lhs["conditional_adaptive"] = adaptive_cond->value / spec.m;
        body["lhs"] = lhs;
        body["rhs"] = {{"value", rep.rhs}, {"stderr", rep.rhs_std_error}, {"available", have_rhs}};
        if (have_rhs && !cands.empty()) {
            rep.margin = rep.rhs - rep.lhs_best;
            rep.combined_std_error = std::hypot(rep.rhs_std_error, rep.lhs_std_error);
            rep.violation = rep.margin < -3.0 * rep.combined_std_error - 1e-12;
        }
        body["margin"] = {{"value", rep.margin},
                          {"combined_stderr", rep.combined_std_error},
                          {"threshold", -3.0 * rep.combined_std_error},
                          {"violation", rep.violation},
                          {"evaluated", have_rhs && !cands.empty()}};
    };
    if (rep.fatal_stage) margin();
    else run_stage("margin", margin);

    body["status"] = {{"ok", rep.ok()},
                      {"violation", rep.violation},
                      {"fatal_stage", rep.fatal_stage ? nlohmann::json(*rep.fatal_stage) : nlohmann::json(nullptr)},
                      {"fatal_message", rep.fatal_message}};
    return rep;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string level_colour(int s, int lo, int hi) {
    static const char* palette[] = {"#440154", "#46327e", "#365c8d", "#277f8e", "#1fa187",
                                    "#4ac16d", "#a0da39", "#fde725", "#f89540", "#cc4778"};
    const int span = std::max(1, hi - lo);
    const int idx = std::clamp((s - lo) * 9 / span, 0, 9);
    return palette[idx];
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

} // namespace

std::string partition_svg(const AdaptivePartition& P, double width) {
    if (P.dim() != 2) throw ArgumentError("partition_svg: needs a 2-D partition");
    std::vector<Symbol> cells;
    for (const auto& s : P.sample_symbols()) {
        if (!s.is_special()) cells.push_back(s);
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    double x0 = kInf, y0 = kInf, x1 = -kInf, y1 = -kInf;
    for (const auto& p : P.samples()) {
        x0 = std::min(x0, p[0]);
        x1 = std::max(x1, p[0]);
        y0 = std::min(y0, p[1]);
        y1 = std::max(y1, p[1]);
    }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    const double height = width * (y1 - y0) / (x1 - x0);
    auto X = [&](double x) { return (x - x0) / (x1 - x0) * width; };
    auto Y = [&](double y) { return height - (y - y0) / (y1 - y0) * height; };
    const int lo = P.params().n, hi = P.params().s_max;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
       << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& c : cells) {
        const BoxElement b = P.cell_box(c);
        const double cx = b.anchor[0] + b.center_offset[0], cy = b.anchor[1] + b.center_offset[1];
        const double hx = b.half_widths[0], hy = b.half_widths[1];
        os << "<polygon class=\"cell\" data-level=\"" << c.level() << "\" fill=\"" << level_colour(c.level(), lo, hi)
           << "\" stroke=\"none\" points=\"" << fmt(X(cx - hx)) << ',' << fmt(Y(cy - hy)) << ' ' << fmt(X(cx + hx)) << ','
           << fmt(Y(cy - hy)) << ' ' << fmt(X(cx + hx)) << ',' << fmt(Y(cy + hy)) << ' ' << fmt(X(cx - hx)) << ','
           << fmt(Y(cy + hy)) << "\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string convergence_svg(const VerificationReport& rep, double width) {
    const double height = width * 0.75;
    const double panel = height / 2.0;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\"" << fmt(height) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    auto polyline = [&](const std::vector<std::pair<double, double>>& pts, double xlo, double xhi, double ylo,
                        double yhi, double top, const char* colour, const char* cls) {
        if (pts.empty()) return;
        os << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : pts) {
            const double px = 40.0 + (x - xlo) / std::max(xhi - xlo, 1e-12) * (width - 60.0);
            const double py = top + panel - 20.0 - (y - ylo) / std::max(yhi - ylo, 1e-12) * (panel - 40.0);
            os << fmt(px) << ',' << fmt(py) << ' ';
        }
        os << "\"/>\n";
    };

    // Panel 1: entropy against word length.
    if (rep.reference_block) {
        std::vector<std::pair<double, double>> per_t, inc;
        double ylo = rep.rhs, yhi = rep.rhs;
        for (const auto& r : rep.reference_block->rows) {
            per_t.emplace_back(r.t, r.H_per_t);
            ylo = std::min(ylo, r.H_per_t);
            yhi = std::max(yhi, r.H_per_t);
            if (std::isfinite(r.increment)) {
                inc.emplace_back(r.t, r.increment);
                ylo = std::min(ylo, r.increment);
                yhi = std::max(yhi, r.increment);
            }
        }
        const double tmax = rep.reference_block->rows.empty() ? 1.0 : rep.reference_block->rows.back().t;
        ylo -= 0.05 * (yhi - ylo + 1e-3);
        yhi += 0.05 * (yhi - ylo + 1e-3);
        polyline(per_t, 1.0, tmax, ylo, yhi, 0.0, "#1f77b4", "entropy-per-t");
        polyline(inc, 1.0, tmax, ylo, yhi, 0.0, "#ff7f0e", "entropy-increment");
        polyline({{1.0, rep.rhs}, {tmax, rep.rhs}}, 1.0, tmax, ylo, yhi, 0.0, "#2ca02c", "rhs");
        os << "<text x=\"45\" y=\"16\" font-size=\"12\">H_t/t (blue), H_{t+1}-H_t (orange), rhs (green)</text>\n";
    }
    // Panel 2: running mean of per-orbit positive sums.
    std::vector<std::pair<double, double>> run;
    double acc = 0.0;
    std::size_t k = 0;
    double ylo = kInf, yhi = -kInf;
    for (const auto& r : rep.spectrum.rows) {
        if (r.escaped) continue;
        acc += r.positive_sum;
        ++k;
        const double v = acc / static_cast<double>(k);
        run.emplace_back(static_cast<double>(k), v);
        ylo = std::min(ylo, v);
        yhi = std::max(yhi, v);
    }
    if (!run.empty()) {
        const double pad = 0.05 * (yhi - ylo) + 1e-3;
        polyline(run, 1.0, std::max(2.0, static_cast<double>(k)), ylo - pad, yhi + pad, panel, "#d62728", "exponent-running-mean");
        os << "<text x=\"45\" y=\"" << fmt(panel + 16.0) << "\" font-size=\"12\">running mean of positive exponent sums</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Emit

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open " + p.string() + " for writing");
    out << content;
    if (!out) throw Error("failed writing " + p.string());
}

} // namespace

std::vector<std::filesystem::path> emit(const VerificationReport& rep, const std::filesystem::path& dir,
                                        const std::vector<EmitFormat>& formats) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    auto has = [&](EmitFormat f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };

    if (has(EmitFormat::json)) {
        write_file(dir / "report.json", rep.to_json().dump(2) + "\n");
        written.push_back(dir / "report.json");
    }
    if (has(EmitFormat::csv)) {
        std::ostringstream s;
        s.precision(12);
        s << "benchmark,seed,lhs,lhs_stderr,lhs_source,rhs,rhs_stderr,margin,combined_stderr,violation,fatal_stage\n";
        s << rep.spec.name << ',' << rep.spec.seed << ',' << rep.lhs_best << ',' << rep.lhs_std_error << ','
          << rep.lhs_source << ',' << rep.rhs << ',' << rep.rhs_std_error << ',' << rep.margin << ','
          << rep.combined_std_error << ',' << (rep.violation ? 1 : 0) << ',' << rep.fatal_stage.value_or("") << '\n';
        write_file(dir / "summary.csv", s.str());
        written.push_back(dir / "summary.csv");

        std::ostringstream sp;
        write_spectrum_csv(sp, rep.spectrum, rep.spec.seed);
        write_file(dir / "spectrum.csv", sp.str());
        written.push_back(dir / "spectrum.csv");

        std::ostringstream et;
        if (rep.reference_block) write_block_entropy_csv(et, *rep.reference_block);
        else et << "t,H_t,H_t_over_t,increment,words,distinct\n";
        write_file(dir / "entropy_t.csv", et.str());
        written.push_back(dir / "entropy_t.csv");

        std::ostringstream sw;
        write_sweep_csv(sw, rep.sweep);
        write_file(dir / "sweep.csv", sw.str());
        written.push_back(dir / "sweep.csv");
    }
    if (has(EmitFormat::svg)) {
        write_file(dir / "convergence.svg", convergence_svg(rep));
        written.push_back(dir / "convergence.svg");
        if (rep.partition && rep.partition->dim() == 2) {
            write_file(dir / "partition.svg", partition_svg(*rep.partition));
            written.push_back(dir / "partition.svg");
        }
    }
    return written;
}

} // namespace ruelle
