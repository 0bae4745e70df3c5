#pragma once

// Benchmark registry, the verification pipeline h_μ(f) <= ∫ Σ λ_i⁺ dμ,
// parameter sweeps and report emission (JSON, CSV, SVG).

#include "ruelle/entropy.hpp"
#include "ruelle/geometry.hpp"
#include "ruelle/lyapunov.hpp"
#include "ruelle/measure.hpp"
#include "ruelle/parallel.hpp"
#include "ruelle/partition.hpp"
#include "ruelle/system.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ruelle {

inline constexpr int kSchemaVersion = 1;

struct BenchmarkSpec {
    std::string name;
    /// Built-in system name with params, or a full system config
    /// ({"kind": "rational" | "linear" | "builtin", ...}).
    std::string system;
    nlohmann::json system_params = nlohmann::json::object();
    std::optional<nlohmann::json> system_config;
    std::string measure;
    nlohmann::json measure_params = nlohmann::json::object();
    /// Name of the reference partition; empty for none.
    std::string reference;

    // Regularity profile.
    double b = 1.0;
    RadiusPolicy policy = RadiusPolicy::pure_norm;
    /// "interval" (closed forms, 1-D) or "tabulated" (grid estimates).
    std::string profile = "interval";
    double tabulated_min_threshold = 1e-3;
    std::size_t tabulated_samples = 2000;
    double tabulated_resolution = 0.02;

    // Partition parameters; l1 <= 0 picks the minimal admissible l1 and
    // l < 0 the minimal l meeting the l-constraints.
    int m = 1;
    int n = 2;
    int l1 = 0;
    int l = -1;
    int s_max = 6;

    // Budgets.
    long horizon = 100000;
    std::size_t rhs_orbits = 16;
    int reorth_every = 1;
    std::size_t itinerary_orbits = 100;
    std::size_t itinerary_length = 1000;
    int t_max = 10;
    std::size_t conditional_samples = 100000;
    std::size_t partition_samples = 50000;
    std::size_t diagnose_points = 10000;
    std::size_t reachable_cells = 1000;
    std::size_t reachable_probes = 1000;
    std::size_t exterior_samples = 2000;
    std::size_t distortion_samples = 10000;
    std::size_t mc_samples = 200000;

    // Sweep grid; an empty l list means {0, minimal admissible}.
    std::vector<int> sweep_n{};
    std::vector<int> sweep_l{};
    std::vector<int> sweep_m{1, 2, 4};

    std::uint64_t seed = 0;

    void validate() const;
};

/// Registered benchmarks: doubling, tent, gauss, logistic4,
/// gauss_noncompact, doubling2d.
std::vector<std::string> benchmark_names();
BenchmarkSpec benchmark(const std::string& name);

/// {"schema_version": 1, "benchmark": base name (optional), ...overrides}.
BenchmarkSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const BenchmarkSpec& spec);
/// A registered name, or a path to a JSON config file.
BenchmarkSpec resolve_spec(const std::string& name_or_path);

SmoothSystem build_system(const BenchmarkSpec& spec);
InvariantMeasure build_measure(const BenchmarkSpec& spec);
RegularityProfile build_profile(const BenchmarkSpec& spec, const SmoothSystem& sys);

struct SweepRow {
    int n = 0;
    int l = 0;
    int m = 1;
    int l1 = 0;
    bool ok = true;
    bool empty = false;
    std::string error;
    std::size_t cells = 0;
    double truncation_mass = 0.0;
    double H = 0.0;
    double H_bound = 0.0;
    double conditional = 0.0;
    double conditional_std_error = 0.0;
    /// Per application of f.
    double reference_rate = 0.0;
    double reference_rate_std_error = 0.0;
    bool reference_undersampled = false;
    /// Block slope over the adaptive partition read every m steps, per application.
    double adaptive_rate = 0.0;
    double adaptive_rate_std_error = 0.0;
    bool adaptive_undersampled = false;
    /// Itinerary points outside every net cube at their level.
    double adaptive_uncovered_fraction = 0.0;
    double exterior_rate = 0.0;
    double exterior_rate_std_error = 0.0;
    std::optional<int> l_min;
    bool l_admissible = false;
    DecompositionTerms terms;
    bool decomposition_within = true;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> annotations;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct VerificationReport {
    BenchmarkSpec spec;
    int workers = 1;

    double rhs = 0.0;
    double rhs_std_error = 0.0;
    std::string lhs_source;
    double lhs_best = 0.0;
    double lhs_std_error = 0.0;
    double margin = 0.0;
    double combined_std_error = 0.0;
    bool violation = false;

    std::optional<std::string> fatal_stage;
    std::string fatal_message;

    /// Full record without the runtime block.
    nlohmann::json body;
    std::vector<StageTiming> timings;

    EnsembleEstimate spectrum;
    std::optional<BlockEntropyEstimate> reference_block;
    std::optional<BlockEntropyEstimate> adaptive_block;
    SweepResult sweep;
    std::optional<AdaptivePartition> partition;

    bool ok() const { return !fatal_stage && !violation; }
    /// body plus a "runtime" block (timings, workers, timestamp).
    nlohmann::json to_json() const;
};

struct RunOptions {
    Exec exec{};
    bool run_sweep = true;
    /// Stages to run; empty means all.
    std::vector<std::string> stages;
};

/// Pipeline: invariance, condition_B, condition_A, spectrum, partition,
/// entropy, decomposition, sweep, margin. A failing stage stops the run and
/// is recorded with its name; the report keeps what finished.
VerificationReport run_verification(const BenchmarkSpec& spec, const RunOptions& options = {});

/// Per-(n, l, m) figures. Failures are recorded per row.
SweepResult sweep(const BenchmarkSpec& spec, const std::vector<int>& ns, const std::vector<int>& ls,
                  const std::vector<int>& ms, const Exec& exec = {});
nlohmann::json to_json(const SweepResult& s);
void write_sweep_csv(std::ostream& out, const SweepResult& s);

/// d = 2 only: one polygon per occupied cell, filled by level.
std::string partition_svg(const AdaptivePartition& partition, double width = 640.0);
/// H_t/t and H_{t+1}-H_t against t with the rhs level, and the running
/// mean of per-orbit positive sums.
std::string convergence_svg(const VerificationReport& report, double width = 640.0);

enum class EmitFormat { json, csv, svg };

/// Writes report.json, summary.csv / spectrum.csv / entropy_t.csv /
/// sweep.csv, convergence.svg and partition.svg (d = 2) under dir.
/// Returns the written paths; I/O failures throw Error naming the path.
std::vector<std::filesystem::path> emit(const VerificationReport& report, const std::filesystem::path& dir,
                                        const std::vector<EmitFormat>& formats = {EmitFormat::json, EmitFormat::csv,
                                                                                  EmitFormat::svg});

} // namespace ruelle
