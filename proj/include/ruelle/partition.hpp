#pragma once

// Regularity levels A_s, the ε_s / l1 schedule, adaptive box partitions
// built from μ-samples, point location and partition entropy.

#include "ruelle/geometry.hpp"
#include "ruelle/measure.hpp"
#include "ruelle/parallel.hpp"
#include "ruelle/system.hpp"

#include "json.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ruelle {

struct LevelParams {
    int m = 1;
    int n = 1;
    int l1 = 1;
    int l = 0;
    double b = 1.0;
    double alpha = 0.5;
    double C = 2.0;
    double a = 2.0;
    int s_max = 40;

    static LevelParams from(const DistortionParams& dp, int m, int n, int l1, int l, double b, int s_max);
};

/// The four orbit products, stored as base-2 logarithms.
struct LevelProducts {
    double log2_df = 0.0;    ///< Π max{‖D f‖, 1}
    double log2_dstar = 0.0; ///< Π d_*
    double log2_rho = 0.0;   ///< Π ρ_b
    double log2_tank = 0.0;  ///< Π N_b

    double prod_df() const { return std::exp2(log2_df); }
    double prod_dstar() const { return std::exp2(log2_dstar); }
    double prod_rho() const { return std::exp2(log2_rho); }
    double prod_tank() const { return std::exp2(log2_tank); }
};

LevelProducts level_products(const SmoothSystem& sys, const RegularityProfile& profile, const Point& x, int m);

/// Smallest s >= 0 with all four products inside 2^{±s}.
int level_from_products(const LevelProducts& p);
int level_of(const SmoothSystem& sys, const RegularityProfile& profile, const Point& x, int m);

struct L1Check {
    bool ok = true;
    /// 0 when ok, else 1..3 for the first failing constraint.
    int violated = 0;
    /// n at which the constraint failed (0 for constraint 1).
    int witness_n = 0;
};

/// l1 > a;  2^{-n(l1-2m)} < 1/(√d 2^{n+1});  C 2^{-αn(l1-2m)} 2^{an} < 2^{1/m} - 1,
/// checked for n = 1..n_check.
L1Check check_l1(int l1, int m, double alpha, double C, double a, int d, int n_check = 64);
std::optional<int> minimal_l1(int m, double alpha, double C, double a, int d, int n_check = 64, int l1_max = 128);

/// Constraints on the refinement l given the level cutoff L:
/// 2^{-(l-2-m(L+1))} < min{1 - 2^{-1/m}, 2^{-1-1/m}} / 2^L and
/// 2^{-α(l-2-m(L+1))} C 2^{aL} < 2^{1/m} - 1.
bool check_l(int l, int m, int L, double alpha, double C, double a);
std::optional<int> minimal_l(int m, int L, double alpha, double C, double a, int l_max = 4096);

/// ε_s = 1 / (√d 2^{s l1})
double epsilon_s(int s, int l1, int d);

struct PartitionConstants {
    double C01 = 0.0;
    double C0 = 0.0;      ///< C01 ⌈4√d⌉^d
    double C2 = 0.0;      ///< C0 (⌈4b√d⌉ + 2)^d
    double c = 0.0;       ///< 4^d √d^d
    double C3 = 0.0;      ///< c b² (⌈4√d⌉ + 2)^d (4⌈bd⌉)^d
    double overlap = 0.0; ///< (4⌈bd⌉)^d
};

PartitionConstants partition_constants(double b, int d, std::optional<double> c01 = std::nullopt,
                                       std::optional<double> c = std::nullopt);

/// log2 of the per-level cell bound C0 2^{s(1 + l1 d) + l d}.
double log2_cell_bound(const PartitionConstants& k, int s, int l1, int l, int d);

/// A partition symbol. Cells pack (level, net index) in `hi` and the
/// subcube index in `lo`; special tokens use hi = ~0.
struct Symbol {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    static constexpr std::uint64_t kSpecial = ~std::uint64_t{0};
    static Symbol cell(int level, std::uint64_t net, std::uint64_t sub);
    static Symbol truncation() { return {kSpecial, 1}; }
    static Symbol uncovered() { return {kSpecial, 2}; }
    static Symbol escape() { return {kSpecial, 3}; }
    /// Plain tag for reference partitions.
    static Symbol tag(std::uint64_t v) { return {0, v}; }

    bool is_special() const noexcept { return hi == kSpecial; }
    int level() const noexcept { return static_cast<int>(hi >> 40); }
    std::uint64_t net() const noexcept { return hi & ((std::uint64_t{1} << 40) - 1); }
    std::uint64_t sub() const noexcept { return lo; }
    std::string str() const;

    auto operator<=>(const Symbol&) const = default;
};

struct SymbolHash {
    std::size_t operator()(const Symbol& s) const noexcept;
};

/// Parent of a cell symbol one refinement step coarser (l -> l - 1).
Symbol parent_symbol(const Symbol& s, int l, int d);

struct PartitionLevel {
    int s = 0;
    double eps = 0.0;
    /// Anchors in net order.
    std::vector<Point> anchors;
    /// (first coordinate, anchor index) sorted, for window queries.
    std::vector<std::pair<double, std::uint32_t>> by_first;
    std::size_t samples = 0;
    std::size_t occupied_cells = 0;
};

struct BuildOptions {
    std::size_t sample_budget = 100000;
    std::uint64_t seed = 0;
    Exec exec{};
    NetOrder order = NetOrder::lexicographic;
    bool require_admissible_l1 = true;
};

class AdaptivePartition {
public:
    const LevelParams& params() const noexcept { return params_; }
    int dim() const noexcept { return dim_; }
    const std::vector<PartitionLevel>& levels() const noexcept { return levels_; }
    /// nullptr when s is outside [n, s_max].
    const PartitionLevel* level(int s) const;

    /// Build samples, their clipped levels (-1 for escape, s_max+1 for
    /// truncation) and their symbols.
    const std::vector<Point>& samples() const noexcept { return samples_; }
    const std::vector<int>& sample_levels() const noexcept { return sample_levels_; }
    const std::vector<Symbol>& sample_symbols() const noexcept { return sample_symbols_; }

    double truncation_mass() const noexcept { return truncation_mass_; }
    double escape_mass() const noexcept { return escape_mass_; }
    std::size_t cell_count() const;

    /// Level clipped to [n, s_max]; s_max + 1 beyond truncation; -1 on escape.
    int clipped_level(const SmoothSystem& sys, const RegularityProfile& profile, const Point& x) const;
    /// Cell at a known clipped level.
    Symbol locate_at(const Point& x, int s) const;
    Symbol locate(const SmoothSystem& sys, const RegularityProfile& profile, const Point& x) const;
    /// Linear scan over all anchors and subcubes in construction order.
    Symbol locate_brute_force(const Point& x, int s) const;

    /// The cube Γ of an anchor and the subcube of a cell symbol.
    BoxElement cube(int s, std::uint64_t net) const;
    BoxElement cell_box(const Symbol& sym) const;

private:
    friend AdaptivePartition build_partition_from_samples(const SmoothSystem&, const RegularityProfile&,
                                                          const LevelParams&, std::vector<Point>, const BuildOptions&);
    LevelParams params_;
    int dim_ = 1;
    std::vector<PartitionLevel> levels_;
    std::vector<Point> samples_;
    std::vector<int> sample_levels_;
    std::vector<Symbol> sample_symbols_;
    double truncation_mass_ = 0.0;
    double escape_mass_ = 0.0;
};

AdaptivePartition build_partition(const SmoothSystem& sys, const InvariantMeasure& mu,
                                  const RegularityProfile& profile, const LevelParams& params,
                                  const BuildOptions& options = {});

AdaptivePartition build_partition_from_samples(const SmoothSystem& sys, const RegularityProfile& profile,
                                               const LevelParams& params, std::vector<Point> samples,
                                               const BuildOptions& options = {});

struct PartitionEntropy {
    double H = 0.0;
    /// Σ_{s<=s_max} μ̂(E_s) log(C0 2^{s(1+l1 d)+l d})
    double bound = 0.0;
    /// -τ log τ for the truncation and escape tokens.
    double truncation_correction = 0.0;
    double gap = 0.0;
    bool within_bound = false;
    std::size_t samples = 0;
};

PartitionEntropy partition_entropy(const AdaptivePartition& partition, const PartitionConstants& k);

/// Plug-in entropy over fresh μ-samples.
PartitionEntropy partition_entropy(const AdaptivePartition& partition, const PartitionConstants& k,
                                   const SmoothSystem& sys, const RegularityProfile& profile,
                                   const InvariantMeasure& mu, std::size_t sample_budget, std::uint64_t seed,
                                   const Exec& exec = {});

struct LevelDiagnostics {
    int s = 0;
    double eps = 0.0;
    std::size_t samples = 0;
    std::size_t anchors = 0;
    std::size_t occupied_cells = 0;
    double log2_cells = 0.0;
    double log2_bound = 0.0;
    bool cell_bound_ok = true;
    std::size_t separation_violations = 0;
    std::size_t coverage_violations = 0;
    std::size_t max_overlap = 0;
};

struct PartitionDiagnostics {
    std::vector<LevelDiagnostics> levels;
    double overlap_bound = 0.0;
    std::size_t checked_points = 0;
    std::size_t locate_mismatches = 0;
    std::size_t containment_failures = 0;
    std::size_t overlap_violations = 0;
    bool ok = true;
};

/// Net, coverage, overlap, cell-count and locate-vs-scan checks on up to
/// `max_points` build samples.
PartitionDiagnostics diagnose_partition(const AdaptivePartition& partition, const PartitionConstants& k,
                                        std::size_t max_points = 10000, const Exec& exec = {});

nlohmann::json partition_to_json(const AdaptivePartition& partition, const PartitionEntropy& entropy,
                                 const PartitionDiagnostics& diagnostics, bool include_anchors = true);

} // namespace ruelle
