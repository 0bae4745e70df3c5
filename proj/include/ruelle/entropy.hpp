#pragma once

// Entropy estimators: block entropy of symbol itineraries, conditional
// entropy of one step, the I / II decomposition of that conditional entropy
// over an adaptive partition, and the box-counting quantities behind it.

#include "ruelle/geometry.hpp"
#include "ruelle/measure.hpp"
#include "ruelle/parallel.hpp"
#include "ruelle/partition.hpp"
#include "ruelle/system.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ruelle {

using Symbolizer = std::function<Symbol(const Point&)>;

/// Coarse partitions with known entropy for the built-in systems:
/// halves for doubling/tent/logistic4, the continued-fraction digit for
/// gauss (capped at 64), floor(y) for gauss_noncompact (capped), quadrants
/// for doubling2d. `refine` joins a uniform 2^refine grid per axis.
Symbolizer reference_symbolizer(const std::string& system_name, int refine = 0);
bool has_reference_symbolizer(const std::string& system_name);
Symbolizer single_cell_symbolizer();
/// The join of `base` over x, f x, ..., f^{m-1} x, hashed into one tag, so
/// that reading it every m steps generates under f^m when `base` does under f.
/// Keeps a reference to sys.
Symbolizer word_symbolizer(Symbolizer base, const SmoothSystem& sys, int m);
/// Locate in an adaptive partition; orbit-level escape maps to the escape token.
Symbolizer adaptive_symbolizer(const AdaptivePartition& partition, const SmoothSystem& sys,
                               const RegularityProfile& profile);

struct Itinerary {
    Point start;
    /// Ends with Symbol::escape() when the orbit left U.
    std::vector<Symbol> symbols;
    bool escaped = false;
};

struct ItineraryOptions {
    std::size_t n_orbits = 100;
    std::size_t length = 1000;
    /// Symbols are read every `step` applications of f.
    int step = 1;
    std::uint64_t seed = 0;
    Exec exec{};
};

/// Orbit i starts at a μ-draw from stream (seed, "itinerary", i).
std::vector<Itinerary> itineraries(const SmoothSystem& sys, const InvariantMeasure& mu, const Symbolizer& symbolize,
                                   const ItineraryOptions& options);

struct BlockEntropyRow {
    int t = 0;
    double H = 0.0;
    double H_per_t = 0.0;
    /// H_{t+1} - H_t; NaN on the last row.
    double increment = 0.0;
    std::size_t words = 0;
    std::size_t distinct = 0;
};

struct BlockEntropyEstimate {
    std::vector<BlockEntropyRow> rows;
    /// The increment H_{t+1} - H_t used as the estimate, per step of the itinerary.
    int slope_t = 1;
    double slope = 0.0;
    double std_error = 0.0;
    /// Counts at t_max are below 10x the distinct words.
    bool undersampled = false;
    /// No t had enough words for the increment; slope_t fell back to 1.
    bool slope_undersampled = false;
    double truncation_fraction = 0.0;
    /// -p log p of the truncation token among single symbols.
    double truncation_entropy = 0.0;
    std::size_t symbols = 0;
    std::size_t escaped_orbits = 0;
};

struct BlockEntropyOptions {
    int t_max = 10;
    /// The increment at t is used only when the t+1 words number at least
    /// this multiple of their distinct count.
    double sample_factor = 200.0;
    int batches = 8;
};

/// Plug-in H_t for t = 1..t_max over sliding windows within each itinerary.
BlockEntropyEstimate block_entropy(const std::vector<Itinerary>& its, const BlockEntropyOptions& options = {});
BlockEntropyEstimate block_entropy(const SmoothSystem& sys, const InvariantMeasure& mu, const Symbolizer& symbolize,
                                   const ItineraryOptions& itinerary, const BlockEntropyOptions& options = {});

/// Plug-in entropy of a multiset (natural log); counts summed in sorted order.
double plug_in_entropy(std::vector<std::uint64_t> ids);
double plug_in_entropy(std::vector<Symbol> symbols);

struct ConditionalEntropyEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t pairs = 0;
    std::size_t escaped = 0;
    int step = 1;
};

/// H(symbol of f^m x | symbol of x) over x drawn from stream (seed, "conditional", i).
ConditionalEntropyEstimate conditional_entropy(const SmoothSystem& sys, const InvariantMeasure& mu,
                                               const Symbolizer& symbolize, int m, std::size_t n_samples,
                                               std::uint64_t seed, const Exec& exec = {}, int batches = 8);
/// H(b | a) for pairs (a, b).
double conditional_entropy_of_pairs(const std::vector<std::pair<Symbol, Symbol>>& pairs);

struct DecompositionTerms {
    double I = 0.0;
    double II11 = 0.0;
    double II12 = 0.0;
    double II2 = 0.0;
    double total() const { return I + II11 + II12 + II2; }
};

struct DecompositionOptions {
    std::uint64_t seed = 0;
    Exec exec{};
    int batches = 8;
    /// Cells with fewer build samples are counted as undersampled.
    std::size_t min_cell_samples = 2;
    /// Build samples used for ∫ log‖(D g)^∧‖ dμ.
    std::size_t exterior_samples = 2000;
    double level_percentile = 0.999;
};

struct DecompositionReport {
    DecompositionTerms terms;
    DecompositionTerms std_errors;
    /// H(cell of gx | cell of x); equals terms.total() by the chain rule.
    double conditional = 0.0;
    double conditional_std_error = 0.0;

    double I_bound = 0.0;
    double II2_bound = 0.0;
    double II12_bound = 0.0;
    double II11_bound = 0.0;
    double exterior_integral = 0.0;
    double exterior_integral_std_error = 0.0;

    int m = 1;
    int C1 = 1;
    int max_level_jump = 0;
    /// Percentile of s_B over samples, and the smallest l meeting the
    /// l-constraints for it.
    int L = 0;
    std::optional<int> l_min;
    bool l_admissible = false;
    PartitionConstants constants;

    std::size_t pairs = 0;
    std::size_t escaped_images = 0;
    std::size_t truncated_images = 0;
    /// Images outside every net cube at their level.
    std::size_t uncovered_images = 0;
    std::size_t cells = 0;
    std::size_t undersampled_cells = 0;
    double undersampled_mass = 0.0;

    bool I_exceeds = false;
    bool II2_exceeds = false;
    bool II12_exceeds = false;
    bool II11_exceeds = false;
    bool within_bounds() const { return !(I_exceeds || II2_exceeds || II12_exceeds || II11_exceeds); }
};

/// Pairs (x, g x) with g = f^m over the partition's build samples.
DecompositionReport decomposition_report(const SmoothSystem& sys, const RegularityProfile& profile,
                                         const AdaptivePartition& partition, const PartitionConstants& constants,
                                         const DecompositionOptions& options = {});

struct BoxCount {
    std::size_t count = 0;
    /// False for the sampling fallback (d > 3) and singular images.
    bool exact = true;
};

/// Number of cells of the grid ξ_β needed to cover A(box): cells whose
/// interior meets the image parallelotope. Exact separating-axis tests for
/// d <= 3; point sampling with refinement otherwise (a lower bound).
BoxCount box_intersection_count(const Mat& A, const BoxElement& box, double beta, std::size_t max_cells = 20000000);

/// c Π max{a_i / β, 1} with a_i the image edge lengths |A e_i| 2h_i.
double box_count_bound(const Mat& A, const BoxElement& box, double beta, double c);

struct ReachableCount {
    Symbol cell;
    std::size_t hits = 0;
    /// Distinct hit cells at level n.
    std::size_t hits_at_n = 0;
    std::size_t probes = 0;
    std::size_t escaped = 0;
    double exterior_norm = 1.0;
    double bound = 0.0;
    bool within = true;
};

/// Distinct cells hit by g = f^m over probes drawn uniformly in `cell`.
/// The level-n hits are compared against C3 ‖(D_x g)^∧‖ at the cell centre.
ReachableCount count_reachable_cells(const SmoothSystem& sys, const RegularityProfile& profile,
                                     const AdaptivePartition& partition, const Symbol& cell, std::size_t n_probe,
                                     double C3, std::uint64_t seed);

struct ReachableSurvey {
    std::vector<ReachableCount> rows;
    std::size_t violations = 0;
    double max_ratio = 0.0;
};

/// Up to n_cells distinct level-n cells taken from the build samples in a
/// seeded order.
ReachableSurvey survey_reachable_cells(const SmoothSystem& sys, const RegularityProfile& profile,
                                       const AdaptivePartition& partition, double C3, std::size_t n_cells,
                                       std::size_t n_probe, std::uint64_t seed, const Exec& exec = {});

nlohmann::json to_json(const BlockEntropyEstimate& e);
nlohmann::json to_json(const ConditionalEntropyEstimate& e);
nlohmann::json to_json(const DecompositionReport& r);
nlohmann::json to_json(const ReachableSurvey& s);
/// t, H_t, H_t/t, increment
void write_block_entropy_csv(std::ostream& out, const BlockEntropyEstimate& e);

} // namespace ruelle
