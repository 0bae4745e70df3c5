#pragma once

// Batched hot loops with OpenMP and plain serial versions of each. The two
// agree bit for bit: every slot is computed independently and reductions
// run in index order.

#include "ruelle/geometry.hpp"
#include "ruelle/parallel.hpp"
#include "ruelle/partition.hpp"
#include "ruelle/system.hpp"

#include <vector>

namespace ruelle {

/// level_of for every point (-1 on escape).
std::vector<int> batch_levels(const SmoothSystem& sys, const RegularityProfile& profile, const std::vector<Point>& xs,
                              int m, const Exec& exec);
std::vector<int> batch_levels_serial(const SmoothSystem& sys, const RegularityProfile& profile,
                                     const std::vector<Point>& xs, int m);

/// Partition symbols for every point.
std::vector<Symbol> batch_locate(const AdaptivePartition& partition, const SmoothSystem& sys,
                                 const RegularityProfile& profile, const std::vector<Point>& xs, const Exec& exec);
std::vector<Symbol> batch_locate_serial(const AdaptivePartition& partition, const SmoothSystem& sys,
                                        const RegularityProfile& profile, const std::vector<Point>& xs);

/// Σ log ‖(D_x f)^∧‖ over the points, pairwise summed.
double log_exterior_sum(const SmoothSystem& sys, const std::vector<Point>& xs, const Exec& exec);
double log_exterior_sum_serial(const SmoothSystem& sys, const std::vector<Point>& xs);

} // namespace ruelle
