#pragma once

// Worker control and deterministic reductions. Parallel loops write results
// into per-index slots; every reduction afterwards runs serially in index
// order, so the outcome does not depend on the worker count.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ruelle {

struct Exec {
    int workers = 1;

    bool serial() const noexcept { return workers <= 1; }
};

/// Runs body(i) for i in [0, n). With more than one worker the iterations are
/// distributed by OpenMP (static schedule); body must only write slot i.
void parallel_for(const Exec& exec, std::size_t n, const std::function<void(std::size_t)>& body);

/// Pairwise (cascade) summation; fixed association order for a given length.
double pairwise_sum(std::span<const double> values);

struct MeanStderr {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

/// Sample mean and standard error of the mean, reduced in index order.
MeanStderr mean_stderr(std::span<const double> values);

/// Hardware threads reported by the OpenMP runtime.
int available_workers();

} // namespace ruelle
