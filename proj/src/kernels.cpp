#include "ruelle/kernels.hpp"

#include "ruelle/errors.hpp"

#include <cmath>

namespace ruelle {

namespace {

int level_or_escape(const SmoothSystem& sys, const RegularityProfile& profile, const Point& x, int m) {
    try {
        return level_of(sys, profile, x, m);
    } catch (const EscapeError&) {
        return -1;
    }
}

} // namespace

std::vector<int> batch_levels(const SmoothSystem& sys, const RegularityProfile& profile, const std::vector<Point>& xs,
                              int m, const Exec& exec) {
    std::vector<int> out(xs.size());
    parallel_for(exec, xs.size(), [&](std::size_t i) { out[i] = level_or_escape(sys, profile, xs[i], m); });
    return out;
}

std::vector<int> batch_levels_serial(const SmoothSystem& sys, const RegularityProfile& profile,
                                     const std::vector<Point>& xs, int m) {
    std::vector<int> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(level_or_escape(sys, profile, x, m));
    return out;
}

std::vector<Symbol> batch_locate(const AdaptivePartition& partition, const SmoothSystem& sys,
                                 const RegularityProfile& profile, const std::vector<Point>& xs, const Exec& exec) {
    std::vector<Symbol> out(xs.size());
    parallel_for(exec, xs.size(), [&](std::size_t i) { out[i] = partition.locate(sys, profile, xs[i]); });
    return out;
}

std::vector<Symbol> batch_locate_serial(const AdaptivePartition& partition, const SmoothSystem& sys,
                                        const RegularityProfile& profile, const std::vector<Point>& xs) {
    std::vector<Symbol> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(partition.locate(sys, profile, x));
    return out;
}

double log_exterior_sum(const SmoothSystem& sys, const std::vector<Point>& xs, const Exec& exec) {
    std::vector<double> v(xs.size());
    parallel_for(exec, xs.size(), [&](std::size_t i) { v[i] = std::log(exterior_norm(sys.jacobian(xs[i]))); });
    return pairwise_sum(v);
}

double log_exterior_sum_serial(const SmoothSystem& sys, const std::vector<Point>& xs) {
    std::vector<double> v;
    v.reserve(xs.size());
    for (const auto& x : xs) v.push_back(std::log(exterior_norm(sys.jacobian(x))));
    return pairwise_sum(v);
}

} // namespace ruelle
