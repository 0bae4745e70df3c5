#pragma once

// Counter-based random streams. Every random draw in the toolkit is a pure
// function of (seed, stream label, counter), so results do not depend on how
// work is split across threads.

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace ruelle {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3").
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit label for a named stage.
std::uint64_t stage_label(std::string_view stage);

/// Identifies an independent substream: one per (seed, stage, index).
struct StreamId {
    std::uint64_t seed = 0;
    std::uint64_t stage = 0;
    std::uint64_t index = 0;
};

inline StreamId stream(std::uint64_t seed, std::string_view stage, std::uint64_t index = 0) {
    return StreamId{seed, stage_label(stage), index};
}

/// UniformRandomBitGenerator over a Philox substream.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(StreamId id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform on the open interval (0, 1).
    double uniform();

    /// Standard normal (Box–Muller).
    double normal();

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    void refill();

    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> counter_{};
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

} // namespace ruelle
