#include "doctest.h"

#include "ruelle/rng.hpp"

#include <cmath>
#include <set>

using namespace ruelle;

TEST_CASE("Philox4x32-10 known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are pure functions of their id") {
    CounterRng a(stream(1, "x", 3)), b(stream(1, "x", 3)), c(stream(1, "x", 4)), d(stream(1, "y", 3));
    std::set<std::uint64_t> firsts;
    const std::uint64_t va = a();
    CHECK(va == b());
    firsts.insert(va);
    firsts.insert(c());
    firsts.insert(d());
    CHECK(firsts.size() == 3);
    CHECK(stage_label("partition-build") == stage_label("partition-build"));
    CHECK(stage_label("a") != stage_label("b"));
    CHECK(splitmix64(0) != splitmix64(1));
}

TEST_CASE("distributions") {
    CounterRng r(stream(9, "dist"));
    const int n = 200000;
    double s = 0.0, s2 = 0.0, nm = 0.0, nm2 = 0.0;
    std::uint64_t hist[7] = {};
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        s += u;
        s2 += u * u;
        const double z = r.normal();
        nm += z;
        nm2 += z * z;
        const auto k = r.below(7);
        REQUIRE(k < 7);
        ++hist[k];
    }
    CHECK(std::abs(s / n - 0.5) <= 4.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(s2 / n - 1.0 / 3.0) <= 0.005);
    CHECK(std::abs(nm / n) <= 4.0 / std::sqrt(n));
    CHECK(std::abs(nm2 / n - 1.0) <= 0.02);
    for (auto h : hist) CHECK(std::abs(static_cast<double>(h) / n - 1.0 / 7.0) <= 0.005);
}
