#include "doctest.h"
#include "oracles.hpp"

#include "ruelle/errors.hpp"
#include "ruelle/measure.hpp"
#include "ruelle/partition.hpp"
#include "ruelle/rng.hpp"
#include "ruelle/system.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace ruelle;

namespace {

RegularityProfile flat_profile() {
    return RegularityProfile(
        1.0, [](const Point&) { return 1.0; }, [](const Point&) { return 1.0; },
        [](const Point&) { return std::uint64_t{1}; }, RegularityProfile::Mode::analytic);
}

RegularityProfile interval_profile(const SmoothSystem& s) {
    return RegularityProfile::for_interval(s.domain, 1.0, RadiusPolicy::pure_norm);
}

// Every (net, subcube) whose closed box contains x, in construction order.
std::vector<Symbol> containing_cells(const AdaptivePartition& P, const Point& x, int s) {
    std::vector<Symbol> out;
    const PartitionLevel* lv = P.level(s);
    if (lv == nullptr) return out;
    const std::uint64_t subs = std::uint64_t{1} << (P.params().l * P.dim());
    const ChartDomain flat = ChartDomain::euclidean_space(P.dim(), Point::Zero(P.dim()));
    for (std::size_t i = 0; i < lv->anchors.size(); ++i) {
        for (std::uint64_t j = 0; j < subs; ++j) {
            const Symbol c = Symbol::cell(s, i, j);
            if (box_contains(flat, P.cell_box(c), x)) out.push_back(c);
        }
    }
    return out;
}

SmoothSystem identity_on_line() {
    SmoothSystem s = make_system("identity");
    s.domain = ChartDomain::interval(-kInf, kInf, 0.5);
    return s;
}

} // namespace

TEST_CASE("level products") {
    const SmoothSystem f = make_system("doubling");
    const LevelProducts p = level_products(f, flat_profile(), point1(0.3), 2);
    CHECK(p.prod_df() == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(p.prod_rho() == 1.0);
    CHECK(p.prod_tank() == 1.0);
    // d_* = distance to the boundary here: 0.3 then 0.4.
    CHECK(p.prod_dstar() == doctest::Approx(0.12).epsilon(1e-14));

    const LevelProducts q = level_products(make_system("identity"), flat_profile(), point1(0.5), 5);
    CHECK(q.prod_df() == 1.0);

    const SmoothSystem g = make_system("gauss");
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    const LevelProducts r = level_products(g, interval_profile(g), point1(golden), 3);
    CHECK(r.prod_df() == doctest::Approx(std::pow((1.0 + std::sqrt(5.0)) / 2.0, 6)).epsilon(1e-12));
    CHECK(r.prod_df() == doctest::Approx(17.944).epsilon(1e-4));

    CHECK_THROWS_AS(level_products(f, flat_profile(), point1(0.3), 0), ArgumentError);
}

TEST_CASE("level from products") {
    CHECK(level_from_products(LevelProducts{}) == 0);
    CHECK(level_from_products(LevelProducts{4.0, 0.0, 0.0, 0.0}) == 4);
    CHECK(level_from_products(LevelProducts{0.5, -2.2, 0.0, 1.0}) == 3);
    CHECK(level_from_products(LevelProducts{0.0, 0.0, -0.01, 0.0}) == 1);
}

TEST_CASE("level of the golden point matches a threshold scan") {
    const SmoothSystem g = make_system("gauss");
    const RegularityProfile prof = interval_profile(g);
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int m : {1, 2, 3}) {
        INFO(m);
        const LevelProducts p = level_products(g, prof, point1(golden), m);
        int scan = -1;
        for (int s = 0; s <= 64 && scan < 0; ++s) {
            const double t = std::pow(2.0, s);
            if (p.prod_df() <= t && p.prod_dstar() >= 1.0 / t && p.prod_rho() >= 1.0 / t && p.prod_tank() <= t) scan = s;
        }
        CHECK(scan >= 1);
        CHECK(level_of(g, prof, point1(golden), m) == scan);
    }
}

TEST_CASE("level of random points matches a threshold scan") {
    for (const char* name : {"gauss", "logistic4", "tent"}) {
        INFO(std::string(name));
        const SmoothSystem f = make_system(name);
        const RegularityProfile prof = interval_profile(f);
        CounterRng rng(stream(3, "level-scan"));
        for (int k = 0; k < 200; ++k) {
            const Point x = point1(rng.uniform());
            LevelProducts p;
            try {
                p = level_products(f, prof, x, 2);
            } catch (const EscapeError&) {
                continue;
            }
            int scan = -1;
            for (int s = 0; s <= 200 && scan < 0; ++s) {
                const double t = std::pow(2.0, s);
                if (p.prod_df() <= t && p.prod_dstar() >= 1.0 / t && p.prod_rho() >= 1.0 / t && p.prod_tank() <= t)
                    scan = s;
            }
            CHECK(level_of(f, prof, x, 2) == scan);
        }
    }
}

TEST_CASE("l1 constraints against a brute-force scan") {
    CHECK(check_l1(2, 1, 0.5, 2.0, 2.0, 1).violated == 1);
    CHECK_FALSE(check_l1(1, 1, 0.5, 2.0, 2.0, 1).ok);

    // The worked case: m = 1, a = 2, alpha = 0.5, C = 2, d = 1.
    int brute = -1;
    for (int l1 = 1; l1 <= 128 && brute < 0; ++l1) {
        if (oracle::l1_constraints(l1, 1, 0.5, 2.0, 2.0, 1, 64).ok) brute = l1;
    }
    REQUIRE(brute > 0);
    CHECK(minimal_l1(1, 0.5, 2.0, 2.0, 1) == brute);
    CHECK(brute == 9);

    CounterRng rng(stream(11, "l1-draws"));
    for (int k = 0; k < 20; ++k) {
        const int m = 1 + static_cast<int>(rng.below(3));
        const int d = 1 + static_cast<int>(rng.below(4));
        const double alpha = 0.05 + 0.9 * rng.uniform();
        const double C = 1.0 + 20.0 * rng.uniform();
        const double a = 1.0 + 4.0 * rng.uniform();
        const int n_check = 1 + static_cast<int>(rng.below(64));
        INFO("draw " << k);
        std::optional<int> first;
        for (int l1 = 1; l1 <= 128; ++l1) {
            const L1Check got = check_l1(l1, m, alpha, C, a, d, n_check);
            const L1Check want = oracle::l1_constraints(l1, m, alpha, C, a, d, n_check);
            CHECK(got.ok == want.ok);
            CHECK(got.violated == want.violated);
            CHECK(got.witness_n == want.witness_n);
            if (want.ok && !first) first = l1;
        }
        CHECK(minimal_l1(m, alpha, C, a, d, n_check) == first);
    }
}

TEST_CASE("epsilon schedule") {
    for (int d : {1, 2, 3}) {
        const int l1 = *minimal_l1(1, 0.5, 2.0, 2.0, d);
        for (int s = 1; s < 40; ++s) CHECK(epsilon_s(s + 1, l1, d) < epsilon_s(s, l1, d));
        CHECK(epsilon_s(0, l1, d) == doctest::Approx(1.0 / std::sqrt(static_cast<double>(d))));
    }
}

TEST_CASE("l constraints") {
    for (int m : {1, 2}) {
        for (int L : {0, 3, 7}) {
            const auto l = minimal_l(m, L, 0.5, 8.0, 2.0);
            REQUIRE(l);
            CHECK(check_l(*l, m, L, 0.5, 8.0, 2.0));
            if (*l > 0) CHECK_FALSE(check_l(*l - 1, m, L, 0.5, 8.0, 2.0));
            CHECK(check_l(*l + 5, m, L, 0.5, 8.0, 2.0));
        }
    }
}

TEST_CASE("constants") {
    const PartitionConstants k = partition_constants(1.0, 1);
    CHECK(k.c == doctest::Approx(4.0));
    CHECK(k.overlap == doctest::Approx(4.0));
    CHECK(k.C0 == doctest::Approx(k.C01 * 4.0));
    CHECK(k.C2 == doctest::Approx(k.C0 * 6.0));
    CHECK(k.C3 == doctest::Approx(4.0 * 6.0 * 4.0));
    const PartitionConstants k2 = partition_constants(1.0, 2);
    CHECK(k2.c == doctest::Approx(16.0 * 2.0));
    CHECK(k2.overlap == doctest::Approx(64.0));
    CHECK(log2_cell_bound(k, 3, 9, 2, 1) == doctest::Approx(std::log2(k.C0) + 3.0 * 10.0 + 2.0));
}

TEST_CASE("symbols") {
    const Symbol s = Symbol::cell(5, 1234, 77);
    CHECK(s.level() == 5);
    CHECK(s.net() == 1234);
    CHECK(s.sub() == 77);
    CHECK_FALSE(s.is_special());
    CHECK(Symbol::truncation().is_special());
    CHECK(Symbol::truncation() != Symbol::escape());
    // 2-D, l = 2: sub (k1, k2) = (3, 1) -> parent (1, 0).
    CHECK(parent_symbol(Symbol::cell(0, 0, 3 * 4 + 1), 2, 2).sub() == 1 * 2 + 0);
    CHECK(parent_symbol(Symbol::escape(), 2, 1) == Symbol::escape());
}

TEST_CASE("doubling partition in one level band") {
    const SmoothSystem f = make_system("doubling");
    const RegularityProfile prof = interval_profile(f);
    std::vector<Point> xs;
    CounterRng rng(stream(5, "band"));
    for (int i = 0; i < 20000; ++i) xs.push_back(point1(0.25 + 0.5 * rng.uniform()));
    for (const auto& x : xs) REQUIRE(level_of(f, prof, x, 1) <= 2);

    const int l1 = *minimal_l1(1, f.distortion.alpha, f.distortion.C, f.distortion.a, 1);
    const PartitionConstants k = partition_constants(1.0, 1);
    std::vector<AdaptivePartition> parts;
    for (int l : {0, 1, 2}) {
        const LevelParams p = LevelParams::from(f.distortion, 1, 2, l1, l, 1.0, 4);
        parts.push_back(build_partition_from_samples(f, prof, p, xs));
    }
    const AdaptivePartition& P0 = parts[0];
    CHECK(P0.levels().front().samples == xs.size());
    CHECK(P0.truncation_mass() == 0.0);
    CHECK(P0.cell_count() == P0.levels().front().occupied_cells);

    // First-hit brute force on a subset of samples (l = 1).
    const AdaptivePartition& P1 = parts[1];
    for (std::size_t i = 0; i < xs.size(); i += 97) {
        const auto hits = containing_cells(P1, xs[i], 2);
        REQUIRE_FALSE(hits.empty());
        CHECK(P1.sample_symbols()[i] == hits.front());
    }

    for (std::size_t l = 1; l < parts.size(); ++l) {
        INFO(l);
        CHECK(parts[l].cell_count() <= 2 * parts[l - 1].cell_count());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (parent_symbol(parts[l].sample_symbols()[i], static_cast<int>(l), 1) != parts[l - 1].sample_symbols()[i]) {
                FAIL("refinement broken at sample " << i);
            }
        }
    }
    for (const auto& P : parts) {
        for (const auto& lv : P.levels()) {
            if (lv.occupied_cells == 0) continue;
            CHECK(std::log2(static_cast<double>(lv.occupied_cells)) <= log2_cell_bound(k, lv.s, l1, P.params().l, 1));
        }
    }
}

TEST_CASE("locate agrees with the construction-order scan") {
    struct Case {
        const char* sys;
        const char* mu;
        int n;
        int l;
    };
    for (const Case c : {Case{"doubling", "uniform", 2, 2}, Case{"gauss", "gauss", 2, 1}, Case{"logistic4", "arcsine", 2, 2},
                         Case{"doubling2d", "uniform2d", 2, 1}}) {
        INFO(std::string(c.sys));
        const SmoothSystem f = make_system(c.sys);
        const InvariantMeasure mu = make_measure(c.mu);
        const int d = f.dim();
        const RegularityProfile prof =
            d == 1 ? interval_profile(f)
                   : RegularityProfile::tabulated(f.domain, RegularRadiusConfig{1.0, RadiusPolicy::pure_norm}, 1e-3, 500, 0.05);
        const int l1 = *minimal_l1(1, f.distortion.alpha, f.distortion.C, f.distortion.a, d);
        const LevelParams p = LevelParams::from(f.distortion, 1, c.n, l1, c.l, 1.0, 6);
        BuildOptions bo;
        bo.sample_budget = 10000;
        bo.seed = 21;
        const AdaptivePartition P = build_partition(f, mu, prof, p, bo);

        std::size_t mismatches = 0, cells = 0;
        for (std::size_t i = 0; i < P.samples().size(); ++i) {
            const int s = P.sample_levels()[i];
            const Symbol got = P.locate_at(P.samples()[i], s);
            if (got != P.locate_brute_force(P.samples()[i], s)) ++mismatches;
            if (!got.is_special()) ++cells;
            if (got != P.sample_symbols()[i]) ++mismatches;
        }
        CHECK(mismatches == 0);
        CHECK(cells > 0);

        // Fresh points mostly fall outside the sample-built cubes; both
        // lookups must still agree.
        const auto fresh = mu.sample(10000, 99);
        mismatches = 0;
        for (const auto& x : fresh) {
            const int s = P.clipped_level(f, prof, x);
            if (P.locate_at(x, s) != P.locate_brute_force(x, s)) ++mismatches;
            if (P.locate(f, prof, x) != P.locate_at(x, s)) ++mismatches;
        }
        CHECK(mismatches == 0);

        for (const auto& lv : P.levels()) {
            for (std::size_t i = 0; i < lv.anchors.size(); ++i) {
                const Symbol a = P.locate_at(lv.anchors[i], lv.s);
                REQUIRE_FALSE(a.is_special());
                CHECK(a.net() <= i);
                if (d == 1) CHECK(a.net() == i);
            }
        }
    }
}

TEST_CASE("partition entropy of the identity on a line") {
    const SmoothSystem id = identity_on_line();
    const RegularityProfile prof = flat_profile();
    const InvariantMeasure mu = make_measure("uniform");
    BuildOptions bo;
    bo.sample_budget = 200000;
    bo.seed = 4;
    bo.require_admissible_l1 = false;
    const PartitionConstants k = partition_constants(1.0, 1);

    LevelParams p = LevelParams::from(id.distortion, 1, 0, 1, 0, 1.0, 2);
    const AdaptivePartition single = build_partition(id, mu, prof, p, bo);
    CHECK(single.cell_count() == 1);
    CHECK(partition_entropy(single, k).H == 0.0);

    // One anchor; its cube has width 2, so (0, 1) meets about 2^{l-1} of
    // the 2^l subcubes, with at most one extra partial piece.
    for (int l = 2; l <= 8; ++l) {
        INFO(l);
        p.l = l;
        const AdaptivePartition P = build_partition(id, mu, prof, p, bo);
        const PartitionEntropy e = partition_entropy(P, k);
        CHECK(e.H >= (l - 1) * std::numbers::ln2 - 0.05);
        CHECK(e.H <= std::log(std::pow(2.0, l - 1) + 1.0) + 0.01);
        CHECK(e.within_bound);
        const PartitionEntropy fresh = partition_entropy(P, k, id, prof, mu, 100000, 8);
        CHECK(std::abs(fresh.H - e.H) <= 0.02);
    }
}

TEST_CASE("Gauss partition entropy stays under the level bound") {
    const SmoothSystem g = make_system("gauss");
    const RegularityProfile prof = interval_profile(g);
    const int l1 = *minimal_l1(1, g.distortion.alpha, g.distortion.C, g.distortion.a, 1);
    const LevelParams p = LevelParams::from(g.distortion, 1, 8, l1, 2, 1.0, 12);
    BuildOptions bo;
    bo.sample_budget = 10000;
    bo.seed = 2;
    const AdaptivePartition P = build_partition(g, make_measure("gauss"), prof, p, bo);
    const PartitionConstants k = partition_constants(1.0, 1);
    const PartitionEntropy e = partition_entropy(P, k);
    CHECK(e.H > 0.0);
    CHECK(e.H <= e.bound + e.truncation_correction);
    CHECK(e.within_bound);
}

TEST_CASE("partition diagnostics") {
    for (const auto& [name, measure] : {std::pair{"doubling", "uniform"}, std::pair{"gauss", "gauss"}}) {
        INFO(std::string(name));
        const SmoothSystem f = make_system(name);
        const RegularityProfile prof = interval_profile(f);
        const int l1 = *minimal_l1(1, f.distortion.alpha, f.distortion.C, f.distortion.a, 1);
        const LevelParams p = LevelParams::from(f.distortion, 1, 2, l1, 2, 1.0, 6);
        BuildOptions bo;
        bo.sample_budget = 20000;
        bo.seed = 9;
        const AdaptivePartition P = build_partition(f, make_measure(measure), prof, p, bo);
        const PartitionConstants k = partition_constants(1.0, 1);
        const PartitionDiagnostics dg = diagnose_partition(P, k, 10000);
        CHECK(dg.ok);
        CHECK(dg.checked_points == 10000);
        CHECK(dg.locate_mismatches == 0);
        CHECK(dg.containment_failures == 0);
        CHECK(dg.overlap_violations == 0);
        for (const auto& lv : dg.levels) {
            CHECK(lv.separation_violations == 0);
            CHECK(lv.coverage_violations == 0);
            CHECK(lv.cell_bound_ok);
            CHECK(static_cast<double>(lv.max_overlap) <= dg.overlap_bound);
        }
        const auto j = partition_to_json(P, partition_entropy(P, k), dg, false);
        CHECK(j.contains("levels"));
    }
}

TEST_CASE("build argument checks") {
    const SmoothSystem f = make_system("doubling");
    const RegularityProfile prof = interval_profile(f);
    const LevelParams bad_l1 = LevelParams::from(f.distortion, 1, 2, 1, 0, 1.0, 6);
    CHECK_THROWS_AS(build_partition(f, make_measure("uniform"), prof, bad_l1), ArgumentError);
    LevelParams p = LevelParams::from(f.distortion, 1, 3, 20, 0, 1.0, 2);
    CHECK_THROWS_AS(build_partition(f, make_measure("uniform"), prof, p), ArgumentError);
    p.s_max = 6;
    p.l = 63;
    CHECK_THROWS_AS(build_partition(f, make_measure("uniform"), prof, p), ArgumentError);
}
