#include "doctest.h"
#include "oracles.hpp"

#include "ruelle/errors.hpp"
#include "ruelle/rng.hpp"
#include "ruelle/system.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>

using namespace ruelle;

namespace {

double compound_oracle(const Eigen::MatrixXd& A) { return oracle::compound_norm(A); }

Mat random_matrix(CounterRng& rng, int d) {
    Mat A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = rng.normal();
    return A;
}

Mat diag2(double a, double b) {
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = a;
    A(1, 1) = b;
    return A;
}

} // namespace

TEST_CASE("iterate") {
    const SmoothSystem dbl = make_system("doubling");
    CHECK(iterate(dbl, point1(0.1), 3)[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(iterate(dbl, point1(0.1), 0)[0] == 0.1);
    const SmoothSystem g = make_system("gauss");
    CHECK(iterate(g, point1(2.0 / 3.0), 1)[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(orbit(g, point1(2.0 / 3.0), 1).size() == 2);
    CHECK_THROWS_AS(orbit(g, point1(2.0 / 3.0), 2), EscapeError);
    CHECK_THROWS_AS(iterate(g, point1(0.5), 1), EscapeError);
}

TEST_CASE("cocycle norms") {
    const auto c = cocycle_jacobian_norms(make_system("doubling"), point1(0.3), 4);
    REQUIRE(c.norms.size() == 4);
    for (double n : c.norms) CHECK(n == doctest::Approx(2.0));
    CHECK(c.starred_product == doctest::Approx(16.0));
    CHECK(cocycle_jacobian_norms(make_system("identity"), point1(0.3), 5).starred_product == 1.0);
    const auto g = cocycle_jacobian_norms(make_system("gauss"), point1(2.0 / 3.0), 1);
    CHECK(g.norms[0] == doctest::Approx(2.25));
    CHECK(g.starred_product == doctest::Approx(2.25));
}

TEST_CASE("starred product is at least one and equals the plain product when factors exceed one") {
    const SmoothSystem lg = make_system("logistic4");
    CounterRng rng(stream(2, "test"));
    for (int i = 0; i < 300; ++i) {
        const auto c = cocycle_jacobian_norms(lg, point1(rng.uniform()), 3);
        CHECK(c.starred_product >= 1.0);
        double plain = 1.0, starred = 1.0;
        bool all_big = true;
        for (double n : c.norms) {
            plain *= n;
            starred *= std::max(n, 1.0);
            all_big = all_big && n >= 1.0;
        }
        CHECK(c.starred_product == doctest::Approx(starred));
        if (all_big) CHECK(c.starred_product == doctest::Approx(plain));
    }
}

TEST_CASE("exterior norm of diagonal matrices") {
    CHECK(exterior_norm(diag2(2.0, 0.5)) == doctest::Approx(2.0));
    CHECK(exterior_norm(diag2(3.0, 2.0)) == doctest::Approx(6.0));
}

TEST_CASE("exterior norm matches the compound-matrix oracle") {
    CounterRng rng(stream(11, "test"));
    for (int d = 2; d <= 5; ++d) {
        for (int t = 0; t < 100; ++t) {
            const Mat A = random_matrix(rng, d);
            const double oracle = compound_oracle(Eigen::MatrixXd(A));
            CHECK(std::abs(exterior_norm(A) - oracle) <= 1e-8 * oracle);
        }
    }
}

TEST_CASE("exterior norm is submultiplicative") {
    CounterRng rng(stream(12, "test"));
    for (int d = 1; d <= 4; ++d) {
        for (int t = 0; t < 100; ++t) {
            const Mat A = random_matrix(rng, d), B = random_matrix(rng, d);
            CHECK(exterior_norm(A * B) <= exterior_norm(A) * exterior_norm(B) * (1 + 1e-12));
        }
    }
}

TEST_CASE("library compound matrix agrees with the minor oracle") {
    CounterRng rng(stream(13, "test"));
    const Eigen::MatrixXd A = Eigen::MatrixXd(random_matrix(rng, 4));
    for (int k = 1; k <= 4; ++k) {
        const Eigen::MatrixXd C = compound_matrix(A, k);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
        CHECK(svd.singularValues()(0) <= compound_oracle(A) * (1 + 1e-10));
    }
    CHECK(compound_matrix(A, 4)(0, 0) == doctest::Approx(A.determinant()));
}

TEST_CASE("exterior norm growth") {
    CHECK(exterior_norm_growth(make_system("doubling"), point1(0.3), 10) == doctest::Approx(10 * std::numbers::ln2));
    CHECK(exterior_norm_growth(make_system("identity"), point1(0.3), 4) == doctest::Approx(0.0));
    nlohmann::json p;
    p["matrix"] = {{2.0, 0.0}, {0.0, 0.5}};
    CHECK(exterior_norm_growth(make_system("linear", p), point2(0.1, 0.1), 5) ==
          doctest::Approx(5 * std::numbers::ln2));
}

TEST_CASE("distortion falsifier") {
    nlohmann::json p;
    p["matrix"] = {{1.5, 0.3}, {0.2, 0.7}};
    const SmoothSystem affine = make_system("linear", p);
    DistortionPlan plan;
    plan.samples = 2000;
    auto r = check_distortion_A(affine, {0.5, 2.0, 5.0}, plan);
    CHECK(r.max_ratio == 0.0);
    CHECK(r.passes);
    const SmoothSystem dbl = make_system("doubling");
    CHECK(check_distortion_A(dbl, dbl.distortion, plan).passes);

    // Recorded value for α = 0.5, a = 3, C = 100; the dense-sampling oracle of
    // the quotient bounds it by 0.011.
    plan.samples = 10000;
    const auto g = check_distortion_A(make_system("gauss"), {0.5, 100.0, 3.0}, plan);
    CHECK(g.evaluated > 5000);
    CHECK(g.max_ratio > 0.0);
    CHECK(g.max_ratio <= 0.011);
    CHECK(g.passes);
    // C = 4, a = 2 is exceeded near x = 1/2.
    const auto bad = check_distortion_A(make_system("gauss"), {0.5, 4.0, 2.0}, plan);
    CHECK_FALSE(bad.passes);
}

TEST_CASE("jacobians match finite differences on every built-in system") {
    for (const auto& name : builtin_system_names()) {
        if (name == "linear") continue;
        const auto c = check_jacobian(make_system(name), 1000, 4);
        INFO(name);
        CHECK(c.checked >= 500);
        CHECK(c.max_relative_error <= 1e-5);
    }
}

TEST_CASE("systems from configs") {
    nlohmann::json cfg = {{"kind", "rational"},
                          {"domain", {0.0, 1.0}},
                          {"reference", 0.5},
                          {"numerator", {0.0, 3.0}},
                          {"denominator", {1.0}},
                          {"wrap", true}};
    const SmoothSystem s = system_from_config(cfg);
    CHECK(s.map(point1(0.4))[0] == doctest::Approx(0.2));
    CHECK(s.jacobian(point1(0.4))(0, 0) == doctest::Approx(3.0));
    CHECK_THROWS_AS(system_from_config({{"kind", "nope"}}), ArgumentError);
    CHECK_THROWS_AS(make_system("unknown"), ArgumentError);
}

TEST_CASE("spectral norm") {
    CHECK(spectral_norm(diag2(-3.0, 1.0)) == doctest::Approx(3.0));
    Mat a(1, 1);
    a(0, 0) = -2.5;
    CHECK(spectral_norm(a) == 2.5);
}
