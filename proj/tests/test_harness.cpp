#include "doctest.h"

#include "ruelle/errors.hpp"
#include "ruelle/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace ruelle;
namespace fs = std::filesystem;

namespace {

BenchmarkSpec quick(const std::string& name) {
    BenchmarkSpec s = benchmark(name);
    s.horizon = 2000;
    s.rhs_orbits = 10;
    s.itinerary_orbits = 50;
    s.itinerary_length = 400;
    s.t_max = 6;
    s.conditional_samples = 20000;
    s.partition_samples = 10000;
    s.diagnose_points = 2000;
    s.reachable_cells = 50;
    s.reachable_probes = 100;
    s.exterior_samples = 500;
    s.distortion_samples = 1000;
    s.mc_samples = 20000;
    s.sweep_m = {1};
    s.sweep_l = {0};
    return s;
}

fs::path scratch(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("ruelle_harness_" + tag);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("registry") {
    const auto names = benchmark_names();
    CHECK(names.size() == 6);
    for (const auto& n : names) {
        INFO(n);
        const BenchmarkSpec s = benchmark(n);
        CHECK(s.name == n);
        CHECK_NOTHROW(s.validate());
        const SmoothSystem sys = build_system(s);
        const InvariantMeasure mu = build_measure(s);
        CHECK(sys.dim() == mu.dim());
        CHECK_NOTHROW(build_profile(s, sys));
    }
    CHECK_THROWS_AS(benchmark("no_such_map"), ArgumentError);
}

TEST_CASE("spec JSON round trip and validation") {
    for (const auto& n : benchmark_names()) {
        INFO(n);
        const nlohmann::json j = spec_to_json(benchmark(n));
        CHECK(spec_to_json(spec_from_json(j)) == j);
    }
    nlohmann::json j = {{"schema_version", 1}, {"benchmark", "gauss"}, {"levels", {{"n", 3}}}, {"seed", 42}};
    const BenchmarkSpec s = spec_from_json(j);
    CHECK(s.n == 3);
    CHECK(s.seed == 42);
    CHECK(s.system == "gauss");

    nlohmann::json bad = j;
    bad["bogus"] = 1;
    CHECK_THROWS_AS(spec_from_json(bad), ArgumentError);
    bad = j;
    bad.erase("schema_version");
    CHECK_THROWS_AS(spec_from_json(bad), ArgumentError);
    bad = j;
    bad["schema_version"] = 2;
    CHECK_THROWS_AS(spec_from_json(bad), ArgumentError);
    bad = j;
    bad["levels"] = {{"n", "three"}};
    CHECK_THROWS_AS(spec_from_json(bad), ArgumentError);
    bad = j;
    bad["budgets"] = {{"t_max", 2}};
    CHECK_THROWS_AS(spec_from_json(bad), ArgumentError);

    const fs::path dir = scratch("config");
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << j.dump();
    CHECK(resolve_spec((dir / "c.json").string()).seed == 42);
    CHECK(resolve_spec("doubling").name == "doubling");
    CHECK_THROWS_AS(resolve_spec((dir / "missing.json").string()), ArgumentError);
}

TEST_CASE("sweep: empty level is flagged, not fatal") {
    // The doubling map has |f'| = 2, so nothing sits at level 0.
    const SweepResult r = sweep(quick("doubling"), {0}, {0}, {1});
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].ok);
    CHECK(r.rows[0].empty);
    bool flagged = false;
    for (const auto& a : r.annotations) flagged = flagged || a.find("empty partition level") != std::string::npos;
    CHECK(flagged);
}

TEST_CASE("sweep: reference rate is stable in l") {
    const SweepResult r = sweep(quick("doubling"), {2}, {0, 1, 2, 3}, {1});
    REQUIRE(r.rows.size() == 4);
    for (const auto& row : r.rows) {
        INFO(row.l);
        CHECK(row.ok);
        CHECK(row.reference_rate == r.rows[0].reference_rate);
        CHECK(std::abs(row.reference_rate - std::log(2.0)) <= 0.02);
    }
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].H >= r.rows[i - 1].H - 1e-12);
    std::ostringstream csv;
    write_sweep_csv(csv, r);
    std::string line;
    std::istringstream in(csv.str());
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 5);
}

TEST_CASE("sweep: empty grid gives an empty, valid record") {
    const SweepResult r = sweep(quick("doubling"), {}, {0}, {1});
    CHECK(r.rows.empty());
    const nlohmann::json j = to_json(r);
    CHECK(j.at("rows").is_array());
    CHECK(j.at("rows").empty());
    CHECK(nlohmann::json::parse(j.dump()) == j);
}

TEST_CASE("verification of the doubling map and emitted files") {
    BenchmarkSpec s = quick("doubling");
    RunOptions o;
    o.run_sweep = false;
    const VerificationReport r = run_verification(s, o);
    CHECK_FALSE(r.fatal_stage);
    CHECK(r.ok());
    CHECK(r.rhs == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(r.margin == doctest::Approx(r.rhs - r.lhs_best).epsilon(1e-15));
    CHECK(r.combined_std_error == doctest::Approx(std::hypot(r.rhs_std_error, r.lhs_std_error)));

    const nlohmann::json j = r.to_json();
    CHECK(j.contains("runtime"));
    CHECK_FALSE(r.body.contains("runtime"));
    const double margin = j["rhs"]["value"].get<double>() - j["lhs"]["best"].get<double>();
    CHECK(j["margin"]["value"].get<double>() == doctest::Approx(margin).epsilon(1e-15));
    CHECK(j["status"]["ok"].get<bool>());

    const fs::path dir = scratch("emit");
    const auto written = emit(r, dir);
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "convergence.svg"));
    CHECK_FALSE(fs::exists(dir / "partition.svg"));
    CHECK(nlohmann::json::parse(slurp(dir / "report.json")) == j);

    std::istringstream csv(slurp(dir / "summary.csv"));
    std::string header, row, cell;
    std::getline(csv, header);
    std::getline(csv, row);
    for (const char* c : {"lhs", "rhs", "margin"}) CHECK(header.find(c) != std::string::npos);
    std::vector<std::string> h, v;
    for (std::istringstream a(header); std::getline(a, cell, ',');) h.push_back(cell);
    for (std::istringstream a(row); std::getline(a, cell, ',');) v.push_back(cell);
    if (!row.empty() && row.back() == ',') v.emplace_back();
    REQUIRE(h.size() == v.size());
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < h.size(); ++i)
            if (h[i] == name) return std::stod(v[i]);
        FAIL("missing column " << name);
        return 0.0;
    };
    CHECK(col("margin") == doctest::Approx(col("rhs") - col("lhs")).epsilon(1e-9));

    CHECK_THROWS_AS(emit(r, "/proc/forbidden/dir"), Error);
}

TEST_CASE("2-D partition picture has one polygon per cell") {
    BenchmarkSpec s = quick("doubling2d");
    RunOptions o;
    o.run_sweep = false;
    o.stages = {"partition"};
    const VerificationReport r = run_verification(s, o);
    REQUIRE_FALSE(r.fatal_stage);
    REQUIRE(r.partition);
    std::set<Symbol> cells;
    for (const auto& sym : r.partition->sample_symbols())
        if (!sym.is_special()) cells.insert(sym);
    const std::string svg = partition_svg(*r.partition);
    std::size_t polys = 0;
    for (std::size_t pos = svg.find("<polygon class=\"cell\""); pos != std::string::npos;
         pos = svg.find("<polygon class=\"cell\"", pos + 1))
        ++polys;
    CHECK(polys == cells.size());
    CHECK(polys > 0);

    const fs::path dir = scratch("svg2d");
    emit(r, dir);
    CHECK(fs::exists(dir / "partition.svg"));
}

TEST_CASE("a failing setup stage gives a partial report") {
    BenchmarkSpec s = quick("doubling");
    s.measure = "uniform2d";
    const VerificationReport r = run_verification(s);
    REQUIRE(r.fatal_stage);
    CHECK(*r.fatal_stage == "setup");
    CHECK_FALSE(r.ok());
    CHECK_FALSE(r.fatal_message.empty());
    const nlohmann::json j = r.to_json();
    CHECK(j["status"]["fatal_stage"] == "setup");
    CHECK(j["stages"].empty());
    CHECK(j.contains("runtime"));
    for (const char* k : {"lhs", "rhs", "margin"}) CHECK(j.contains(k));
}

TEST_CASE("report is independent of the worker count") {
    BenchmarkSpec s = quick("gauss");
    RunOptions a;
    a.run_sweep = false;
    RunOptions b = a;
    b.exec = Exec{4};
    const VerificationReport ra = run_verification(s, a);
    const VerificationReport rb = run_verification(s, b);
    CHECK(ra.body == rb.body);
}
