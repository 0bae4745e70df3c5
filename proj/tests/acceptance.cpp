// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.
// Usage: acceptance [path-to-ruelle-cli]

#include "oracles.hpp"

#include "ruelle/harness.hpp"
#include "ruelle/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

using namespace ruelle;
namespace fs = std::filesystem;

namespace {

constexpr double kLn2 = std::numbers::ln2;
const double kGaussRhs = std::numbers::pi * std::numbers::pi / (6.0 * kLn2);

struct Run {
    VerificationReport report;
    double seconds = 0.0;
};

int failures = 0;

void line(bool ok, const std::string& id, const std::string& detail) {
    if (!ok) ++failures;
    std::cout << (ok ? "PASS " : "FAIL ") << id << ": " << detail << std::endl;
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

Run run(const std::string& name) {
    const auto t0 = std::chrono::steady_clock::now();
    Run r{run_verification(benchmark(name), RunOptions{Exec{1}, true, {}}), 0.0};
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "  ran " << name << " in " << fmt(r.seconds, 3) << " s\n";
    return r;
}

const nlohmann::json& stage(const Run& r, const char* s) { return r.report.body.at("stages").at(s); }

bool chain_holds(const nlohmann::json& side) {
    const double c = side.at("conditional").at("value").get<double>();
    const double cse = side.at("conditional").at("stderr").get<double>();
    const double b = side.at("block").at("slope").get<double>();
    const double bse = side.at("block").at("stderr").get<double>();
    return c >= b - 3.0 * std::hypot(cse, bse);
}

void doubling(const Run& r) {
    const auto& rep = r.report;
    double worst = 0.0;
    for (const auto& row : rep.spectrum.rows)
        if (!row.escaped) worst = std::max(worst, std::abs(row.exponents.at(0) - kLn2));
    const bool spec_ok = !rep.spectrum.rows.empty() && worst <= 1e-9;
    const auto& blk = rep.reference_block;
    const bool slope_ok = blk && blk->symbols >= 100000 && std::abs(blk->slope - kLn2) / kLn2 <= 0.02;
    const bool margin_ok = !rep.fatal_stage && std::abs(rep.margin) <= 0.02;
    line(spec_ok && slope_ok && margin_ok && r.seconds <= 30.0, "doubling",
         "max|lambda1 - ln2| = " + fmt(worst) + ", slope = " + (blk ? fmt(blk->slope) : "n/a") + " over " +
             (blk ? std::to_string(blk->symbols) : "0") + " symbols, margin = " + fmt(rep.margin) + ", " +
             fmt(r.seconds, 3) + " s");
}

void gauss(const Run& r) {
    const auto& rep = r.report;
    const double quad = oracle::gauss_log_derivative();
    const bool oracle_ok = std::abs(quad - kGaussRhs) <= 1e-6;
    const bool rhs_ok = std::abs(rep.rhs - kGaussRhs) / kGaussRhs <= 0.01;
    const double qdiff = stage(r, "spectrum").at("quadrature_check").at("relative_difference").get<double>();
    const bool lhs_ok = rep.lhs_best <= rep.rhs + 3.0 * rep.combined_std_error;
    const auto& comps = stage(r, "condition_B").at("components");
    bool finite = comps.size() == 4;
    for (const auto& [k, c] : comps.items())
        finite = finite && !c.at("diverged").get<bool>() && c.at("value").is_number() &&
                 std::isfinite(c.at("value").get<double>());
    const double logplus = comps.at("log+|Df|").at("value").get<double>();
    const bool logplus_ok = std::abs(logplus - quad) / quad <= 0.01;
    line(oracle_ok && rhs_ok && qdiff <= 0.01 && lhs_ok && finite && logplus_ok && r.seconds <= 120.0, "gauss",
         "oracle = " + fmt(quad, 8) + ", rhs = " + fmt(rep.rhs) + " (rel " + fmt(std::abs(rep.rhs - kGaussRhs) / kGaussRhs, 3) +
             ", quadrature rel " + fmt(qdiff, 3) + "), lhs = " + fmt(rep.lhs_best) + " [" + rep.lhs_source +
             "], B integrals finite = " + (finite ? "yes" : "no") + ", log+|Df| = " + fmt(logplus) + ", " +
             fmt(r.seconds, 3) + " s");
}

void logistic(const Run& r) {
    const auto& rep = r.report;
    const double quad = oracle::logistic_log_derivative();
    const bool oracle_ok = std::abs(quad - kLn2) <= 1e-4;
    const bool rhs_ok = std::abs(rep.rhs - quad) / quad <= 0.02;
    const bool margin_ok = !rep.fatal_stage && rep.margin >= -3.0 * rep.combined_std_error;
    line(oracle_ok && rhs_ok && margin_ok && r.seconds <= 60.0, "logistic4",
         "oracle = " + fmt(quad, 8) + ", rhs = " + fmt(rep.rhs) + ", lhs = " + fmt(rep.lhs_best) + ", margin = " +
             fmt(rep.margin) + " (3 sigma = " + fmt(3.0 * rep.combined_std_error, 3) + "), " + fmt(r.seconds, 3) + " s");
}

void noncompact(const Run& nc, const Run& g) {
    const auto& a = nc.report;
    const auto& b = g.report;
    const double drhs = std::abs(a.rhs - b.rhs) / b.rhs;
    const double dlhs = std::abs(a.lhs_best - b.lhs_best) / b.lhs_best;
    const double branch = stage(nc, "condition_B").at("d0_infinity_branch_fraction").get<double>();
    line(!a.fatal_stage && drhs <= 0.02 && dlhs <= 0.02 && branch >= 0.3, "gauss_noncompact",
         "rhs " + fmt(a.rhs) + " vs " + fmt(b.rhs) + " (rel " + fmt(drhs, 3) + "), lhs " + fmt(a.lhs_best) + " vs " +
             fmt(b.lhs_best) + " (rel " + fmt(dlhs, 3) + "), infinity branch on " + fmt(100.0 * branch, 3) + "% of samples");
}

void exterior() {
    CounterRng rng(stream(2024, "acceptance-exterior"));
    double worst = 0.0;
    int cases = 0;
    for (int d = 2; d <= 5; ++d) {
        for (int k = 0; k < 100; ++k) {
            Mat A(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) A(i, j) = rng.normal();
            const double want = oracle::compound_norm(Eigen::MatrixXd(A));
            worst = std::max(worst, std::abs(exterior_norm(A) - want) / want);
            ++cases;
        }
    }
    line(worst <= 1e-8, "exterior_oracle", std::to_string(cases) + " matrices, max relative error " + fmt(worst, 3));
}

void partitions(const std::map<std::string, Run>& runs) {
    bool all = true;
    std::ostringstream detail;
    for (const auto& [name, r] : runs) {
        const auto& rep = r.report;
        if (!rep.partition) {
            all = false;
            detail << name << ": no partition; ";
            continue;
        }
        const PartitionConstants k = partition_constants(rep.spec.b, rep.partition->dim());
        const PartitionDiagnostics dg = diagnose_partition(*rep.partition, k, 10000);
        bool counts = true;
        std::size_t sep = 0, cov = 0;
        for (const auto& lv : dg.levels) {
            counts = counts && lv.cell_bound_ok;
            sep += lv.separation_violations;
            cov += lv.coverage_violations;
        }
        const PartitionEntropy pe = partition_entropy(*rep.partition, k);
        const bool ok = dg.checked_points >= 10000 && dg.locate_mismatches == 0 && dg.containment_failures == 0 &&
                        dg.overlap_violations == 0 && sep == 0 && cov == 0 && counts && pe.within_bound;
        all = all && ok;
        detail << name << ": " << dg.checked_points << " pts, " << dg.locate_mismatches << " mismatches, cell bounds "
               << (counts ? "ok" : "exceeded") << ", H " << fmt(pe.H, 4) << " <= " << fmt(pe.bound + pe.truncation_correction, 4)
               << "; ";
    }
    line(all, "partition_suite", detail.str());
}

void regularity_diagnostics(const std::map<std::string, Run>& runs) {
    bool all = true;
    std::ostringstream detail;
    for (const auto& [name, r] : runs) {
        const auto& dec = stage(r, "decomposition");
        const auto& t = dec.at("terms");
        const auto& se = dec.at("stderr");
        const auto& b = dec.at("bounds");
        const bool ii2 = t.at("II2").get<double>() <= b.at("II2").get<double>() + 3.0 * se.at("II2").get<double>();
        const bool ii12 = t.at("II12").get<double>() <= b.at("II12").get<double>() + 3.0 * se.at("II12").get<double>();
        const auto& reach = dec.at("reachable");
        const std::size_t cells = reach.at("cells").get<std::size_t>();
        const std::size_t viol = reach.at("violations").get<std::size_t>();
        const auto& ent = stage(r, "entropy");
        const bool chain = chain_holds(ent.at("reference")) && chain_holds(ent.at("adaptive"));
        const bool admissible = dec.at("l_admissible").get<bool>();
        const bool ok = ii2 && ii12 && cells >= 1000 && viol == 0 && chain && admissible;
        all = all && ok;
        detail << name << ": II2 " << fmt(t.at("II2").get<double>(), 3) << ", II12 " << fmt(t.at("II12").get<double>(), 3)
               << " <= " << fmt(b.at("II2").get<double>(), 4) << ", reachable " << viol << "/" << cells
               << " violations, chain " << (chain ? "ok" : "broken") << (admissible ? "" : ", l not admissible") << "; ";
    }
    line(all, "regularity_diagnostics", detail.str());
}

void l1_checker() {
    CounterRng rng(stream(77, "acceptance-l1"));
    int mismatches = 0;
    for (int k = 0; k < 20; ++k) {
        const int m = 1 + static_cast<int>(rng.below(3));
        const int d = 1 + static_cast<int>(rng.below(4));
        const double alpha = 0.05 + 0.9 * rng.uniform();
        const double C = 1.0 + 20.0 * rng.uniform();
        const double a = 1.0 + 4.0 * rng.uniform();
        std::optional<int> first;
        for (int l1 = 1; l1 <= 128; ++l1) {
            const L1Check got = check_l1(l1, m, alpha, C, a, d, 64);
            const L1Check want = oracle::l1_constraints(l1, m, alpha, C, a, d, 64);
            if (got.ok != want.ok || got.violated != want.violated || got.witness_n != want.witness_n) ++mismatches;
            if (want.ok && !first) first = l1;
        }
        if (minimal_l1(m, alpha, C, a, d) != first) ++mismatches;
    }
    line(mismatches == 0, "l1_checker", "20 draws, l1 = 1..128, n = 1..64, " + std::to_string(mismatches) + " mismatches");
}

std::optional<std::string> cli_report(const std::string& cli, int workers, const fs::path& dir) {
    fs::remove_all(dir);
    const std::string cmd = "\"" + cli + "\" verify doubling --seed 7 --workers " + std::to_string(workers) + " --out \"" +
                            dir.string() + "\" > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return std::nullopt;
    std::ifstream in(dir / "report.json");
    if (!in) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(in);
    j.erase("runtime");
    return j.dump(2);
}

void determinism(const char* cli) {
    if (cli == nullptr) {
        line(false, "determinism", "no CLI path given");
        return;
    }
    const fs::path base = fs::temp_directory_path() / "ruelle_acceptance";
    const auto a = cli_report(cli, 1, base / "w1a");
    const auto b = cli_report(cli, 1, base / "w1b");
    const auto c = cli_report(cli, 8, base / "w8");
    const bool ok = a && b && c && *a == *b && *a == *c;
    line(ok, "determinism",
         std::string("verify doubling --seed 7 at workers 1, 1, 8: ") +
             (a && b && c ? (ok ? "identical reports without the runtime block" : "reports differ") : "CLI run failed"));
}

} // namespace

int main(int argc, char** argv) {
    std::map<std::string, Run> runs;
    for (const char* name : {"doubling", "gauss", "logistic4", "gauss_noncompact", "tent", "doubling2d"}) runs[name] = run(name);
    for (const auto& [name, r] : runs)
        if (r.report.fatal_stage)
            std::cerr << "  " << name << " stopped in " << *r.report.fatal_stage << ": " << r.report.fatal_message << '\n';

    doubling(runs.at("doubling"));
    gauss(runs.at("gauss"));
    logistic(runs.at("logistic4"));
    noncompact(runs.at("gauss_noncompact"), runs.at("gauss"));
    exterior();
    partitions(runs);
    regularity_diagnostics(runs);
    l1_checker();
    determinism(argc > 1 ? argv[1] : nullptr);

    std::cout << (9 - failures) << "/9 criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
