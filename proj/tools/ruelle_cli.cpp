// ruelle: command-line front end for the verification pipeline.

#include "ruelle/errors.hpp"
#include "ruelle/harness.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <sstream>

using namespace ruelle;

namespace {

struct Common {
    std::string target;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    std::string out;
    bool json = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("target", c.target, "Benchmark name or path to a JSON config")->required();
    sub->add_option("--seed", c.seed, "Master seed (overrides the config)");
    sub->add_option("--workers", c.workers, "Worker threads (0: all available)")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", c.out, "Directory for report files");
    sub->add_flag("--json", c.json, "Print the report JSON to stdout");
}

BenchmarkSpec load(const Common& c) {
    BenchmarkSpec spec = resolve_spec(c.target);
    if (c.seed) spec.seed = *c.seed;
    return spec;
}

Exec exec_of(const Common& c) { return Exec{c.workers > 0 ? c.workers : available_workers()}; }

void print_summary(const VerificationReport& r) {
    std::ostringstream os;
    os.precision(6);
    os << r.spec.name << ": rhs " << r.rhs << " +- " << r.rhs_std_error << ", lhs " << r.lhs_best << " +- "
       << r.lhs_std_error << " (" << r.lhs_source << "), margin " << r.margin << " +- " << r.combined_std_error;
    if (r.violation) os << "  VIOLATION";
    if (r.fatal_stage) os << "  FATAL in " << *r.fatal_stage << ": " << r.fatal_message;
    std::cout << os.str() << '\n';
}

int finish(const VerificationReport& r, const Common& c, bool summary = true) {
    if (!c.out.empty()) {
        for (const auto& p : emit(r, c.out)) std::cerr << "wrote " << p.string() << '\n';
    }
    if (c.json) std::cout << r.to_json().dump(2) << '\n';
    else if (summary) print_summary(r);
    return r.ok() ? 0 : 1;
}

int print_stage(const VerificationReport& r, const Common& c, const std::vector<std::string>& stages) {
    if (!c.json) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& s : stages) {
            if (r.body["stages"].contains(s)) j[s] = r.body["stages"][s];
        }
        if (r.fatal_stage) j["fatal"] = {{"stage", *r.fatal_stage}, {"message", r.fatal_message}};
        std::cout << j.dump(2) << '\n';
    }
    return finish(r, c, false);
}

std::vector<int> parse_ints(const std::vector<int>& given, const std::vector<int>& fallback) {
    return given.empty() ? fallback : given;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical checks of h_mu(f) <= integral of the positive Lyapunov exponents"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ruelle 1.0");

    auto* list = app.add_subcommand("list", "List registered benchmarks");

    Common cv;
    bool no_sweep = false;
    auto* verify = app.add_subcommand("verify", "Run the full verification pipeline");
    add_common(verify, cv);
    verify->add_flag("--no-sweep", no_sweep, "Skip the (n, l, m) sweep");

    Common cs;
    long horizon = 0;
    std::size_t orbits = 0;
    int reorth = 0;
    auto* spectrum = app.add_subcommand("spectrum", "Lyapunov spectrum and the positive-sum integral");
    add_common(spectrum, cs);
    spectrum->add_option("--horizon", horizon, "Iterations per orbit");
    spectrum->add_option("--orbits", orbits, "Number of orbits");
    spectrum->add_option("--reorth-every", reorth, "QR re-orthonormalisation period");

    Common ce;
    int t_max = 0, step = 0;
    std::size_t length = 0, it_orbits = 0;
    bool adaptive = false;
    auto* entropy = app.add_subcommand("entropy", "Block and conditional entropy estimates");
    add_common(entropy, ce);
    entropy->add_option("--t-max", t_max, "Largest word length");
    entropy->add_option("--length", length, "Symbols per itinerary");
    entropy->add_option("--orbits", it_orbits, "Number of itineraries");
    entropy->add_option("--m", step, "Iterate f^m for the adaptive partition");
    entropy->add_flag("--adaptive", adaptive, "Also build the adaptive partition and estimate over it");

    Common cp;
    std::optional<int> pn, pl, pm, ps_max;
    std::size_t psamples = 0;
    auto* partition = app.add_subcommand("partition", "Build and diagnose the adaptive partition");
    add_common(partition, cp);
    partition->add_option("--n", pn, "Base level n");
    partition->add_option("--l", pl, "Refinement l (negative: minimal admissible)");
    partition->add_option("--m", pm, "Iterate f^m");
    partition->add_option("--s-max", ps_max, "Highest level kept");
    partition->add_option("--samples", psamples, "Build samples");
    bool decompose = false;
    partition->add_flag("--decomposition", decompose, "Also run the conditional-entropy decomposition");

    Common cc;
    auto* conditions = app.add_subcommand("check-conditions", "Invariance, condition (B) and condition (A)");
    add_common(conditions, cc);

    Common cw;
    std::vector<int> wn, wl, wm;
    auto* sweep_cmd = app.add_subcommand("sweep", "Partition and entropy figures over an (n, l, m) grid");
    add_common(sweep_cmd, cw);
    sweep_cmd->add_option("--n", wn, "Values of n")->delimiter(',');
    sweep_cmd->add_option("--l", wl, "Values of l (negative: minimal admissible)")->delimiter(',');
    sweep_cmd->add_option("--m", wm, "Values of m")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const auto& n : benchmark_names()) std::cout << n << '\n';
            return 0;
        }
        if (verify->parsed()) {
            RunOptions o;
            o.exec = exec_of(cv);
            o.run_sweep = !no_sweep;
            return finish(run_verification(load(cv), o), cv);
        }
        if (spectrum->parsed()) {
            BenchmarkSpec s = load(cs);
            if (horizon > 0) s.horizon = horizon;
            if (orbits > 0) s.rhs_orbits = orbits;
            if (reorth > 0) s.reorth_every = reorth;
            RunOptions o{exec_of(cs), false, {"spectrum"}};
            return print_stage(run_verification(s, o), cs, {"spectrum"});
        }
        if (entropy->parsed()) {
            BenchmarkSpec s = load(ce);
            if (t_max > 0) s.t_max = t_max;
            if (length > 0) s.itinerary_length = length;
            if (it_orbits > 0) s.itinerary_orbits = it_orbits;
            if (step > 0) s.m = step;
            RunOptions o{exec_of(ce), false, {"entropy"}};
            if (adaptive) o.stages.push_back("partition");
            return print_stage(run_verification(s, o), ce, {"entropy"});
        }
        if (partition->parsed()) {
            BenchmarkSpec s = load(cp);
            if (pn) s.n = *pn;
            if (pl) s.l = *pl;
            if (pm) s.m = *pm;
            if (ps_max) s.s_max = *ps_max;
            if (psamples > 0) s.partition_samples = psamples;
            RunOptions o{exec_of(cp), false, {"partition"}};
            if (decompose) o.stages.push_back("decomposition");
            return print_stage(run_verification(s, o), cp, {"partition", "decomposition"});
        }
        if (conditions->parsed()) {
            RunOptions o{exec_of(cc), false, {"invariance", "condition_B", "condition_A"}};
            return print_stage(run_verification(load(cc), o), cc, o.stages);
        }
        if (sweep_cmd->parsed()) {
            const BenchmarkSpec s = load(cw);
            const SweepResult r = sweep(s, parse_ints(wn, s.sweep_n.empty() ? std::vector<int>{s.n} : s.sweep_n),
                                        parse_ints(wl, s.sweep_l.empty() ? std::vector<int>{0, -1} : s.sweep_l),
                                        parse_ints(wm, s.sweep_m), exec_of(cw));
            if (!cw.out.empty()) {
                std::filesystem::create_directories(cw.out);
                std::ofstream csv(std::filesystem::path(cw.out) / "sweep.csv");
                if (!csv) throw Error("cannot write " + (std::filesystem::path(cw.out) / "sweep.csv").string());
                write_sweep_csv(csv, r);
            }
            if (cw.json) std::cout << to_json(r).dump(2) << '\n';
            else write_sweep_csv(std::cout, r);
            bool failed = false;
            for (const auto& row : r.rows) failed = failed || !row.ok;
            return failed ? 1 : 0;
        }
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
