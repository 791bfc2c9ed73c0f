// Command-line front end: `check` decides coverability of a diagram's target
// thread state, `gen` produces random diagrams for differential testing.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include "ttdcov/check.hpp"

namespace {

std::string edge_str(const ttdcov::Edge& e) {
    return std::to_string(e.src.s) + " " + std::to_string(e.src.l) +
           (e.kind == ttdcov::EdgeKind::Real ? " -> " : " +> ") + std::to_string(e.dst.s) + " " +
           std::to_string(e.dst.l);
}

struct CheckArgs {
    std::string file;
    std::string engine = "pathwise";
    std::size_t max_paths = ttdcov::kDefaultPathCap;
    std::string emit_smt;
    std::string dump_quotient;
    bool dump_constraints = false;
    std::uint64_t seed = 0;
};

int run_check(const CheckArgs& args) {
    using namespace ttdcov;

    std::ifstream in(args.file);
    if (!in.good()) {
        std::cerr << "error: cannot open " << args.file << "\n";
        return 2;
    }
    ParseResult parsed;
    try {
        parsed = parse_ttd(in);
    } catch (const parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    for (const std::string& w : parsed.warnings) std::cerr << "warning: " << w << "\n";
    const Ttd& d = parsed.ttd;

    if (!args.dump_quotient.empty()) {
        try {
            NormalizeResult norm = normalize_initial_states(d);
            std::ofstream out(args.dump_quotient);
            if (!out.good()) {
                std::cerr << "error: cannot write " << args.dump_quotient << "\n";
                return 2;
            }
            out << to_dot(scc_quotient(build_ettd(norm.ttd)));
        } catch (const ttd_error& e) {
            std::cerr << "warning: quotient dump failed: " << e.what() << "\n";
        }
    }

    CheckOptions opts;
    if (args.engine == "bws")
        opts.engine = Engine::Bws;
    else if (args.engine == "both")
        opts.engine = Engine::Both;
    opts.max_paths = args.max_paths;
    opts.collect_dumps = args.dump_constraints;
    opts.collect_smt = !args.emit_smt.empty();

    CheckResult r;
    try {
        r = check(d, opts);
    } catch (const ttd_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (r.normalized)
        std::cerr << "warning: multi-initial diagram was normalized; witness states refer to "
                     "the normalized diagram\n";
    if (r.disagreement)
        std::cerr << "error: engine disagreement: pathwise=" << to_string(*r.pathwise_verdict)
                  << " bws=" << to_string(*r.bws_verdict) << "\n";

    std::cout << "VERDICT: " << to_string(r.verdict) << (r.truncated ? " (path cap)" : "")
              << "\n";
    if (r.verdict == Verdict::Reachable) {
        if (r.has_kappa_witness) {
            std::cout << "WITNESS: kappa";
            for (auto [index, count] : r.kappa_witness)
                std::cout << " k" << index << "=" << count;
            std::cout << "\n";
        } else if (r.bws_evidence && r.bws_evidence->coverable) {
            std::cout << "WITNESS: trace";
            bool first = true;
            for (const auto& [e, after] : r.bws_evidence->witness_steps) {
                std::cout << (first ? " " : "; ") << edge_str(e);
                first = false;
            }
            std::cout << "\n";
        }
    }
    std::cout << "STATS: paths=" << r.stats.paths << " loopfree=" << r.stats.loopfree
              << " simple=" << r.stats.simple << " spaghetti=" << r.stats.spaghetti
              << " solver_calls=" << r.stats.solver_calls << " bws_calls=" << r.stats.bws_calls
              << " time_ms=" << static_cast<long long>(std::llround(r.stats.time_ms)) << "\n";

    if (args.dump_constraints)
        for (std::size_t i = 0; i < r.constraint_dumps.size(); ++i)
            std::cout << "CONSTRAINTS " << i << ":\n" << r.constraint_dumps[i];

    if (!args.emit_smt.empty()) {
        if (r.smt_dumps.empty()) {
            std::cerr << "warning: no constraint systems were examined; " << args.emit_smt
                      << " not written\n";
        } else {
            std::ofstream out(args.emit_smt);
            if (!out.good()) {
                std::cerr << "error: cannot write " << args.emit_smt << "\n";
                return 2;
            }
            for (std::size_t i = 0; i < r.smt_dumps.size(); ++i) {
                if (i) out << "(reset)\n";
                out << "; system " << i << "\n" << r.smt_dumps[i];
            }
        }
    }

    if (r.disagreement) return 4;
    if (r.verdict == Verdict::Unknown) return 3;
    return 0;
}

struct GenArgs {
    std::uint32_t shared = 4;
    std::uint32_t local = 4;
    std::size_t edges = 8;
    double spawn_fraction = 0.0;
    std::uint64_t seed = 0;
    std::string output;
};

int run_gen(const GenArgs& args) {
    using namespace ttdcov;
    Ttd d;
    try {
        d = random_ttd(args.shared, args.local, args.edges, args.spawn_fraction, args.seed);
    } catch (const ttd_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::string text = serialize_ttd(d);
    if (args.output.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(args.output);
        if (!out.good()) {
            std::cerr << "error: cannot write " << args.output << "\n";
            return 2;
        }
        out << text;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"thread-state coverability checker for transition diagrams"};
    app.require_subcommand(1);

    CheckArgs ca;
    CLI::App* chk = app.add_subcommand("check", "decide whether the target thread state is coverable");
    chk->add_option("file", ca.file, "input diagram (.ttd)")->required();
    chk->add_option("--engine", ca.engine, "pathwise, bws, or both (differential)")
        ->check(CLI::IsMember({"pathwise", "bws", "both"}));
    chk->add_option("--max-paths", ca.max_paths, "cap on enumerated quotient paths");
    chk->add_option("--emit-smt", ca.emit_smt, "write examined constraint systems as SMT-LIB");
    chk->add_option("--dump-quotient", ca.dump_quotient, "write the quotient graph in DOT form");
    chk->add_flag("--dump-constraints", ca.dump_constraints,
                  "print the per-local constraint rows of examined systems");
    chk->add_option("--seed", ca.seed,
                    "accepted for interface compatibility; checking is deterministic");

    GenArgs ga;
    CLI::App* gen = app.add_subcommand("gen", "generate a random diagram");
    gen->add_option("--shared", ga.shared, "number of shared states")->check(CLI::PositiveNumber);
    gen->add_option("--local", ga.local, "number of local states")->check(CLI::PositiveNumber);
    gen->add_option("--edges", ga.edges, "number of edges");
    gen->add_option("--spawn-fraction", ga.spawn_fraction, "fraction of spawn edges")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--seed", ga.seed, "generator seed");
    gen->add_option("-o,--output", ga.output, "output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (chk->parsed()) return run_check(ca);
    return run_gen(ga);
}
