#pragma once

// Coverability driver.  Decides whether a target thread state is reachable
// from some initial configuration (any number of threads) by enumerating
// quotient paths in rank order: loop-free and simple-loop plans are decided
// exactly through max-plus constraint systems, spaghetti or spawning plans
// fall back to backward search restricted to the plan's slice.  A plain
// whole-diagram backward-search engine and a differential mode are included.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ttdcov/bws.hpp"
#include "ttdcov/ettd.hpp"
#include "ttdcov/model.hpp"
#include "ttdcov/presburger.hpp"
#include "ttdcov/summary.hpp"

namespace ttdcov {

enum class Verdict : std::uint8_t { Reachable, Unreachable, Unknown };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Reachable: return "REACHABLE";
        case Verdict::Unreachable: return "UNREACHABLE";
        case Verdict::Unknown: return "UNKNOWN";
    }
    throw std::logic_error("bad verdict");
}

enum class Engine : std::uint8_t { Pathwise, Bws, Both };

struct CheckOptions {
    Engine engine = Engine::Pathwise;
    std::size_t max_paths = kDefaultPathCap;
    bool collect_dumps = false;  // keep row dumps of every examined system
    bool collect_smt = false;    // keep SMT-LIB renderings of every examined system
};

struct CheckStats {
    std::size_t paths = 0;      // plans examined
    std::size_t loopfree = 0;   // plans of rank class 0
    std::size_t simple = 0;     // plans of rank class 1 or 2
    std::size_t spaghetti = 0;  // plans of rank class 3
    std::size_t solver_calls = 0;
    std::size_t bws_calls = 0;
    double time_ms = 0.0;  // wall clock; the only nondeterministic field
};

struct CheckResult {
    Verdict verdict = Verdict::Unknown;
    bool truncated = false;   // path cap hit before a decision
    bool normalized = false;  // multi-initial diagram was collapsed first
    // Evidence: loop counts of the satisfied plan variant (lexicographically
    // smallest, by symbol index), or a replayable backward-search witness.
    bool has_kappa_witness = false;
    std::vector<std::pair<int, std::int64_t>> kappa_witness;
    std::optional<BwsResult> bws_evidence;
    std::vector<std::string> constraint_dumps;
    std::vector<std::string> smt_dumps;
    CheckStats stats;
    // Differential mode bookkeeping.
    bool disagreement = false;
    std::optional<Verdict> pathwise_verdict;
    std::optional<Verdict> bws_verdict;
};

namespace detail {

inline CheckResult check_pathwise(const Ttd& input, const CheckOptions& opts) {
    CheckResult r;
    if (std::binary_search(input.initial_states.begin(), input.initial_states.end(),
                           input.target)) {
        // The target is itself initial: reachable with a single thread.
        r.verdict = Verdict::Reachable;
        BwsResult ev;
        ev.coverable = true;
        ev.witness_start = CounterState::single(input.target.s, input.target.l, 1);
        r.bws_evidence = std::move(ev);
        return r;
    }

    NormalizeResult norm = normalize_initial_states(input);
    const Ttd& d = norm.ttd;
    r.normalized = norm.changed;

    QuotientGraph q = scc_quotient(build_ettd(d));
    if (!sequentially_reachable(q)) {
        r.verdict = Verdict::Unreachable;
        return r;
    }

    CounterState target = CounterState::single(d.target.s, d.target.l, 1);
    bool reachable = false;
    bool cut = enumerate_paths(q, opts.max_paths, [&](const PathPlan& plan) {
        ++r.stats.paths;
        if (plan.rank_class == 0)
            ++r.stats.loopfree;
        else if (plan.rank_class == 3)
            ++r.stats.spaghetti;
        else
            ++r.stats.simple;

        if (plan.contains_spaghetti || plan.contains_spawn) {
            ++r.stats.bws_calls;
            BwsResult br = bws(d, target, std::span<const Edge>(plan.slice));
            if (!br.coverable) return true;
            r.bws_evidence = std::move(br);
            reachable = true;
            return false;
        }

        for (const PathConstraint& pc : assemble_variants(plan, d)) {
            RewriteResult rw = rewrite_maxplus(pc);
            if (opts.collect_dumps) r.constraint_dumps.push_back(dump_rows(pc));
            if (opts.collect_smt) r.smt_dumps.push_back(to_smtlib(rw));
            ++r.stats.solver_calls;
            SatResult res = solve(rw.formula);
            if (res.status != SatStatus::Sat) continue;

            // Minimize the loop counts lexicographically by re-solving with
            // tightening bounds; each accepted probe strictly decreases.
            std::vector<Formula> fixed = {rw.formula};
            Model model = std::move(res.model);
            for (const KappaVar& kv : pc.kappas) {
                var_t id = rw.kappa_var.at(kv.index);
                std::int64_t cur = model.at(id);
                while (cur > kv.lower_bound) {
                    std::vector<Formula> probe = fixed;
                    probe.push_back(Formula::make(
                        make_atom(LinExpr::var(id), Rel::Le, LinExpr::of(cur - 1))));
                    ++r.stats.solver_calls;
                    SatResult tighter = solve(Formula::conj(std::move(probe)));
                    if (tighter.status != SatStatus::Sat) break;
                    model = std::move(tighter.model);
                    cur = model.at(id);
                }
                fixed.push_back(
                    Formula::make(make_atom(LinExpr::var(id), Rel::Eq, LinExpr::of(cur))));
                r.kappa_witness.emplace_back(kv.index, cur);
            }
            r.has_kappa_witness = true;
            reachable = true;
            return false;
        }
        return true;
    });

    if (reachable)
        r.verdict = Verdict::Reachable;
    else if (cut) {
        r.verdict = Verdict::Unknown;
        r.truncated = true;
    } else {
        r.verdict = Verdict::Unreachable;
    }
    return r;
}

inline CheckResult check_bws(const Ttd& d) {
    CheckResult r;
    ++r.stats.bws_calls;
    BwsResult br = bws(d, CounterState::single(d.target.s, d.target.l, 1));
    r.verdict = br.coverable ? Verdict::Reachable : Verdict::Unreachable;
    r.bws_evidence = std::move(br);
    return r;
}

}  // namespace detail

inline CheckResult check(const Ttd& d, const CheckOptions& opts = {}) {
    auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    switch (opts.engine) {
        case Engine::Pathwise:
            r = detail::check_pathwise(d, opts);
            r.pathwise_verdict = r.verdict;
            break;
        case Engine::Bws:
            r = detail::check_bws(d);
            r.bws_verdict = r.verdict;
            break;
        case Engine::Both: {
            r = detail::check_pathwise(d, opts);
            CheckResult rb = detail::check_bws(d);
            r.pathwise_verdict = r.verdict;
            r.bws_verdict = rb.verdict;
            r.stats.bws_calls += rb.stats.bws_calls;
            if (!r.bws_evidence) r.bws_evidence = std::move(rb.bws_evidence);
            if (r.verdict == Verdict::Unknown) {
                r.verdict = rb.verdict;  // backward search always decides
            } else if (r.verdict != rb.verdict) {
                r.disagreement = true;
                r.verdict = Verdict::Unknown;
            }
            break;
        }
    }
    r.stats.time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace ttdcov
