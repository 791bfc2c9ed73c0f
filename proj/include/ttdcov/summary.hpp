#pragma once

// Exact max-plus summaries of walks in the expanded diagram: per-local-state
// symbolic execution of loop-free segments, compact floor/delta forms, closed
// forms for iterated simple loops, and assembly of whole-path constraint
// systems ready for rewriting into linear integer arithmetic.

#include <algorithm>
#include <bit>
#include <cassert>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttdcov/ettd.hpp"
#include "ttdcov/model.hpp"

namespace ttdcov {

// Raised when a walk cannot be summarized exactly (spawn edges have no
// summary clause; spaghetti interiors have no single walk).  Callers route
// such plans to the backward search instead.
class not_summarizable : public ttd_error {
  public:
    using ttd_error::ttd_error;
};

// One chain element.  Chains evaluate strictly left to right:
//   Add:           v := v + c
//   MaxAdd:        v := max(v + c, b)
//   MaxAddScaled:  v := max(v + (kappa + shift) * c, b)
struct Atom {
    enum class Kind : std::uint8_t { Add, MaxAdd, MaxAddScaled };
    Kind kind = Kind::Add;
    std::int64_t b = 0;      // floor, MaxAdd / MaxAddScaled only (always >= 0)
    std::int64_t c = 0;      // summand or, for MaxAddScaled, the loop delta
    int kappa = -1;          // loop-count symbol index, MaxAddScaled only
    std::int64_t shift = 0;  // MaxAddScaled applies (kappa + shift) * c

    static Atom add(std::int64_t c) { return {Kind::Add, 0, c, -1, 0}; }
    static Atom max_add(std::int64_t b, std::int64_t c) { return {Kind::MaxAdd, b, c, -1, 0}; }
    static Atom max_add_scaled(std::int64_t b, std::int64_t c, int kappa, std::int64_t shift) {
        return {Kind::MaxAddScaled, b, c, kappa, shift};
    }

    bool operator==(const Atom&) const = default;
};

// A summary chain for one local state: symbolic start n_l or a concrete
// start value, followed by atoms.
struct SummaryTerm {
    bool symbolic_start = true;
    local_t local = 0;
    std::int64_t start = 0;  // used when !symbolic_start
    std::vector<Atom> atoms;
};

inline std::int64_t eval_atoms(std::span<const Atom> atoms, std::int64_t v,
                               std::span<const std::int64_t> kappas) {
    for (const Atom& a : atoms) {
        switch (a.kind) {
            case Atom::Kind::Add: v += a.c; break;
            case Atom::Kind::MaxAdd: v = std::max(v + a.c, a.b); break;
            case Atom::Kind::MaxAddScaled: {
                if (a.kappa < 0 || a.kappa >= static_cast<int>(kappas.size()))
                    throw ttd_error("loop-count symbol k" + std::to_string(a.kappa) +
                                    " missing from assignment");
                v = std::max(v + (kappas[a.kappa] + a.shift) * a.c, a.b);
                break;
            }
        }
    }
    return v;
}

// Left-to-right evaluation; `n` replaces a symbolic start.
inline std::int64_t eval_term(const SummaryTerm& t, std::int64_t n,
                              std::span<const std::int64_t> kappas = {}) {
    return eval_atoms(t.atoms, t.symbolic_start ? n : t.start, kappas);
}

// Symbolic backward execution of a loop-free walk for local state l.  The
// walk's edges are visited last to first; a real edge starting at l appends
// +1, a real edge ending at l appends -1 (both, in that order, for an edge
// that starts and ends at l), and an expansion edge starting at l appends the
// floor-at-zero decrement followed by +1.
inline SummaryTerm segment_summary(std::span<const EEdge> edges, local_t l) {
    SummaryTerm t{true, l, 0, {}};
    for (std::size_t i = edges.size(); i-- > 0;) {
        const EEdge& e = edges[i];
        switch (e.kind) {
            case EEdgeKind::Spawn:
                throw not_summarizable("spawn edges have no summary");
            case EEdgeKind::Padding:
                throw not_summarizable("padding edges do not belong to walks");
            case EEdgeKind::Real:
                if (e.src.l == l) t.atoms.push_back(Atom::add(+1));
                if (e.dst.l == l) t.atoms.push_back(Atom::add(-1));
                break;
            case EEdgeKind::Expansion:
                if (e.src.l == l) {
                    t.atoms.push_back(Atom::max_add(0, -1));
                    t.atoms.push_back(Atom::add(+1));
                }
                break;
        }
    }
    return t;
}

// Floor/delta pair of a walk for local state l: delta counts real edges
// leaving l minus real edges entering l; the floor is the symbolic execution
// evaluated at 1 when the walk ends in l (one thread must occupy the walk's
// endpoint) and at 0 otherwise.  On its feasible domain the walk's summary
// equals n -> max(n + delta, floor).
struct CompactForm {
    std::int64_t b = 0;
    std::int64_t delta = 0;
    bool ends_in_l = false;  // if so, summaries only apply for n >= 1
};

inline CompactForm compact_form(std::span<const EEdge> edges, local_t l) {
    CompactForm f;
    for (const EEdge& e : edges) {
        if (e.kind == EEdgeKind::Spawn) throw not_summarizable("spawn edges have no summary");
        if (e.kind != EEdgeKind::Real) continue;
        if (e.src.l == l) ++f.delta;
        if (e.dst.l == l) --f.delta;
    }
    f.ends_in_l = !edges.empty() && edges.back().dst.l == l;
    f.b = eval_term(segment_summary(edges, l), f.ends_in_l ? 1 : 0);
    assert(f.b >= 0);
    return f;
}

// Closed form for kappa >= 1 traversals of a simple loop: the chain
// n_l MaxAdd(b, delta) MaxAddScaled(b, delta, kappa, -1); the first atom is
// the first traversal, the scaled atom the remaining kappa - 1.
inline SummaryTerm loop_summary(std::span<const EEdge> cycle, local_t l, int kappa_index) {
    assert(!cycle.empty() && cycle.front().src == cycle.back().dst);
    CompactForm f = compact_form(cycle, l);
    SummaryTerm t{true, l, 0, {}};
    t.atoms.push_back(Atom::max_add(f.b, f.delta));
    t.atoms.push_back(Atom::max_add_scaled(f.b, f.delta, kappa_index, -1));
    return t;
}

// ---------------------------------------------------------------------------
// whole-path constraint assembly
// ---------------------------------------------------------------------------

struct KappaVar {
    int index = 0;                // loop-count symbol index (plan loop order)
    std::int64_t lower_bound = 1;  // active loops run at least once
};

// One per-local row of the assembled system: a concrete start value, the
// backward chain of compact atoms, and the condition the final value must
// satisfy (>= 1 at the initial local state, = 0 everywhere else).
struct ChainRow {
    local_t local = 0;
    std::int64_t start = 0;
    std::vector<Atom> atoms;
    enum class Final : std::uint8_t { Zero, GeOne } final_condition = Final::Zero;
};

struct PathConstraint {
    std::vector<KappaVar> kappas;
    std::vector<ChainRow> rows;       // one per local state, ascending
    std::vector<bool> loops_active;   // per plan loop: cycle atoms present?
};

inline std::int64_t eval_row(const ChainRow& row, std::span<const std::int64_t> kappas) {
    return eval_atoms(row.atoms, row.start, kappas);
}

// Assembles the constraint system of one plan variant.  active[i] selects
// whether loop i contributes its cycle atoms (with kappa_i >= 1) or is
// crossed without completing a cycle (no atoms, no symbol).  The chain walks
// the plan backward: final segment first, then per loop its cycle atoms and
// the entry-to-exit partial, down to the initial segment.
inline PathConstraint assemble_constraints(const PathPlan& plan, const Ttd& d,
                                           const std::vector<bool>& active) {
    if (plan.contains_spaghetti)
        throw not_summarizable("spaghetti plans are decided by backward search");
    if (d.initial_states.size() != 1)
        throw std::logic_error("constraint assembly requires a unique initial state");
    assert(active.size() == plan.loops.size());
    assert(plan.segments.size() == plan.loops.size() + 1);

    PathConstraint out;
    out.loops_active = active;
    for (std::size_t i = 0; i < plan.loops.size(); ++i)
        if (active[i]) out.kappas.push_back({plan.loops[i].kappa_index, 1});

    local_t l_i = d.initial_states[0].l;
    for (local_t l = 0; l < d.local_count; ++l) {
        ChainRow row;
        row.local = l;
        row.start = l == d.target.l ? 1 : 0;
        row.final_condition = l == l_i ? ChainRow::Final::GeOne : ChainRow::Final::Zero;

        auto append_compact = [&](std::span<const EEdge> edges) {
            if (edges.empty()) return;
            CompactForm f = compact_form(edges, l);
            row.atoms.push_back(Atom::max_add(f.b, f.delta));
        };
        append_compact(plan.segments.back());
        for (std::size_t i = plan.loops.size(); i-- > 0;) {
            const LoopVisit& v = plan.loops[i];
            if (active[i]) {
                CompactForm f = compact_form(v.cycle, l);
                row.atoms.push_back(Atom::max_add(f.b, f.delta));
                row.atoms.push_back(Atom::max_add_scaled(f.b, f.delta, v.kappa_index, -1));
            }
            append_compact(v.partial);
            append_compact(plan.segments[i]);
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

// All loop-activity variants of a plan, ordered by ascending number of active
// loops, then by the numeric value of the activity mask (bit i = loop i).
inline std::vector<PathConstraint> assemble_variants(const PathPlan& plan, const Ttd& d) {
    std::size_t m = plan.loops.size();
    if (m > 20) throw not_summarizable("too many loops for variant enumeration");
    std::vector<std::uint32_t> masks;
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) masks.push_back(mask);
    std::sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
        return std::pair(std::popcount(a), a) < std::pair(std::popcount(b), b);
    });
    std::vector<PathConstraint> out;
    for (std::uint32_t mask : masks) {
        std::vector<bool> active(m);
        for (std::size_t i = 0; i < m; ++i) active[i] = (mask >> i) & 1;
        out.push_back(assemble_constraints(plan, d, active));
    }
    return out;
}

// ---------------------------------------------------------------------------
// human-readable row dump
// ---------------------------------------------------------------------------

// A row's value when it does not depend on any loop count (all scaled atoms
// have coefficient 0); nullopt otherwise.
inline std::optional<std::int64_t> row_constant(const ChainRow& row) {
    int max_kappa = -1;
    for (const Atom& a : row.atoms) {
        if (a.kind == Atom::Kind::MaxAddScaled && a.c != 0) return std::nullopt;
        if (a.kind == Atom::Kind::MaxAddScaled) max_kappa = std::max(max_kappa, a.kappa);
    }
    std::vector<std::int64_t> ones(max_kappa + 1, 1);
    return eval_row(row, ones);
}

// One line per local state in a tabular style: the start value, each max-plus
// atom as "(+)_floor summand", and the required final condition, with a note
// when the row's value is a constant.
inline std::string dump_rows(const PathConstraint& pc) {
    std::string out;
    for (const ChainRow& row : pc.rows) {
        out += "n" + std::to_string(row.local) + ": " + std::to_string(row.start);
        for (const Atom& a : row.atoms) {
            switch (a.kind) {
                case Atom::Kind::Add: out += " + " + std::to_string(a.c); break;
                case Atom::Kind::MaxAdd:
                    out += " (+)_" + std::to_string(a.b) + " " + std::to_string(a.c);
                    break;
                case Atom::Kind::MaxAddScaled:
                    out += " (+)_" + std::to_string(a.b) + " (k" + std::to_string(a.kappa) +
                           (a.shift < 0 ? "-" + std::to_string(-a.shift)
                                        : "+" + std::to_string(a.shift)) +
                           ")*" + std::to_string(a.c);
                    break;
            }
        }
        out += row.final_condition == ChainRow::Final::GeOne ? " >= 1" : " = 0";
        if (std::optional<std::int64_t> c = row_constant(row)) {
            out += "   [simplifies to " + std::to_string(*c) +
                   (row.final_condition == ChainRow::Final::GeOne ? " >= 1]" : " = 0]");
        }
        out += "\n";
    }
    return out;
}

}  // namespace ttdcov
