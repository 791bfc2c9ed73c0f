#pragma once

// Backward coverability search over the counter semantics: the classic
// work-list algorithm on the well-quasi-ordered state space, computing minimal
// cover preimages until an initial state is hit or the minimal basis of the
// backward-reachable upward-closed set stabilizes.

#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "ttdcov/model.hpp"

namespace ttdcov {

// Antichain of counter states, kept minimal under the covering order.
// States with different shared components are incomparable and may coexist.
class MinBasis {
  public:
    // Returns false when p is dominated (covers some/equal element already
    // present makes p redundant); otherwise inserts p and drops every element
    // that covers p.
    bool insert(const CounterState& p) {
        for (const CounterState& u : elems_)
            if (covers(p, u)) return false;
        std::erase_if(elems_, [&](const CounterState& u) { return covers(u, p); });
        elems_.push_back(p);
        return true;
    }

    bool dominates(const CounterState& p) const {
        for (const CounterState& u : elems_)
            if (covers(p, u)) return true;
        return false;
    }

    const std::vector<CounterState>& elements() const { return elems_; }
    std::size_t size() const { return elems_.size(); }

  private:
    std::vector<CounterState> elems_;
};

struct CoverPreElem {
    CounterState state;
    Edge via;
};

namespace detail {

// One backward firing step; nullopt when the edge does not lead into w's
// shared component.  Missing threads on the successor side are materialized
// first (the preimage then simply asks for one thread less), so the result can
// exceed w's thread count by at most one.
inline std::optional<CounterState> fire_backward(const Edge& e, const CounterState& w) {
    if (w.shared() != e.dst.s) return std::nullopt;
    CounterState c = w;
    c.set_shared(e.src.s);
    if (e.kind == EdgeKind::Real) {
        if (c.get(e.dst.l) >= 1) {
            c.add(e.dst.l, -1);
            c.add(e.src.l, +1);
        } else {
            c.add(e.src.l, +1);
        }
    } else {
        if (c.get(e.dst.l) == 0) c.add(e.dst.l, +1);  // the spawned thread must exist afterwards
        c.add(e.dst.l, -1);
        if (c.get(e.src.l) == 0) c.add(e.src.l, +1);  // the spawner exists before and after
    }
    assert(c.total() <= w.total() + 1);
    return c;
}

}  // namespace detail

// Minimal cover preimages of the upward closure of w, together with the edge
// that generated each element.  `edges` is the (possibly restricted) edge set
// to fire backward.
inline std::vector<CoverPreElem> cover_pre(const CounterState& w, std::span<const Edge> edges) {
    std::vector<CoverPreElem> out;
    for (const Edge& e : edges) {
        std::optional<CounterState> p = detail::fire_backward(e, w);
        if (!p) continue;
        bool dominated = false;
        for (const CoverPreElem& q : out)
            if (covers(*p, q.state)) {
                dominated = true;
                break;
            }
        if (dominated) continue;
        std::erase_if(out, [&](const CoverPreElem& q) { return covers(q.state, *p); });
        out.push_back({std::move(*p), e});
    }
    return out;
}

inline std::vector<CoverPreElem> cover_pre(const CounterState& w, const Ttd& d) {
    return cover_pre(w, std::span<const Edge>(d.edges));
}

struct BwsStats {
    std::uint64_t expanded = 0;   // work-list elements processed
    std::uint64_t generated = 0;  // cover preimages produced
    std::uint64_t discarded = 0;  // preimages dominated by the basis
    std::size_t basis_peak = 0;
};

struct BwsResult {
    bool coverable = false;
    std::optional<CounterState> witness_start;       // an initial counter state
    std::vector<std::pair<Edge, CounterState>> witness_steps;  // forward replay from witness_start
    BwsStats stats;
};

namespace detail {

// All threads sit on initial locals of one initial shared component.
inline bool is_initial_covered(const Ttd& d, const CounterState& p) {
    for (ThreadState t : d.initial_states) {
        if (t.s != p.shared()) continue;
        bool ok = true;
        for (const auto& [l, n] : p.entries()) {
            (void)n;
            if (!std::binary_search(d.initial_states.begin(), d.initial_states.end(), ThreadState{p.shared(), l})) {
                ok = false;
                break;
            }
        }
        if (ok) return true;
    }
    return false;
}

}  // namespace detail

// Decides whether some initial configuration (any thread count) can reach a
// state covering q.  When `slice` is given, only those edges are fired; the
// verdict then refers to the diagram restricted to the slice.
inline BwsResult bws(const Ttd& d, const CounterState& q,
                     std::optional<std::span<const Edge>> slice = std::nullopt) {
    std::span<const Edge> edges = slice ? *slice : std::span<const Edge>(d.edges);
    BwsResult res;

    struct Node {
        CounterState st;
        int parent;
        Edge via;
        bool in_basis = false;
    };
    std::vector<Node> arena;
    std::vector<int> basis;  // ids of arena nodes forming the minimal basis

    auto basis_dominates = [&](const CounterState& p) {
        for (int id : basis)
            if (covers(p, arena[id].st)) return true;
        return false;
    };
    auto basis_insert = [&](int id) {
        std::erase_if(basis, [&](int u) {
            if (covers(arena[u].st, arena[id].st)) {
                arena[u].in_basis = false;
                return true;
            }
            return false;
        });
        arena[id].in_basis = true;
        basis.push_back(id);
    };

    // work-list ordered by total thread count, FIFO among equal counts
    struct WEntry {
        count_t total;
        std::uint64_t seq;
        int id;
        bool operator>(const WEntry& o) const {
            return total != o.total ? total > o.total : seq > o.seq;
        }
    };
    std::priority_queue<WEntry, std::vector<WEntry>, std::greater<WEntry>> work;
    std::uint64_t seq = 0;

    auto finish = [&](int id) {
        res.coverable = true;
        res.witness_start = arena[id].st;
        CounterState cur = arena[id].st;
        for (int n = id; arena[n].parent >= 0; n = arena[n].parent) {
            std::optional<CounterState> next = fire(arena[n].via, cur);
            assert(next);
            cur = *next;
            res.witness_steps.push_back({arena[n].via, cur});
        }
        assert(covers(cur, q));
        return res;
    };

    arena.push_back({q, -1, {}});
    if (detail::is_initial_covered(d, q)) return finish(0);
    basis_insert(0);
    work.push({q.total(), seq++, 0});

    while (!work.empty()) {
        WEntry top = work.top();
        work.pop();
        if (!arena[top.id].in_basis) continue;  // evicted while queued
        ++res.stats.expanded;

        CounterState w_state = arena[top.id].st;  // arena may reallocate below
        for (CoverPreElem& pre : cover_pre(w_state, edges)) {
            ++res.stats.generated;
            if (basis_dominates(pre.state)) {
                ++res.stats.discarded;
                continue;
            }
            int id = static_cast<int>(arena.size());
            arena.push_back({pre.state, top.id, pre.via});
            if (detail::is_initial_covered(d, pre.state)) return finish(id);
            basis_insert(id);
            res.stats.basis_peak = std::max(res.stats.basis_peak, basis.size());
            work.push({pre.state.total(), seq++, id});
        }
    }
    return res;
}

}  // namespace ttdcov
