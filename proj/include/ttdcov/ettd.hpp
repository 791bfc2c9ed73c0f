#pragma once

// Expanded diagram construction, SCC quotient with loop classification, the
// sequential-reachability fast path, and ranked enumeration of quotient paths
// concretized into path plans (segments + loop visits with symbolic counts).

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "ttdcov/model.hpp"

namespace ttdcov {

enum class EEdgeKind : std::uint8_t { Real, Spawn, Expansion, Padding };

inline const char* to_string(EEdgeKind k) {
    switch (k) {
        case EEdgeKind::Real: return "real";
        case EEdgeKind::Spawn: return "spawn";
        case EEdgeKind::Expansion: return "expansion";
        case EEdgeKind::Padding: return "padding";
    }
    return "?";
}

// Edge of the expanded diagram.  Real/Spawn mirror base edges; Expansion edges
// are vertical analysis edges within one shared component; Padding edges hang
// the artificial pre-initial/post-final states onto the graph.
struct EEdge {
    ThreadState src;
    ThreadState dst;
    EEdgeKind kind = EEdgeKind::Real;

    auto operator<=>(const EEdge&) const = default;
};

inline EEdgeKind lift(EdgeKind k) {
    return k == EdgeKind::Real ? EEdgeKind::Real : EEdgeKind::Spawn;
}

// Maps a summarizable expanded edge back onto the base edge set (Real/Spawn
// kinds only).
inline Edge base_edge(const EEdge& e) {
    assert(e.kind == EEdgeKind::Real || e.kind == EEdgeKind::Spawn);
    return Edge{e.src, e.dst, e.kind == EEdgeKind::Real ? EdgeKind::Real : EdgeKind::Spawn};
}

struct Ettd {
    Ttd base;
    std::vector<EEdge> expansion_edges;  // sorted, unique

    // base edges (with lifted kinds) and expansion edges, sorted
    std::vector<EEdge> all_edges() const {
        std::vector<EEdge> out;
        out.reserve(base.edges.size() + expansion_edges.size());
        for (const Edge& e : base.edges) out.push_back({e.src, e.dst, lift(e.kind)});
        out.insert(out.end(), expansion_edges.begin(), expansion_edges.end());
        std::sort(out.begin(), out.end());
        return out;
    }
};

// Adds every vertical edge (s,l) -> (s,l'), l != l', such that some base edge
// enters (s,l) and either some base edge leaves (s,l') or (s,l') is the
// target.  Only base edges license expansion edges; expansion edges never
// license further ones.
inline Ettd build_ettd(const Ttd& d) {
    std::vector<std::vector<char>> has_in(d.shared_count, std::vector<char>(d.local_count, 0));
    std::vector<std::vector<char>> has_out(d.shared_count, std::vector<char>(d.local_count, 0));
    for (const Edge& e : d.edges) {
        has_out[e.src.s][e.src.l] = 1;
        has_in[e.dst.s][e.dst.l] = 1;
    }
    Ettd out{d, {}};
    for (shared_t s = 0; s < d.shared_count; ++s)
        for (local_t l = 0; l < d.local_count; ++l) {
            if (!has_in[s][l]) continue;
            for (local_t l2 = 0; l2 < d.local_count; ++l2) {
                if (l2 == l) continue;
                if (has_out[s][l2] || ThreadState{s, l2} == d.target)
                    out.expansion_edges.push_back({{s, l}, {s, l2}, EEdgeKind::Expansion});
            }
        }
    std::sort(out.expansion_edges.begin(), out.expansion_edges.end());
    return out;
}

enum class SccClass : std::uint8_t { Trivial, SimpleLoop, Spaghetti };

inline const char* to_string(SccClass c) {
    switch (c) {
        case SccClass::Trivial: return "trivial";
        case SccClass::SimpleLoop: return "simple";
        case SccClass::Spaghetti: return "spaghetti";
    }
    return "?";
}

struct Scc {
    std::vector<ThreadState> members;  // sorted
    std::vector<EEdge> inner_edges;    // both endpoints inside, sorted
    SccClass cls = SccClass::Trivial;

    bool has_expansion_edge() const {
        for (const EEdge& e : inner_edges)
            if (e.kind == EEdgeKind::Expansion) return true;
        return false;
    }
    bool has_spawn_edge() const {
        for (const EEdge& e : inner_edges)
            if (e.kind == EEdgeKind::Spawn) return true;
        return false;
    }
    bool all_real() const {
        for (const EEdge& e : inner_edges)
            if (e.kind != EEdgeKind::Real) return false;
        return true;
    }
};

struct QEdge {
    int from = -1;
    int to = -1;
    EEdge edge;
};

// Acyclic condensation of the expanded diagram.  Node ids are a topological
// order (every edge goes from a lower id to a higher one).  Kept a multigraph:
// each concrete border edge is its own quotient edge, because entry and exit
// points matter for summarization.
struct QuotientGraph {
    Ettd ettd;
    std::vector<Scc> nodes;
    std::vector<QEdge> edges;  // sorted by (from, to, edge)
    int source = -1;           // node containing the initial thread state (or its padding)
    int target = -1;           // node containing the target thread state (or its padding)
    bool padded_source = false;
    bool padded_target = false;

    int node_of(ThreadState t) const {
        auto it = std::lower_bound(vertex_node_.begin(), vertex_node_.end(),
                                   std::pair<ThreadState, int>{t, -1});
        if (it == vertex_node_.end() || it->first != t) return -1;
        return it->second;
    }

    std::vector<std::pair<ThreadState, int>> vertex_node_;  // sorted by vertex
};

namespace detail {

// Iterative Tarjan over an adjacency-list graph; returns components in
// topological order (sources first).
inline std::vector<std::vector<int>> tarjan_sccs(int n, const std::vector<std::vector<int>>& adj) {
    std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0);
    std::vector<int> stack;
    std::vector<std::vector<int>> comps;
    int next_index = 0;

    struct Frame {
        int v;
        std::size_t edge;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        std::vector<Frame> frames{{root, 0}};
        index[root] = low[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.edge < adj[f.v].size()) {
                int w = adj[f.v][f.edge++];
                if (index[w] == -1) {
                    index[w] = low[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    frames.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                if (low[f.v] == index[f.v]) {
                    std::vector<int> comp;
                    int w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        comp.push_back(w);
                    } while (w != f.v);
                    std::sort(comp.begin(), comp.end());
                    comps.push_back(std::move(comp));
                }
                int v = f.v;
                frames.pop_back();
                if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
            }
        }
    }
    std::reverse(comps.begin(), comps.end());  // Tarjan emits sinks first
    return comps;
}

}  // namespace detail

// Condenses the expanded diagram into its SCC quotient.  The initial and
// target thread states get artificial padding neighbors whenever their SCC is
// not trivial, so the quotient's source and target are always singleton nodes.
inline QuotientGraph scc_quotient(const Ettd& e) {
    if (e.base.initial_states.size() != 1)
        throw std::logic_error("scc_quotient requires a unique initial state");
    ThreadState t_i = e.base.initial_states[0];
    ThreadState t_f = e.base.target;

    std::vector<EEdge> edges = e.all_edges();
    std::vector<ThreadState> verts{t_i, t_f};
    for (const EEdge& ed : edges) {
        verts.push_back(ed.src);
        verts.push_back(ed.dst);
    }
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    auto vid = [&](ThreadState t) {
        return static_cast<int>(std::lower_bound(verts.begin(), verts.end(), t) - verts.begin());
    };

    std::vector<std::vector<int>> adj(verts.size());
    for (const EEdge& ed : edges) adj[vid(ed.src)].push_back(vid(ed.dst));
    std::vector<std::vector<int>> comps = detail::tarjan_sccs(static_cast<int>(verts.size()), adj);

    std::vector<int> comp_of(verts.size(), -1);
    for (std::size_t c = 0; c < comps.size(); ++c)
        for (int v : comps[c]) comp_of[v] = static_cast<int>(c);

    QuotientGraph q;
    q.ettd = e;
    q.nodes.resize(comps.size());
    for (std::size_t c = 0; c < comps.size(); ++c)
        for (int v : comps[c]) q.nodes[c].members.push_back(verts[v]);

    for (const EEdge& ed : edges) {
        int a = comp_of[vid(ed.src)], b = comp_of[vid(ed.dst)];
        if (a == b)
            q.nodes[a].inner_edges.push_back(ed);
        else
            q.edges.push_back({a, b, ed});
    }

    for (Scc& n : q.nodes) {
        std::sort(n.inner_edges.begin(), n.inner_edges.end());
        if (n.members.size() == 1 && n.inner_edges.empty()) {
            n.cls = SccClass::Trivial;
            continue;
        }
        bool simple = true;
        std::map<ThreadState, int> indeg, outdeg;
        for (const EEdge& ed : n.inner_edges) {
            ++outdeg[ed.src];
            ++indeg[ed.dst];
        }
        for (ThreadState m : n.members)
            if (indeg[m] != 1 || outdeg[m] != 1) simple = false;
        n.cls = simple ? SccClass::SimpleLoop : SccClass::Spaghetti;
    }

    q.source = comp_of[vid(t_i)];
    q.target = comp_of[vid(t_f)];

    // padding: hang artificial singleton neighbors onto a non-trivial source
    // or target SCC (fresh states lie outside the valid shared range)
    ThreadState pre{e.base.shared_count, 0};
    ThreadState post{e.base.shared_count, 1};
    if (q.nodes[q.source].cls != SccClass::Trivial) {
        q.padded_source = true;
        q.nodes.insert(q.nodes.begin(), Scc{{pre}, {}, SccClass::Trivial});
        for (QEdge& qe : q.edges) {
            ++qe.from;
            ++qe.to;
        }
        ++q.source;
        ++q.target;
        q.edges.push_back({0, q.source, {pre, t_i, EEdgeKind::Padding}});
        q.source = 0;
    }
    if (q.nodes[q.target].cls != SccClass::Trivial) {
        q.padded_target = true;
        int id = static_cast<int>(q.nodes.size());
        q.nodes.push_back(Scc{{post}, {}, SccClass::Trivial});
        q.edges.push_back({q.target, id, {t_f, post, EEdgeKind::Padding}});
        q.target = id;
    }

    std::sort(q.edges.begin(), q.edges.end(), [](const QEdge& a, const QEdge& b) {
        return std::tie(a.from, a.to, a.edge) < std::tie(b.from, b.to, b.edge);
    });
    for (const QEdge& qe : q.edges) assert(qe.from < qe.to);  // topological ids => acyclic

    for (std::size_t c = 0; c < q.nodes.size(); ++c)
        for (ThreadState m : q.nodes[c].members) q.vertex_node_.push_back({m, static_cast<int>(c)});
    std::sort(q.vertex_node_.begin(), q.vertex_node_.end());
    return q;
}

// Target reachable from source in the quotient DAG: the sequential
// overapproximation.  False soundly implies the cover query fails.
inline bool sequentially_reachable(const QuotientGraph& q) {
    if (q.source == q.target) return true;
    std::vector<char> seen(q.nodes.size(), 0);
    seen[q.source] = 1;
    // ids are topological, one sweep suffices
    for (const QEdge& e : q.edges)
        if (seen[e.from]) seen[e.to] = 1;
    return seen[q.target] != 0;
}

// One visited simple-loop node on a path: the walk enters at entry, follows
// `partial` to exit (possibly empty), and may append the full `cycle`
// (anchored at exit) any number of extra times, counted by kappa >= 0.
struct LoopVisit {
    ThreadState entry;
    ThreadState exit;
    std::vector<EEdge> partial;
    std::vector<EEdge> cycle;
    int kappa_index = 0;
    bool has_expansion = false;
    bool has_spawn = false;
};

struct PathPlan {
    // segments.size() == loops.size() + 1; the concrete walk is
    // segments[0] partial(loops[0]) segments[1] ... segments.back()
    std::vector<std::vector<EEdge>> segments;
    std::vector<LoopVisit> loops;
    bool contains_spaghetti = false;
    bool contains_spawn = false;  // spawn edge on the walk or in a visited loop
    int rank_class = 0;           // 0 loop-free, 1 all-real loops, 2 loops with expansion/spawn, 3 spaghetti
    std::vector<int> nodes;       // visited quotient nodes, in order
    std::vector<EEdge> border;    // underlying border edges of the quotient path
    std::vector<Edge> slice;      // base edges inside visited SCCs and on the path

    std::vector<EEdge> walk() const {
        std::vector<EEdge> w;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (i > 0) w.insert(w.end(), loops[i - 1].partial.begin(), loops[i - 1].partial.end());
            w.insert(w.end(), segments[i].begin(), segments[i].end());
        }
        return w;
    }
};

namespace detail {

inline int node_rank(const Scc& n) {
    switch (n.cls) {
        case SccClass::Trivial: return 0;
        case SccClass::SimpleLoop: return n.all_real() ? 1 : 2;
        case SccClass::Spaghetti: return 3;
    }
    return 3;
}

// lexicographically smallest shortest in-SCC path (BFS over sorted edges)
inline std::vector<EEdge> inner_path(const Scc& n, ThreadState from, ThreadState to) {
    if (from == to) return {};
    std::map<ThreadState, std::pair<ThreadState, EEdge>> parent;
    std::queue<ThreadState> bfs;
    bfs.push(from);
    while (!bfs.empty()) {
        ThreadState cur = bfs.front();
        bfs.pop();
        for (const EEdge& ed : n.inner_edges) {
            if (ed.src != cur || parent.count(ed.dst) || ed.dst == from) continue;
            parent.emplace(ed.dst, std::pair<ThreadState, EEdge>{cur, ed});
            if (ed.dst == to) goto done;
            bfs.push(ed.dst);
        }
    }
done:
    if (!parent.count(to)) throw std::logic_error("disconnected SCC interior");
    std::vector<EEdge> path;
    for (ThreadState cur = to; cur != from;) {
        auto& [prev, ed] = parent.at(cur);
        path.push_back(ed);
        cur = prev;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

// follows the unique out-edges of a simple loop from `from` until `stop`
inline std::vector<EEdge> follow_cycle(const Scc& n, ThreadState from, ThreadState stop) {
    std::vector<EEdge> out;
    ThreadState cur = from;
    do {
        const EEdge* next = nullptr;
        for (const EEdge& ed : n.inner_edges)
            if (ed.src == cur) {
                next = &ed;
                break;
            }
        assert(next != nullptr);
        out.push_back(*next);
        cur = next->dst;
    } while (cur != stop);
    return out;
}

inline PathPlan concretize(const QuotientGraph& q, const std::vector<int>& edge_ids) {
    PathPlan plan;
    std::vector<EEdge> cur_seg;
    ThreadState pos{};
    bool have_pos = false;
    int max_rank = 0;

    plan.nodes.push_back(q.source);
    auto traverse_node = [&](int node, ThreadState to) {
        assert(have_pos);
        const Scc& n = q.nodes[node];
        max_rank = std::max(max_rank, node_rank(n));
        if (n.cls == SccClass::Trivial) {
            assert(pos == to);
            return;
        }
        if (n.cls == SccClass::SimpleLoop) {
            LoopVisit visit;
            visit.entry = pos;
            visit.exit = to;
            visit.partial = pos == to ? std::vector<EEdge>{} : follow_cycle(n, pos, to);
            visit.cycle = follow_cycle(n, to, to);
            visit.kappa_index = static_cast<int>(plan.loops.size());
            visit.has_expansion = n.has_expansion_edge();
            visit.has_spawn = n.has_spawn_edge();
            plan.segments.push_back(std::move(cur_seg));
            cur_seg.clear();
            plan.loops.push_back(std::move(visit));
            return;
        }
        plan.contains_spaghetti = true;
        for (EEdge& ed : inner_path(n, pos, to)) cur_seg.push_back(ed);
    };

    for (int id : edge_ids) {
        const QEdge& qe = q.edges[id];
        if (have_pos) traverse_node(qe.from, qe.edge.src);
        if (qe.edge.kind != EEdgeKind::Padding) cur_seg.push_back(qe.edge);
        pos = qe.edge.dst;
        have_pos = true;
        plan.nodes.push_back(qe.to);
        plan.border.push_back(qe.edge);
    }
    // in-node traversal of the final node happens only when it is padded away;
    // otherwise the path ends exactly at the target state
    plan.segments.push_back(std::move(cur_seg));

    for (const LoopVisit& v : plan.loops) {
        for (const EEdge& ed : v.partial)
            if (ed.kind == EEdgeKind::Spawn) plan.contains_spawn = true;
        for (const EEdge& ed : v.cycle)
            if (ed.kind == EEdgeKind::Spawn) plan.contains_spawn = true;
    }
    for (const std::vector<EEdge>& seg : plan.segments)
        for (const EEdge& ed : seg)
            if (ed.kind == EEdgeKind::Spawn) plan.contains_spawn = true;
    plan.rank_class = max_rank;

    for (int node : plan.nodes)
        for (const EEdge& ed : q.nodes[node].inner_edges)
            if (ed.kind == EEdgeKind::Real || ed.kind == EEdgeKind::Spawn)
                plan.slice.push_back(base_edge(ed));
    for (int id : edge_ids) {
        const EEdge& ed = q.edges[id].edge;
        if (ed.kind == EEdgeKind::Real || ed.kind == EEdgeKind::Spawn)
            plan.slice.push_back(base_edge(ed));
    }
    std::sort(plan.slice.begin(), plan.slice.end());
    plan.slice.erase(std::unique(plan.slice.begin(), plan.slice.end()), plan.slice.end());
    return plan;
}

}  // namespace detail

inline constexpr std::size_t kDefaultPathCap = 100000;

// Streams every source-to-target path of the quotient multigraph in rank
// order: loop-free paths, then paths whose loops are all real, then paths with
// expansion (or spawn) loops, then paths through spaghetti SCCs; ties broken
// by edge count, then lexicographically by the border edge sequence.  The sink
// returns false to stop early.  Returns true when the enumeration was cut off
// (by the cap or by the sink) while more paths remained.
inline bool enumerate_paths(const QuotientGraph& q, std::size_t cap,
                            const std::function<bool(const PathPlan&)>& sink) {
    if (q.source == q.target)
        throw std::logic_error("degenerate path enumeration: source equals target");

    int n = static_cast<int>(q.nodes.size());
    std::vector<std::vector<int>> out(n);  // quotient edge ids, sorted
    for (std::size_t i = 0; i < q.edges.size(); ++i) out[q.edges[i].from].push_back(static_cast<int>(i));

    constexpr int kInf = std::numeric_limits<int>::max() / 2;
    std::vector<int> min_len(n, kInf), min_class(n, kInf);
    min_len[q.target] = 0;
    min_class[q.target] = 0;
    for (int u = n - 1; u >= 0; --u)
        for (int id : out[u]) {
            int v = q.edges[id].to;
            if (min_len[v] == kInf) continue;
            min_len[u] = std::min(min_len[u], 1 + min_len[v]);
            min_class[u] =
                std::min(min_class[u], std::max(detail::node_rank(q.nodes[v]), min_class[v]));
        }
    if (min_len[q.source] == kInf) return false;  // no path at all

    struct Partial {
        int node;
        int cls;
        std::vector<int> edge_ids;
    };
    auto bound_cls = [&](const Partial& p) { return std::max(p.cls, min_class[p.node]); };
    auto bound_len = [&](const Partial& p) {
        return static_cast<int>(p.edge_ids.size()) + min_len[p.node];
    };
    auto lex_less = [&](const std::vector<int>& a, const std::vector<int>& b) {
        std::size_t k = std::min(a.size(), b.size());
        for (std::size_t i = 0; i < k; ++i) {
            const EEdge& x = q.edges[a[i]].edge;
            const EEdge& y = q.edges[b[i]].edge;
            if (x != y) return x < y;
        }
        return a.size() < b.size();
    };
    auto worse = [&](const Partial& a, const Partial& b) {  // priority: min first
        int ac = bound_cls(a), bc = bound_cls(b);
        if (ac != bc) return ac > bc;
        int al = bound_len(a), bl = bound_len(b);
        if (al != bl) return al > bl;
        return lex_less(b.edge_ids, a.edge_ids);
    };
    std::priority_queue<Partial, std::vector<Partial>, decltype(worse)> heap(worse);
    heap.push({q.source, detail::node_rank(q.nodes[q.source]), {}});

    std::size_t emitted = 0;
    while (!heap.empty()) {
        Partial p = heap.top();
        heap.pop();
        if (p.node == q.target) {
            if (emitted == cap) return true;  // cap hit with this path still pending
            ++emitted;
            if (!sink(detail::concretize(q, p.edge_ids))) return !heap.empty();
            continue;
        }
        for (int id : out[p.node]) {
            int v = q.edges[id].to;
            if (min_len[v] == kInf) continue;  // dead end
            Partial ext{v, std::max(p.cls, detail::node_rank(q.nodes[v])), p.edge_ids};
            ext.edge_ids.push_back(id);
            heap.push(std::move(ext));
        }
    }
    return false;
}

struct PathEnumeration {
    std::vector<PathPlan> plans;
    bool truncated = false;
};

inline PathEnumeration enumerate_paths(const QuotientGraph& q, std::size_t cap = kDefaultPathCap) {
    PathEnumeration res;
    res.truncated = enumerate_paths(q, cap, [&](const PathPlan& p) {
        res.plans.push_back(p);
        return true;
    });
    return res;
}

// Graphviz rendering of the quotient (node labels list SCC members and class,
// edge labels show the concrete border edge).
inline std::string to_dot(const QuotientGraph& q) {
    std::ostringstream os;
    auto state = [](ThreadState t) {
        return "(" + std::to_string(t.s) + "," + std::to_string(t.l) + ")";
    };
    os << "digraph quotient {\n";
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        os << "  n" << i << " [label=\"";
        for (std::size_t m = 0; m < q.nodes[i].members.size(); ++m)
            os << (m ? " " : "") << state(q.nodes[i].members[m]);
        os << "\\n" << to_string(q.nodes[i].cls);
        if (static_cast<int>(i) == q.source) os << " source";
        if (static_cast<int>(i) == q.target) os << " sink";
        os << "\"];\n";
    }
    for (const QEdge& e : q.edges)
        os << "  n" << e.from << " -> n" << e.to << " [label=\"" << to_string(e.edge.kind) << " "
           << state(e.edge.src) << "->" << state(e.edge.dst) << "\"];\n";
    os << "}\n";
    return os.str();
}

}  // namespace ttdcov
