#pragma once

// Thread transition diagrams (TTDs) over a finite shared-state and local-state
// space, plus the counter representation of global states used by the
// coverability engines.  A diagram is immutable once built; every operation in
// this header is a pure function of its inputs.

#include <algorithm>
#include <cassert>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <deque>
#include <istream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ttdcov {

using shared_t = std::uint32_t;
using local_t = std::uint32_t;
using count_t = std::uint64_t;

struct ThreadState {
    shared_t s = 0;
    local_t l = 0;
    auto operator<=>(const ThreadState&) const = default;
};

enum class EdgeKind : std::uint8_t { Real, Spawn };

// A Real edge moves one thread from src to dst (and switches the shared
// component); a Spawn edge leaves the firing thread at src and creates a new
// thread at dst.l while switching the shared component to dst.s.
struct Edge {
    ThreadState src;
    ThreadState dst;
    EdgeKind kind = EdgeKind::Real;
    auto operator<=>(const Edge&) const = default;
};

struct ttd_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct parse_error : ttd_error {
    int line;
    int col;
    parse_error(int line_, int col_, const std::string& what_)
        : ttd_error("line " + std::to_string(line_) + ", col " + std::to_string(col_) + ": " + what_),
          line(line_), col(col_) {}
};

// Raised when a multi-initial diagram does not form a full rectangle
// S_T x L_T: first and second are members of the initial set whose "mixed"
// combination missing is absent from it.
struct box_violation : ttd_error {
    ThreadState first, second, missing;
    box_violation(ThreadState a, ThreadState b, ThreadState m)
        : ttd_error(make_msg(a, b, m)), first(a), second(b), missing(m) {}

  private:
    static std::string make_msg(ThreadState a, ThreadState b, ThreadState m) {
        std::ostringstream os;
        os << "initial set violates the box property: contains (" << a.s << "," << a.l
           << ") and (" << b.s << "," << b.l << ") but not (" << m.s << "," << m.l << ")";
        return os.str();
    }
};

struct Ttd {
    shared_t shared_count = 0;
    local_t local_count = 0;
    std::vector<Edge> edges;                  // sorted, duplicate-free
    std::vector<ThreadState> initial_states;  // sorted, duplicate-free, nonempty
    ThreadState target;
};

inline bool in_range(const Ttd& d, ThreadState t) {
    return t.s < d.shared_count && t.l < d.local_count;
}

// Validating constructor for programmatic use; sorts and deduplicates the edge
// and initial-state lists.
inline Ttd make_ttd(shared_t shared_count, local_t local_count, std::vector<Edge> edges,
                    std::vector<ThreadState> initial_states, ThreadState target) {
    if (shared_count == 0 || local_count == 0)
        throw ttd_error("shared and local state counts must be positive");
    Ttd d{shared_count, local_count, std::move(edges), std::move(initial_states), target};
    std::sort(d.edges.begin(), d.edges.end());
    d.edges.erase(std::unique(d.edges.begin(), d.edges.end()), d.edges.end());
    std::sort(d.initial_states.begin(), d.initial_states.end());
    d.initial_states.erase(std::unique(d.initial_states.begin(), d.initial_states.end()),
                           d.initial_states.end());
    if (d.initial_states.empty()) throw ttd_error("initial state set is empty");
    for (const Edge& e : d.edges)
        if (!in_range(d, e.src) || !in_range(d, e.dst)) throw ttd_error("edge state index out of range");
    for (ThreadState t : d.initial_states)
        if (!in_range(d, t)) throw ttd_error("initial state index out of range");
    if (!in_range(d, d.target)) throw ttd_error("target state index out of range");
    return d;
}

// ---------------------------------------------------------------------------
// text format
//
//   # comment
//   shared <count>
//   local <count>
//   initial <s> <l>          (one or more)
//   target <s> <l>           (exactly one)
//   <s> <l> -> <s'> <l'>     (real edge)
//   <s> <l> +> <s'> <l'>     (spawn edge)
//
// Directives may appear in any order but must precede the first edge line.
// ---------------------------------------------------------------------------

struct ParseResult {
    Ttd ttd;
    std::vector<std::string> warnings;
};

namespace detail {

struct Token {
    std::string text;
    int col;  // 1-based
};

inline std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == '#') break;
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != '#') ++j;
        out.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
        i = j;
    }
    return out;
}

inline std::uint32_t parse_index(const Token& t, int line) {
    std::uint32_t v = 0;
    const char* b = t.text.data();
    const char* e = b + t.text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e)
        throw parse_error(line, t.col, "expected a nonnegative decimal number, got '" + t.text + "'");
    return v;
}

}  // namespace detail

inline ParseResult parse_ttd(std::istream& in) {
    using detail::Token;
    std::vector<std::string> warnings;

    std::optional<shared_t> shared_count;
    std::optional<local_t> local_count;
    struct PosState {
        ThreadState t;
        int line, col;
    };
    std::vector<PosState> initials;
    std::optional<PosState> target;
    struct PosEdge {
        Edge e;
        int line, col;
    };
    std::vector<PosEdge> edges;
    bool edge_section = false;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::vector<Token> tok = detail::tokenize(line);
        if (tok.empty()) continue;
        const std::string& head = tok[0].text;
        auto expect_args = [&](std::size_t n, const char* what) {
            if (tok.size() != n)
                throw parse_error(lineno, tok[0].col,
                                  std::string(what) + ": expected " + std::to_string(n - 1) + " argument(s)");
        };
        if (head == "shared" || head == "local" || head == "initial" || head == "target") {
            if (edge_section)
                throw parse_error(lineno, tok[0].col, "directive '" + head + "' after the first edge line");
            if (head == "shared") {
                expect_args(2, "shared");
                if (shared_count) throw parse_error(lineno, tok[0].col, "duplicate 'shared' directive");
                shared_count = detail::parse_index(tok[1], lineno);
                if (*shared_count == 0) throw parse_error(lineno, tok[1].col, "shared state count must be positive");
            } else if (head == "local") {
                expect_args(2, "local");
                if (local_count) throw parse_error(lineno, tok[0].col, "duplicate 'local' directive");
                local_count = detail::parse_index(tok[1], lineno);
                if (*local_count == 0) throw parse_error(lineno, tok[1].col, "local state count must be positive");
            } else if (head == "initial") {
                expect_args(3, "initial");
                initials.push_back({{detail::parse_index(tok[1], lineno), detail::parse_index(tok[2], lineno)},
                                    lineno, tok[1].col});
            } else {
                expect_args(3, "target");
                if (target) throw parse_error(lineno, tok[0].col, "duplicate 'target' directive");
                target = PosState{{detail::parse_index(tok[1], lineno), detail::parse_index(tok[2], lineno)},
                                  lineno, tok[1].col};
            }
            continue;
        }
        // edge line: <s> <l> ARROW <s'> <l'>
        if (tok.size() != 5)
            throw parse_error(lineno, tok[0].col, "expected an edge line '<s> <l> -> <s'> <l'>'");
        EdgeKind kind;
        if (tok[2].text == "->")
            kind = EdgeKind::Real;
        else if (tok[2].text == "+>")
            kind = EdgeKind::Spawn;
        else
            throw parse_error(lineno, tok[2].col, "expected '->' or '+>', got '" + tok[2].text + "'");
        edge_section = true;
        Edge e{{detail::parse_index(tok[0], lineno), detail::parse_index(tok[1], lineno)},
               {detail::parse_index(tok[3], lineno), detail::parse_index(tok[4], lineno)},
               kind};
        edges.push_back({e, lineno, tok[0].col});
    }

    if (!shared_count) throw parse_error(lineno, 1, "missing 'shared' directive");
    if (!local_count) throw parse_error(lineno, 1, "missing 'local' directive");
    if (initials.empty()) throw parse_error(lineno, 1, "missing 'initial' directive");
    if (!target) throw parse_error(lineno, 1, "missing 'target' directive");

    Ttd probe{*shared_count, *local_count, {}, {}, {}};
    for (const PosState& p : initials)
        if (!in_range(probe, p.t)) throw parse_error(p.line, p.col, "initial state index out of range");
    if (!in_range(probe, target->t))
        throw parse_error(target->line, target->col, "target state index out of range");
    for (const PosEdge& pe : edges) {
        if (!in_range(probe, pe.e.src) || !in_range(probe, pe.e.dst))
            throw parse_error(pe.line, pe.col, "edge state index out of range");
    }

    // Deduplicate with warnings, preserving the first occurrence's identity.
    std::set<Edge> seen;
    std::vector<Edge> edge_set;
    for (const PosEdge& pe : edges) {
        if (!seen.insert(pe.e).second) {
            std::ostringstream os;
            os << "line " << pe.line << ": duplicate edge ignored";
            warnings.push_back(os.str());
        } else {
            edge_set.push_back(pe.e);
        }
    }
    std::set<ThreadState> iseen;
    std::vector<ThreadState> init_set;
    for (const PosState& p : initials) {
        if (!iseen.insert(p.t).second) {
            std::ostringstream os;
            os << "line " << p.line << ": duplicate initial state ignored";
            warnings.push_back(os.str());
        } else {
            init_set.push_back(p.t);
        }
    }

    return ParseResult{make_ttd(*shared_count, *local_count, std::move(edge_set), std::move(init_set), target->t),
                       std::move(warnings)};
}

inline ParseResult parse_ttd(const std::string& text) {
    std::istringstream is(text);
    return parse_ttd(is);
}

inline std::string serialize_ttd(const Ttd& d) {
    std::ostringstream os;
    os << "shared " << d.shared_count << "\n";
    os << "local " << d.local_count << "\n";
    for (ThreadState t : d.initial_states) os << "initial " << t.s << " " << t.l << "\n";
    os << "target " << d.target.s << " " << d.target.l << "\n";
    for (const Edge& e : d.edges)
        os << e.src.s << " " << e.src.l << (e.kind == EdgeKind::Real ? " -> " : " +> ") << e.dst.s << " "
           << e.dst.l << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// counter representation of global states:  <s | n_0, ..., n_{L-1}>  with the
// zero entries left out.
// ---------------------------------------------------------------------------

class CounterState {
  public:
    CounterState() = default;
    explicit CounterState(shared_t s) : shared_(s) {}

    static CounterState single(shared_t s, local_t l, count_t n) {
        CounterState c(s);
        c.set(l, n);
        return c;
    }

    shared_t shared() const { return shared_; }
    void set_shared(shared_t s) { shared_ = s; }

    count_t get(local_t l) const {
        for (const auto& [loc, n] : counts_)
            if (loc == l) return n;
        return 0;
    }

    void set(local_t l, count_t n) {
        auto it = std::lower_bound(counts_.begin(), counts_.end(), l,
                                   [](const auto& p, local_t key) { return p.first < key; });
        if (it != counts_.end() && it->first == l) {
            if (n == 0)
                counts_.erase(it);
            else
                it->second = n;
        } else if (n != 0) {
            counts_.insert(it, {l, n});
        }
    }

    void add(local_t l, std::int64_t delta) {
        std::int64_t v = static_cast<std::int64_t>(get(l)) + delta;
        assert(v >= 0);
        set(l, static_cast<count_t>(v));
    }

    count_t total() const {
        count_t t = 0;
        for (const auto& [loc, n] : counts_) t += n;
        return t;
    }

    const std::vector<std::pair<local_t, count_t>>& entries() const { return counts_; }

    auto operator<=>(const CounterState&) const = default;

    std::string str() const {
        std::ostringstream os;
        os << "<" << shared_ << " |";
        if (counts_.empty()) os << " -";
        for (const auto& [loc, n] : counts_) os << " " << loc << ":" << n;
        os << ">";
        return os.str();
    }

  private:
    shared_t shared_ = 0;
    std::vector<std::pair<local_t, count_t>> counts_;  // sorted by local, values >= 1
};

// a >= b in the component-wise covering order (same shared component).
inline bool covers(const CounterState& a, const CounterState& b) {
    if (a.shared() != b.shared()) return false;
    for (const auto& [l, n] : b.entries())
        if (a.get(l) < n) return false;
    return true;
}

// Forward firing of a single edge; nullopt when the edge is not enabled.
inline std::optional<CounterState> fire(const Edge& e, const CounterState& c) {
    if (c.shared() != e.src.s) return std::nullopt;
    if (c.get(e.src.l) == 0) return std::nullopt;
    CounterState out = c;
    out.set_shared(e.dst.s);
    if (e.kind == EdgeKind::Real) {
        out.add(e.src.l, -1);
        out.add(e.dst.l, +1);
    } else {
        out.add(e.dst.l, +1);  // the spawning thread stays at e.src.l
    }
    return out;
}

// ---------------------------------------------------------------------------
// bounded-thread forward exploration (breadth-first over counter states)
// ---------------------------------------------------------------------------

struct ExploreResult {
    std::vector<ThreadState> reached;  // sorted, unique
    bool exhaustive = false;
    std::uint64_t expanded = 0;

    bool contains(ThreadState t) const {
        return std::binary_search(reached.begin(), reached.end(), t);
    }
};

namespace detail {

// all start configurations with exactly n threads: one shared component shared
// by all threads, each thread placed on some initial local of that component.
inline std::vector<CounterState> initial_configs(const Ttd& d, count_t n) {
    std::vector<CounterState> out;
    std::map<shared_t, std::vector<local_t>> by_shared;
    for (ThreadState t : d.initial_states) by_shared[t.s].push_back(t.l);
    for (auto& [s, locals] : by_shared) {
        std::vector<std::pair<local_t, count_t>> cur;
        // multisets of size n over `locals`
        auto rec = [&](auto&& self, std::size_t idx, count_t left) -> void {
            if (idx + 1 == locals.size()) {
                CounterState c(s);
                for (auto& [l, k] : cur) c.set(l, k);
                if (left > 0) c.set(locals[idx], left);
                out.push_back(std::move(c));
                return;
            }
            for (count_t k = 0; k <= left; ++k) {
                if (k > 0) cur.push_back({locals[idx], k});
                self(self, idx + 1, left - k);
                if (k > 0) cur.pop_back();
            }
        };
        rec(rec, 0, n);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

// Explores every global state reachable with exactly n threads, collecting the
// thread states (s, l) occurring in any visited global state.  Spawn edges can
// grow the thread count, so exploration is cut off after max_steps node
// expansions; `exhaustive` reports whether the fixpoint was reached.
inline ExploreResult forward_explore(const Ttd& d, count_t n, std::uint64_t max_steps = 200000) {
    if (n == 0) throw ttd_error("forward_explore requires at least one thread");
    ExploreResult res;
    std::set<CounterState> visited;
    std::set<ThreadState> reached;
    std::deque<const CounterState*> queue;

    auto note = [&](const CounterState& c) {
        for (const auto& [l, cnt] : c.entries()) {
            (void)cnt;
            reached.insert({c.shared(), l});
        }
    };
    for (CounterState& c : detail::initial_configs(d, n)) {
        auto [it, fresh] = visited.insert(std::move(c));
        if (fresh) {
            note(*it);
            queue.push_back(&*it);
        }
    }

    bool truncated = false;
    while (!queue.empty()) {
        if (res.expanded >= max_steps) {
            truncated = true;
            break;
        }
        const CounterState& cur = *queue.front();
        queue.pop_front();
        ++res.expanded;
        for (const Edge& e : d.edges) {
            std::optional<CounterState> nxt = fire(e, cur);
            if (!nxt) continue;
            auto [it, fresh] = visited.insert(std::move(*nxt));
            if (fresh) {
                note(*it);
                queue.push_back(&*it);
            }
        }
    }
    res.exhaustive = !truncated;
    res.reached.assign(reached.begin(), reached.end());
    return res;
}

// ---------------------------------------------------------------------------
// multi-initial normalization
// ---------------------------------------------------------------------------

struct NormalizeResult {
    Ttd ttd;
    bool changed = false;
    ThreadState fresh_initial;  // meaningful only when changed
};

// Collapses a multi-initial diagram (required to satisfy the box property,
// i.e. the initial set is a full rectangle S_T x L_T) into an equivalent
// single-initial one: a fresh shared state |S| and fresh local state |L| are
// added, one edge (s_I, l_I) -> t for every initial t, and one edge
// (t.s, l_I) -> t letting the remaining threads disperse after the first one
// has moved the shared component.
inline NormalizeResult normalize_initial_states(const Ttd& d) {
    if (d.initial_states.size() == 1) return {d, false, {}};

    std::set<ThreadState> t_set(d.initial_states.begin(), d.initial_states.end());
    std::vector<shared_t> st;
    std::vector<local_t> lt;
    for (ThreadState t : d.initial_states) {
        st.push_back(t.s);
        lt.push_back(t.l);
    }
    std::sort(st.begin(), st.end());
    st.erase(std::unique(st.begin(), st.end()), st.end());
    std::sort(lt.begin(), lt.end());
    lt.erase(std::unique(lt.begin(), lt.end()), lt.end());
    for (shared_t s : st)
        for (local_t l : lt)
            if (!t_set.count({s, l})) {
                // witnesses: (s, l1) and (s2, l) are initial, (s, l) is not
                local_t l1 = 0;
                shared_t s2 = 0;
                for (ThreadState t : d.initial_states)
                    if (t.s == s) {
                        l1 = t.l;
                        break;
                    }
                for (ThreadState t : d.initial_states)
                    if (t.l == l) {
                        s2 = t.s;
                        break;
                    }
                throw box_violation({s, l1}, {s2, l}, {s, l});
            }

    ThreadState fresh{d.shared_count, d.local_count};
    std::vector<Edge> edges = d.edges;
    for (ThreadState t : d.initial_states) {
        edges.push_back({fresh, t, EdgeKind::Real});
        edges.push_back({{t.s, fresh.l}, t, EdgeKind::Real});
    }
    Ttd out = make_ttd(d.shared_count + 1, d.local_count + 1, std::move(edges), {fresh}, d.target);
    return {std::move(out), true, fresh};
}

// ---------------------------------------------------------------------------
// random instance generation (deterministic for a fixed seed)
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t rng_below(std::mt19937_64& rng, std::uint64_t m) { return rng() % m; }

inline double rng_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

inline Ttd random_ttd(shared_t shared_count, local_t local_count, std::size_t edge_count,
                      double spawn_fraction, std::uint64_t seed) {
    if (shared_count == 0 || local_count == 0)
        throw ttd_error("shared and local state counts must be positive");
    const std::uint64_t states = static_cast<std::uint64_t>(shared_count) * local_count;
    if (edge_count > states * (states - 1))
        throw ttd_error("edge_count exceeds the number of distinct non-self edges");

    std::mt19937_64 rng(seed);
    auto draw_state = [&]() -> ThreadState {
        return {static_cast<shared_t>(detail::rng_below(rng, shared_count)),
                static_cast<local_t>(detail::rng_below(rng, local_count))};
    };

    ThreadState initial = draw_state();
    ThreadState target = draw_state();
    while (target == initial) target = draw_state();

    std::set<Edge> edges;
    std::uint64_t attempts = 0;
    const std::uint64_t max_attempts = 1000 + 200 * static_cast<std::uint64_t>(edge_count);
    while (edges.size() < edge_count) {
        if (++attempts > max_attempts) throw ttd_error("random_ttd: could not place requested edge count");
        ThreadState src = draw_state();
        ThreadState dst = draw_state();
        if (src == dst) continue;
        EdgeKind kind = detail::rng_unit(rng) < spawn_fraction ? EdgeKind::Spawn : EdgeKind::Real;
        edges.insert({src, dst, kind});
    }
    return make_ttd(shared_count, local_count, {edges.begin(), edges.end()}, {initial}, target);
}

}  // namespace ttdcov
