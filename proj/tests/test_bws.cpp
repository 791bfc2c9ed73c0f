#include "catch_amalgamated.hpp"

#include "ttdcov/bws.hpp"

#include <map>
#include <random>

using namespace ttdcov;

namespace {

// Forward firing re-derived from the transition rules, independent of the
// library implementation; used as the oracle for backward-step properties.
std::optional<CounterState> oracle_fire(const Edge& e, const CounterState& c) {
    if (c.shared() != e.src.s) return std::nullopt;
    if (c.get(e.src.l) == 0) return std::nullopt;
    std::map<local_t, count_t> m;
    for (const auto& [l, n] : c.entries()) m[l] = n;
    if (e.kind == EdgeKind::Real) {
        if (--m[e.src.l] == 0) m.erase(e.src.l);
        ++m[e.dst.l];
    } else {
        ++m[e.dst.l];  // spawner stays put
    }
    CounterState out(e.dst.s);
    for (const auto& [l, n] : m) out.set(l, n);
    return out;
}

CounterState random_state(std::mt19937_64& rng, shared_t shared_count, local_t local_count,
                          count_t max_per_local) {
    CounterState c(static_cast<shared_t>(rng() % shared_count));
    for (local_t l = 0; l < local_count; ++l) c.set(l, rng() % (max_per_local + 1));
    return c;
}

bool state_is_initial(const Ttd& d, const CounterState& c) {
    for (const auto& [l, n] : c.entries()) {
        (void)n;
        if (!std::binary_search(d.initial_states.begin(), d.initial_states.end(),
                                ThreadState{c.shared(), l}))
            return false;
    }
    return true;
}

// Replays a search witness with the oracle and checks it reaches a state
// covering q from an initial configuration.
void check_witness(const Ttd& d, const CounterState& q, const BwsResult& r) {
    REQUIRE(r.coverable);
    REQUIRE(r.witness_start.has_value());
    REQUIRE(state_is_initial(d, *r.witness_start));
    CounterState cur = *r.witness_start;
    for (const auto& [e, after] : r.witness_steps) {
        std::optional<CounterState> next = oracle_fire(e, cur);
        REQUIRE(next.has_value());
        REQUIRE(*next == after);
        cur = *next;
    }
    REQUIRE(covers(cur, q));
}

}  // namespace

TEST_CASE("minimal basis keeps only incomparable minimal elements") {
    MinBasis b;
    CounterState big = CounterState::single(0, 0, 3);
    CounterState small = CounterState::single(0, 0, 1);
    CounterState other_shared = CounterState::single(1, 0, 5);

    REQUIRE(b.insert(big));
    REQUIRE(b.dominates(big));
    REQUIRE_FALSE(b.dominates(small));

    // inserting a smaller element evicts the bigger one
    REQUIRE(b.insert(small));
    REQUIRE(b.size() == 1);
    REQUIRE(b.elements()[0] == small);

    // a dominated element is rejected
    REQUIRE_FALSE(b.insert(big));
    REQUIRE(b.size() == 1);

    // different shared components are incomparable
    REQUIRE(b.insert(other_shared));
    REQUIRE(b.size() == 2);

    CounterState two_locals(0);
    two_locals.set(0, 1);
    two_locals.set(1, 1);
    REQUIRE_FALSE(b.insert(two_locals));  // covers `small`
}

TEST_CASE("minimal basis evicts every dominated element at once") {
    MinBasis b;
    CounterState a(0), c(0), low(0);
    a.set(0, 2);
    a.set(1, 1);
    c.set(0, 1);
    c.set(1, 2);
    low.set(0, 1);
    low.set(1, 1);
    REQUIRE(b.insert(a));
    REQUIRE(b.insert(c));  // incomparable with a
    REQUIRE(b.size() == 2);
    REQUIRE(b.insert(low));
    REQUIRE(b.size() == 1);
    REQUIRE(b.elements()[0] == low);
}

TEST_CASE("backward firing of a real edge") {
    Edge e{{0, 0}, {1, 1}, EdgeKind::Real};

    SECTION("successor thread present: it is moved back") {
        auto pres = cover_pre(CounterState::single(1, 1, 1), std::span<const Edge>(&e, 1));
        REQUIRE(pres.size() == 1);
        REQUIRE(pres[0].state == CounterState::single(0, 0, 1));
        REQUIRE(pres[0].via == e);
    }
    SECTION("successor thread absent: a fresh thread is required before the step") {
        CounterState w = CounterState::single(1, 2, 1);
        auto pres = cover_pre(w, std::span<const Edge>(&e, 1));
        REQUIRE(pres.size() == 1);
        CounterState expect(0);
        expect.set(0, 1);
        expect.set(2, 1);
        REQUIRE(pres[0].state == expect);
        REQUIRE(pres[0].state.total() == w.total() + 1);
    }
    SECTION("wrong shared component: not applicable") {
        REQUIRE(cover_pre(CounterState::single(0, 1, 1), std::span<const Edge>(&e, 1)).empty());
    }
}

TEST_CASE("backward firing of a vertical real edge") {
    Edge e{{0, 0}, {0, 1}, EdgeKind::Real};
    auto pres = cover_pre(CounterState::single(0, 1, 2), std::span<const Edge>(&e, 1));
    REQUIRE(pres.size() == 1);
    CounterState expect(0);
    expect.set(0, 1);
    expect.set(1, 1);
    REQUIRE(pres[0].state == expect);

    pres = cover_pre(CounterState::single(0, 0, 1), std::span<const Edge>(&e, 1));
    REQUIRE(pres.size() == 1);
    REQUIRE(pres[0].state == CounterState::single(0, 0, 2));
}

TEST_CASE("backward firing of a spawn edge covers all four presence cases") {
    Edge e{{0, 0}, {1, 1}, EdgeKind::Spawn};
    auto pre1 = [&](const CounterState& w) {
        auto v = cover_pre(w, std::span<const Edge>(&e, 1));
        REQUIRE(v.size() == 1);
        return v[0].state;
    };

    SECTION("spawner and spawned thread present") {
        CounterState w(1);
        w.set(0, 1);
        w.set(1, 1);
        REQUIRE(pre1(w) == CounterState::single(0, 0, 1));
    }
    SECTION("spawned thread absent") {
        REQUIRE(pre1(CounterState::single(1, 0, 1)) == CounterState::single(0, 0, 1));
    }
    SECTION("spawner absent") {
        REQUIRE(pre1(CounterState::single(1, 1, 1)) == CounterState::single(0, 0, 1));
    }
    SECTION("both absent: thread count grows by one") {
        CounterState w = CounterState::single(1, 2, 1);
        CounterState expect(0);
        expect.set(0, 1);
        expect.set(2, 1);
        REQUIRE(pre1(w) == expect);
        REQUIRE(pre1(w).total() == w.total() + 1);
    }
}

TEST_CASE("backward firing of a self-spawn edge") {
    Edge e{{0, 1}, {1, 1}, EdgeKind::Spawn};  // spawner local equals spawned local
    auto pre1 = [&](const CounterState& w) {
        auto v = cover_pre(w, std::span<const Edge>(&e, 1));
        REQUIRE(v.size() == 1);
        return v[0].state;
    };
    REQUIRE(pre1(CounterState::single(1, 1, 2)) == CounterState::single(0, 1, 1));
    REQUIRE(pre1(CounterState::single(1, 1, 1)) == CounterState::single(0, 1, 1));
    CounterState w = CounterState::single(1, 0, 1);  // neither present
    CounterState expect(0);
    expect.set(0, 1);
    expect.set(1, 1);
    REQUIRE(pre1(w) == expect);
}

TEST_CASE("cover preimages form an antichain and grow by at most one thread") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Ttd d = random_ttd(3, 3, 8, seed % 2 ? 0.3 : 0.0, seed);
        std::mt19937_64 rng(seed * 977 + 5);
        for (int trial = 0; trial < 20; ++trial) {
            CounterState w = random_state(rng, 3, 3, 2);
            auto pres = cover_pre(w, d);
            for (std::size_t i = 0; i < pres.size(); ++i) {
                REQUIRE(pres[i].state.total() <= w.total() + 1);
                for (std::size_t j = 0; j < pres.size(); ++j)
                    if (i != j) REQUIRE_FALSE(covers(pres[i].state, pres[j].state));
            }
        }
    }
}

TEST_CASE("every cover preimage forward-fires to a state covering the original") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        Ttd d = random_ttd(3, 3, 8, seed % 3 ? 0.25 : 0.0, seed + 100);
        std::mt19937_64 rng(seed * 31 + 7);
        for (int trial = 0; trial < 20; ++trial) {
            CounterState w = random_state(rng, 3, 3, 2);
            for (const CoverPreElem& pre : cover_pre(w, d)) {
                std::optional<CounterState> fwd = oracle_fire(pre.via, pre.state);
                REQUIRE(fwd.has_value());
                REQUIRE(covers(*fwd, w));
            }
        }
    }
}

TEST_CASE("every concrete predecessor is dominated by some cover preimage") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        Ttd d = random_ttd(3, 3, 8, seed % 3 ? 0.25 : 0.0, seed + 500);
        std::mt19937_64 rng(seed * 131 + 3);
        for (int trial = 0; trial < 20; ++trial) {
            CounterState x = random_state(rng, 3, 3, 2);
            for (const Edge& e : d.edges) {
                std::optional<CounterState> w = oracle_fire(e, x);
                if (!w) continue;
                bool dominated = false;
                for (const CoverPreElem& pre : cover_pre(*w, d))
                    if (covers(x, pre.state)) {
                        dominated = true;
                        break;
                    }
                REQUIRE(dominated);
            }
        }
    }
}

TEST_CASE("search succeeds immediately when the query is already initial") {
    Ttd d = make_ttd(2, 2, {{{0, 0}, {1, 1}, EdgeKind::Real}}, {{0, 0}}, {1, 1});
    BwsResult r = bws(d, CounterState::single(0, 0, 3));
    REQUIRE(r.coverable);
    REQUIRE(r.witness_steps.empty());
    REQUIRE(*r.witness_start == CounterState::single(0, 0, 3));
    REQUIRE(r.stats.expanded == 0);
}

TEST_CASE("initial check accepts mixed placements over a rectangular initial set") {
    Ttd d = make_ttd(2, 2, {{{0, 0}, {1, 1}, EdgeKind::Real}}, {{0, 0}, {0, 1}}, {1, 1});
    CounterState mixed(0);
    mixed.set(0, 2);
    mixed.set(1, 3);
    BwsResult r = bws(d, mixed);
    REQUIRE(r.coverable);
    REQUIRE(r.witness_steps.empty());

    // same counters in the wrong shared component: a genuine search is needed
    CounterState off(1);
    off.set(0, 2);
    off.set(1, 3);
    REQUIRE_FALSE(bws(make_ttd(2, 2, {}, {{0, 0}, {0, 1}}, {1, 1}), off).coverable);
}

TEST_CASE("spawn edges make extra threads coverable") {
    // one thread spawns helpers that pile up on local 1
    Ttd d = make_ttd(1, 2, {{{0, 0}, {0, 1}, EdgeKind::Spawn}}, {{0, 0}}, {0, 1});
    CounterState q(0);
    q.set(1, 3);
    BwsResult r = bws(d, q);
    check_witness(d, q, r);
    REQUIRE(r.witness_start->total() == 1);  // a single thread spawns the rest
    REQUIRE(r.witness_steps.size() == 3);
}

TEST_CASE("search agrees with exhaustive forward exploration on spawn-free diagrams") {
    int coverable_seen = 0, uncoverable_seen = 0;
    for (std::uint64_t seed = 0; seed < 120; ++seed) {
        Ttd d = random_ttd(3, 3, 6, 0.0, seed + 900);
        CounterState q = CounterState::single(d.target.s, d.target.l, 1);
        BwsResult r = bws(d, q);
        if (r.coverable) {
            ++coverable_seen;
            check_witness(d, q, r);
            // without spawns the thread count is invariant, so the witness size
            // must suffice in forward direction
            ExploreResult fwd = forward_explore(d, r.witness_start->total());
            REQUIRE(fwd.exhaustive);
            REQUIRE(fwd.contains(d.target));
        } else {
            ++uncoverable_seen;
            for (count_t n = 1; n <= 4; ++n) {
                ExploreResult fwd = forward_explore(d, n);
                REQUIRE(fwd.exhaustive);
                REQUIRE_FALSE(fwd.contains(d.target));
            }
        }
    }
    REQUIRE(coverable_seen > 10);
    REQUIRE(uncoverable_seen > 10);
}

TEST_CASE("forward-reachable targets are always found on spawning diagrams") {
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 80; ++seed) {
        Ttd d = random_ttd(3, 3, 7, 0.35, seed + 4000);
        CounterState q = CounterState::single(d.target.s, d.target.l, 1);
        BwsResult r = bws(d, q);
        if (r.coverable) check_witness(d, q, r);
        for (count_t n = 1; n <= 3; ++n) {
            if (forward_explore(d, n).contains(d.target)) {
                REQUIRE(r.coverable);
                ++checked;
                break;
            }
        }
    }
    REQUIRE(checked > 10);
}

TEST_CASE("search is deterministic") {
    for (std::uint64_t seed : {7ull, 99ull, 1234ull}) {
        Ttd d = random_ttd(4, 3, 10, 0.2, seed);
        CounterState q = CounterState::single(d.target.s, d.target.l, 1);
        BwsResult a = bws(d, q);
        BwsResult b = bws(d, q);
        REQUIRE(a.coverable == b.coverable);
        REQUIRE(a.stats.expanded == b.stats.expanded);
        REQUIRE(a.stats.generated == b.stats.generated);
        REQUIRE(a.witness_steps.size() == b.witness_steps.size());
        for (std::size_t i = 0; i < a.witness_steps.size(); ++i) {
            REQUIRE(a.witness_steps[i].first == b.witness_steps[i].first);
            REQUIRE(a.witness_steps[i].second == b.witness_steps[i].second);
        }
    }
}

TEST_CASE("restricting the edge set restricts the verdict") {
    // covering (2,1) needs both edges: (0,0) -> (1,1) -> (2,1)
    std::vector<Edge> edges = {{{0, 0}, {1, 1}, EdgeKind::Real}, {{1, 1}, {2, 1}, EdgeKind::Real}};
    Ttd d = make_ttd(3, 2, edges, {{0, 0}}, {2, 1});
    CounterState q = CounterState::single(2, 1, 1);

    REQUIRE(bws(d, q).coverable);

    std::vector<Edge> only_second = {d.edges[1]};
    BwsResult r = bws(d, q, std::span<const Edge>(only_second));
    REQUIRE_FALSE(r.coverable);

    std::vector<Edge> both = {d.edges[0], d.edges[1]};
    REQUIRE(bws(d, q, std::span<const Edge>(both)).coverable);
}

TEST_CASE("witness replay matches the library forward semantics as well") {
    // diamond with a spawn shortcut; exercises stored step states
    std::vector<Edge> edges = {
        {{0, 0}, {1, 1}, EdgeKind::Real},
        {{1, 1}, {2, 0}, EdgeKind::Spawn},
        {{2, 0}, {3, 1}, EdgeKind::Real},
    };
    Ttd d = make_ttd(4, 2, edges, {{0, 0}}, {3, 1});
    CounterState q(3);
    q.set(0, 1);
    q.set(1, 1);
    BwsResult r = bws(d, q);
    check_witness(d, q, r);
    CounterState cur = *r.witness_start;
    for (const auto& [e, after] : r.witness_steps) {
        std::optional<CounterState> next = fire(e, cur);
        REQUIRE(next.has_value());
        REQUIRE(*next == after);
        cur = *next;
    }
}
