#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <fstream>
#include <functional>
#include <random>

#include "ttdcov/presburger.hpp"

using namespace ttdcov;

namespace {

Ttd load_data(const std::string& name) {
    std::ifstream in(std::string(TTDCOV_DATA_DIR) + "/" + name);
    REQUIRE(in.good());
    return parse_ttd(in).ttd;
}

Formula atom(const LinExpr& lhs, Rel rel, const LinExpr& rhs) {
    return Formula::make(make_atom(lhs, rel, rhs));
}

LinExpr v(var_t id, std::int64_t c = 1) { return LinExpr::var(id, c); }
LinExpr k(std::int64_t c) { return LinExpr::of(c); }

}  // namespace

TEST_CASE("atom normalization turns strict and upper bounds into >= 0 form") {
    LinearAtom lt = make_atom(v(0), Rel::Lt, v(1));
    CHECK(lt.cmp == LinearAtom::Cmp::Ge);
    CHECK(lt.expr == LinExpr{{{0, -1}, {1, 1}}, -1});  // x1 - x0 - 1 >= 0

    LinearAtom le = make_atom(v(0), Rel::Le, k(5));
    CHECK(le.expr == LinExpr{{{0, -1}}, 5});

    LinearAtom gt = make_atom(v(0), Rel::Gt, k(2));
    CHECK(gt.expr == LinExpr{{{0, 1}}, -3});

    LinearAtom eq = make_atom(v(0) + v(1), Rel::Eq, k(4));
    CHECK(eq.cmp == LinearAtom::Cmp::Eq);
    CHECK(eq.expr == LinExpr{{{0, 1}, {1, 1}}, -4});

    Model m{{0, 2}, {1, 3}};
    CHECK(lt.holds(m));
    CHECK(le.holds(m));
    CHECK_FALSE(gt.holds(m));  // 2 > 2 is false
    CHECK(make_atom(v(0), Rel::Gt, k(1)).holds(m));
}

TEST_CASE("constant formulas decide directly") {
    CHECK(solve(atom(k(1), Rel::Eq, k(0))).status == SatStatus::Unsat);
    CHECK(solve(atom(k(0), Rel::Eq, k(0))).status == SatStatus::Sat);
    CHECK(solve(Formula::conj({})).status == SatStatus::Sat);
    CHECK(solve(Formula::disj({})).status == SatStatus::Unsat);
}

TEST_CASE("equality elimination handles non-unit coefficients") {
    // 3x + 5y = 1 is solvable; 6x + 10y = 3 is not (gcd 2 does not divide 3).
    Formula sat = atom(v(0, 3) + v(1, 5), Rel::Eq, k(1));
    SatResult r = solve(sat);
    REQUIRE(r.status == SatStatus::Sat);
    CHECK(3 * r.model.at(0) + 5 * r.model.at(1) == 1);

    CHECK(solve(atom(v(0, 6) + v(1, 10), Rel::Eq, k(3))).status == SatStatus::Unsat);

    // Chained contradiction through equalities.
    Formula contra = Formula::conj(
        {atom(v(0), Rel::Eq, v(1)), atom(v(1), Rel::Eq, v(0) + 1)});
    CHECK(solve(contra).status == SatStatus::Unsat);
}

TEST_CASE("projection is exact where rational reasoning is not") {
    // 2x >= 1 and 2x <= 1 admits the rational x = 1/2 but no integer.
    Formula gap = Formula::conj({atom(v(0, 2), Rel::Ge, k(1)), atom(v(0, 2), Rel::Le, k(1))});
    CHECK(solve(gap).status == SatStatus::Unsat);

    // 3x in [2, 4] forces x = 1.
    Formula tight = Formula::conj({atom(v(0, 3), Rel::Ge, k(2)), atom(v(0, 3), Rel::Le, k(4))});
    SatResult r = solve(tight);
    REQUIRE(r.status == SatStatus::Sat);
    CHECK(r.model.at(0) == 1);

    // 6x + 9y in [1, 2] has rational but no integer solutions.
    Formula mod3 = Formula::conj({atom(v(0, 6) + v(1, 9), Rel::Ge, k(1)),
                                  atom(v(0, 6) + v(1, 9), Rel::Le, k(2))});
    CHECK(solve(mod3).status == SatStatus::Unsat);
}

TEST_CASE("models are deterministic and prefer bound-adjacent values") {
    SatResult lo = solve(atom(v(0), Rel::Ge, k(5)));
    REQUIRE(lo.status == SatStatus::Sat);
    CHECK(lo.model.at(0) == 5);  // sits on its lower bound

    SatResult hi = solve(atom(v(0), Rel::Le, k(-2)));
    REQUIRE(hi.status == SatStatus::Sat);
    CHECK(hi.model.at(0) == -2);

    Formula f = Formula::conj({atom(v(0) + v(1), Rel::Ge, k(3)), atom(v(1), Rel::Le, k(7))});
    SatResult a = solve(f);
    SatResult b = solve(f);
    REQUIRE(a.status == SatStatus::Sat);
    CHECK(a.model == b.model);
}

TEST_CASE("disjunctions branch leftmost-first") {
    Formula choice = Formula::disj({atom(v(0), Rel::Eq, k(1)), atom(v(0), Rel::Eq, k(2))});
    SatResult r = solve(choice);
    REQUIRE(r.status == SatStatus::Sat);
    CHECK(r.model.at(0) == 1);  // the left branch wins

    Formula forced = Formula::conj({choice, atom(v(0), Rel::Ge, k(2))});
    SatResult r2 = solve(forced);
    REQUIRE(r2.status == SatStatus::Sat);
    CHECK(r2.model.at(0) == 2);
}

TEST_CASE("rewriting a single floored step pins the chain variable") {
    // chain: 0 (+)_2 3 with final value >= 1; the fresh variable is forced to 3.
    PathConstraint pc;
    pc.kappas = {{0, 1}};
    ChainRow row;
    row.local = 0;
    row.start = 0;
    row.atoms = {Atom::max_add(2, 3)};
    row.final_condition = ChainRow::Final::GeOne;
    pc.rows = {row};

    RewriteResult rw = rewrite_maxplus(pc);
    CHECK(rw.var_names == std::vector<std::string>{"k0", "v0"});
    REQUIRE(rw.row_value.size() == 1);
    CHECK(rw.row_value[0] == LinExpr::var(1));

    SatResult r = solve(rw.formula);
    REQUIRE(r.status == SatStatus::Sat);
    CHECK(r.model.at(1) == 3);  // v0: max(0 + 3, 2)
    CHECK(r.model.at(0) == 1);  // k0 rests on its lower bound
}

TEST_CASE("rewriting a scaled step recovers the loop count") {
    // chain: 1 (+)_0 (k0 - 1) * (-1), required to end at 0: k0 = 2.
    PathConstraint pc;
    pc.kappas = {{0, 1}};
    ChainRow row;
    row.local = 0;
    row.start = 1;
    row.atoms = {Atom::max_add_scaled(0, -1, 0, -1)};
    row.final_condition = ChainRow::Final::Zero;
    pc.rows = {row};

    SatResult r = solve(rewrite_maxplus(pc).formula);
    REQUIRE(r.status == SatStatus::Sat);
    CHECK(r.model.at(0) == 2);
}

TEST_CASE("rewritten chains evaluate exactly like the max-plus originals") {
    std::mt19937 rng(5501);
    auto rnd = [&](std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    for (int iter = 0; iter < 200; ++iter) {
        PathConstraint pc;
        pc.kappas = {{0, 1}, {1, 1}, {2, 1}};
        ChainRow row;
        row.local = 0;
        row.start = rnd(-3, 5);
        int len = static_cast<int>(rnd(0, 6));
        for (int i = 0; i < len; ++i) {
            switch (rng() % 3) {
                case 0: row.atoms.push_back(Atom::add(rnd(-3, 3))); break;
                case 1: row.atoms.push_back(Atom::max_add(rnd(0, 4), rnd(-3, 3))); break;
                default:
                    row.atoms.push_back(
                        Atom::max_add_scaled(rnd(0, 4), rnd(-2, 2), static_cast<int>(rng() % 3), -1));
            }
        }
        row.final_condition = ChainRow::Final::GeOne;
        pc.rows = {row};

        RewriteResult rw = rewrite_maxplus(pc);
        for (int trial = 0; trial < 8; ++trial) {
            std::int64_t ks[3] = {rnd(1, 5), rnd(1, 5), rnd(1, 5)};
            // Drop the row's final condition (last conjunct) and pin the loop
            // counts; the chain variables are then forced.
            std::vector<Formula> ch(rw.formula.children.begin(), rw.formula.children.end() - 1);
            for (int i = 0; i < 3; ++i)
                ch.push_back(atom(LinExpr::var(rw.kappa_var.at(i)), Rel::Eq, k(ks[i])));
            SatResult r = solve(Formula::conj(std::move(ch)));
            REQUIRE(r.status == SatStatus::Sat);
            REQUIRE(rw.row_value[0].eval(r.model) == eval_row(row, ks));
        }
    }
}

TEST_CASE("solver agrees with brute force on box-bounded random formulas") {
    std::mt19937 rng(909090);
    auto rnd = [&](std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    int sat_seen = 0, unsat_seen = 0;
    for (int iter = 0; iter < 280; ++iter) {
        int nv = iter < 250 ? static_cast<int>(rnd(1, 3)) : 4;
        const std::int64_t box = 8;
        auto random_atom = [&] {
            LinExpr e;
            for (var_t x = 0; x < nv; ++x)
                if (rng() % 2) e += LinExpr::var(x, rnd(-6, 6));
            e += rnd(-10, 10);
            Rel rel = std::array{Rel::Eq, Rel::Le, Rel::Lt, Rel::Ge, Rel::Gt}[rng() % 5];
            return Formula::make(make_atom(e, rel, k(0)));
        };
        std::vector<Formula> conj;
        int groups = static_cast<int>(rnd(2, 5));
        for (int i = 0; i < groups; ++i) {
            if (rng() % 3 == 0) {
                std::vector<Formula> alts;
                int width = static_cast<int>(rnd(2, 3));
                for (int j = 0; j < width; ++j) alts.push_back(random_atom());
                conj.push_back(Formula::disj(std::move(alts)));
            } else {
                conj.push_back(random_atom());
            }
        }
        for (var_t x = 0; x < nv; ++x) {
            conj.push_back(atom(v(x), Rel::Ge, k(-box)));
            conj.push_back(atom(v(x), Rel::Le, k(box)));
        }
        Formula f = Formula::conj(std::move(conj));

        bool brute_sat = false;
        Model m;
        std::function<void(int)> enumerate = [&](int x) {
            if (brute_sat) return;
            if (x == nv) {
                brute_sat = eval_formula(f, m);
                return;
            }
            for (std::int64_t val = -box; val <= box && !brute_sat; ++val) {
                m[x] = val;
                enumerate(x + 1);
            }
        };
        enumerate(0);

        SatResult r = solve(f);
        INFO("iteration " << iter);
        REQUIRE((r.status == SatStatus::Sat) == brute_sat);
        if (brute_sat) {
            REQUIRE(eval_formula(f, r.model));
            ++sat_seen;
        } else {
            ++unsat_seen;
        }
    }
    CHECK(sat_seen > 20);
    CHECK(unsat_seen > 20);
}

namespace {

std::vector<PathConstraint> pump_variants(const std::string& file) {
    Ttd d = load_data(file);
    PathEnumeration paths = enumerate_paths(scc_quotient(build_ettd(d)));
    REQUIRE(paths.plans.size() == 1);
    return assemble_variants(paths.plans[0], d);
}

}  // namespace

TEST_CASE("pump diagram systems decide reachability at the solver level") {
    SECTION("unreachable target: every variant is unsatisfiable") {
        for (const PathConstraint& pc : pump_variants("loop_pump_t64.ttd"))
            CHECK(solve(rewrite_maxplus(pc).formula).status == SatStatus::Unsat);
    }
    SECTION("reachable target: satisfied exactly from two loop traversals") {
        std::vector<PathConstraint> variants = pump_variants("loop_pump_t63.ttd");
        REQUIRE(variants.size() == 2);
        CHECK(solve(rewrite_maxplus(variants[0]).formula).status == SatStatus::Unsat);

        RewriteResult rw = rewrite_maxplus(variants[1]);
        SatResult r = solve(rw.formula);
        REQUIRE(r.status == SatStatus::Sat);
        var_t k0 = rw.kappa_var.at(0);
        CHECK(r.model.at(k0) >= 2);

        Formula capped = Formula::conj(
            {rw.formula, atom(LinExpr::var(k0), Rel::Le, k(1))});
        CHECK(solve(capped).status == SatStatus::Unsat);

        Formula fixed = Formula::conj(
            {rw.formula, atom(LinExpr::var(k0), Rel::Eq, k(2))});
        CHECK(solve(fixed).status == SatStatus::Sat);
    }
}

TEST_CASE("SMT-LIB export is byte-stable with declarations in creation order") {
    PathConstraint pc;
    pc.kappas = {{0, 1}};
    ChainRow row;
    row.local = 0;
    row.start = 0;
    row.atoms = {Atom::max_add(2, 3)};
    row.final_condition = ChainRow::Final::GeOne;
    pc.rows = {row};

    RewriteResult rw = rewrite_maxplus(pc);
    std::string expected =
        "(set-logic QF_LIA)\n"
        "(declare-const k0 Int)\n"
        "(declare-const v0 Int)\n"
        "(assert (and (>= (+ k0 (- 1)) 0) "
        "(or (and (>= 1 0) (= (+ v0 (- 3)) 0)) (and (>= (- 2) 0) (= (+ v0 (- 2)) 0))) "
        "(>= (+ v0 (- 1)) 0)))\n"
        "(check-sat)\n";
    CHECK(to_smtlib(rw) == expected);
    CHECK(to_smtlib(rw) == to_smtlib(rw));
}
