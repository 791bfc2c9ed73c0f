#pragma once

// Linear integer arithmetic over the assembled max-plus systems: rewriting
// each max-plus atom into a two-branch disjunction with a fresh variable, a
// complete solver for the resulting quantifier-free formulas (equality
// elimination plus Omega-test projection with dark shadow and splinters, all
// in exact integer arithmetic), and byte-stable SMT-LIB export.

#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ttdcov/summary.hpp"

namespace ttdcov {

using var_t = int;
using Model = std::map<var_t, std::int64_t>;

namespace detail {

inline std::int64_t chk(__int128 v) {
    if (v > INT64_MAX / 4 || v < INT64_MIN / 4)
        throw ttd_error("coefficient overflow in linear arithmetic");
    return static_cast<std::int64_t>(v);
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    assert(b > 0);
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    assert(b > 0);
    return floor_div(a + b - 1, b);
}

// Symmetric residue of a modulo m, in (-m/2, m/2].
inline std::int64_t smod(std::int64_t a, std::int64_t m) {
    assert(m >= 2);
    std::int64_t r = a % m;
    if (r < 0) r += m;
    if (2 * r > m) r -= m;
    return r;
}

}  // namespace detail

// A linear expression over integer variables: coefficient map plus constant.
struct LinExpr {
    std::map<var_t, std::int64_t> coeff;  // no zero entries
    std::int64_t constant = 0;

    static LinExpr of(std::int64_t c) { return {{}, c}; }
    static LinExpr var(var_t v, std::int64_t c = 1) {
        LinExpr e;
        e.add_term(v, c);
        return e;
    }

    void add_term(var_t v, std::int64_t c) {
        if (c == 0) return;
        auto [it, fresh] = coeff.try_emplace(v, 0);
        it->second = detail::chk(static_cast<__int128>(it->second) + c);
        if (it->second == 0) coeff.erase(it);
    }

    LinExpr& operator+=(const LinExpr& o) {
        for (auto [v, c] : o.coeff) add_term(v, c);
        constant = detail::chk(static_cast<__int128>(constant) + o.constant);
        return *this;
    }
    LinExpr& operator+=(std::int64_t c) {
        constant = detail::chk(static_cast<__int128>(constant) + c);
        return *this;
    }
    friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
    friend LinExpr operator+(LinExpr a, std::int64_t c) { return a += c; }
    friend LinExpr operator*(std::int64_t k, const LinExpr& e) {
        LinExpr r;
        if (k == 0) return r;
        for (auto [v, c] : e.coeff) r.coeff[v] = detail::chk(static_cast<__int128>(k) * c);
        r.constant = detail::chk(static_cast<__int128>(k) * e.constant);
        return r;
    }
    friend LinExpr operator-(const LinExpr& e) { return -1 * e; }
    friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a += -b; }

    std::int64_t eval(const Model& m) const {
        __int128 v = constant;
        for (auto [var, c] : coeff) {
            auto it = m.find(var);
            v += static_cast<__int128>(c) * (it == m.end() ? 0 : it->second);
        }
        return detail::chk(v);
    }

    bool operator==(const LinExpr&) const = default;
};

// A normalized comparison with zero: expr = 0 or expr >= 0.
struct LinearAtom {
    enum class Cmp : std::uint8_t { Eq, Ge };
    LinExpr expr;
    Cmp cmp = Cmp::Ge;

    bool holds(const Model& m) const {
        std::int64_t v = expr.eval(m);
        return cmp == Cmp::Eq ? v == 0 : v >= 0;
    }
    bool operator==(const LinearAtom&) const = default;
};

enum class Rel { Eq, Le, Lt, Ge, Gt };

// lhs REL rhs, normalized: equalities keep lhs - rhs, inequalities become
// expr >= 0 with strict comparisons tightened by one (x < y becomes
// x <= y - 1).
inline LinearAtom make_atom(const LinExpr& lhs, Rel rel, const LinExpr& rhs) {
    LinExpr d = lhs - rhs;
    switch (rel) {
        case Rel::Eq: return {d, LinearAtom::Cmp::Eq};
        case Rel::Ge: return {d, LinearAtom::Cmp::Ge};
        case Rel::Gt: return {d + -1, LinearAtom::Cmp::Ge};
        case Rel::Le: return {-d, LinearAtom::Cmp::Ge};
        case Rel::Lt: return {-d + -1, LinearAtom::Cmp::Ge};
    }
    throw std::logic_error("bad relation");
}

struct Formula {
    enum class Kind : std::uint8_t { Atom, And, Or };
    Kind kind = Kind::And;
    LinearAtom atom;  // Kind::Atom only
    std::vector<Formula> children;

    static Formula make(LinearAtom a) { return {Kind::Atom, std::move(a), {}}; }
    static Formula conj(std::vector<Formula> ch) { return {Kind::And, {}, std::move(ch)}; }
    static Formula disj(std::vector<Formula> ch) { return {Kind::Or, {}, std::move(ch)}; }
};

inline bool eval_formula(const Formula& f, const Model& m) {
    switch (f.kind) {
        case Formula::Kind::Atom: return f.atom.holds(m);
        case Formula::Kind::And:
            for (const Formula& c : f.children)
                if (!eval_formula(c, m)) return false;
            return true;
        case Formula::Kind::Or:
            for (const Formula& c : f.children)
                if (eval_formula(c, m)) return true;
            return false;
    }
    return false;
}

inline void collect_vars(const LinExpr& e, std::set<var_t>& out) {
    for (auto [v, c] : e.coeff) out.insert(v);
}

inline void collect_vars(const Formula& f, std::set<var_t>& out) {
    if (f.kind == Formula::Kind::Atom) collect_vars(f.atom.expr, out);
    for (const Formula& c : f.children) collect_vars(c, out);
}

// ---------------------------------------------------------------------------
// rewriting max-plus chains into linear formulas
// ---------------------------------------------------------------------------

struct RewriteResult {
    Formula formula;
    std::vector<std::string> var_names;  // variable id -> name, declaration order
    std::map<int, var_t> kappa_var;      // loop-count symbol index -> variable id
    std::vector<LinExpr> row_value;      // final chain value of each row
};

// Each max-plus atom v' = max(v + y, b) becomes a fresh variable and the
// two-branch disjunction
//   (v + y >= b and v' = v + y)  or  (v + y <= b - 1 and v' = b)
// with the floor-inactive branch first.  Loop-count symbols are declared
// before chain variables; every variable is fresh per occurrence.
inline RewriteResult rewrite_maxplus(const PathConstraint& pc) {
    RewriteResult rw;
    std::vector<Formula> conj;

    for (const KappaVar& kv : pc.kappas) {
        var_t id = static_cast<var_t>(rw.var_names.size());
        rw.var_names.push_back("k" + std::to_string(kv.index));
        rw.kappa_var[kv.index] = id;
        conj.push_back(Formula::make(
            make_atom(LinExpr::var(id), Rel::Ge, LinExpr::of(kv.lower_bound))));
    }

    int next_v = 0;
    for (const ChainRow& row : pc.rows) {
        LinExpr cur = LinExpr::of(row.start);
        for (const Atom& a : row.atoms) {
            LinExpr sum;
            switch (a.kind) {
                case Atom::Kind::Add:
                    cur += a.c;
                    continue;
                case Atom::Kind::MaxAdd:
                    sum = cur + a.c;
                    break;
                case Atom::Kind::MaxAddScaled: {
                    auto it = rw.kappa_var.find(a.kappa);
                    if (it == rw.kappa_var.end())
                        throw std::logic_error("row references an inactive loop-count symbol");
                    sum = cur + LinExpr::var(it->second, a.c) + a.c * a.shift;
                    break;
                }
            }
            var_t v = static_cast<var_t>(rw.var_names.size());
            rw.var_names.push_back("v" + std::to_string(next_v++));
            LinExpr vx = LinExpr::var(v);
            LinExpr b = LinExpr::of(a.b);
            Formula taken = Formula::conj({Formula::make(make_atom(sum, Rel::Ge, b)),
                                           Formula::make(make_atom(vx, Rel::Eq, sum))});
            Formula floored = Formula::conj({Formula::make(make_atom(sum, Rel::Lt, b)),
                                             Formula::make(make_atom(vx, Rel::Eq, b))});
            conj.push_back(Formula::disj({std::move(taken), std::move(floored)}));
            cur = vx;
        }
        rw.row_value.push_back(cur);
        Rel rel = row.final_condition == ChainRow::Final::GeOne ? Rel::Ge : Rel::Eq;
        LinExpr rhs = LinExpr::of(row.final_condition == ChainRow::Final::GeOne ? 1 : 0);
        conj.push_back(Formula::make(make_atom(cur, rel, rhs)));
    }
    rw.formula = Formula::conj(std::move(conj));
    return rw;
}

// ---------------------------------------------------------------------------
// complete solver
// ---------------------------------------------------------------------------

enum class SatStatus { Sat, Unsat };

struct SatResult {
    SatStatus status = SatStatus::Unsat;
    Model model;  // meaningful only when Sat; covers the formula's variables
};

namespace detail {

inline void substitute(std::vector<LinearAtom>& atoms, var_t x, const LinExpr& repl) {
    for (LinearAtom& a : atoms) {
        auto it = a.expr.coeff.find(x);
        if (it == a.expr.coeff.end()) continue;
        std::int64_t c = it->second;
        a.expr.coeff.erase(it);
        a.expr += c * repl;
    }
}

// Decides a conjunction of normalized atoms over the integers; returns an
// assignment for every variable occurring in it.  fresh is the first variable
// id free for internal use.
inline std::optional<Model> lia_solve(std::vector<LinearAtom> atoms, var_t fresh) {
    // Equality elimination.  Unit coefficients substitute directly; otherwise
    // the symmetric-residue reparameterization shrinks coefficients until a
    // unit appears.  Substitutions are replayed in reverse to extend models.
    std::vector<std::pair<var_t, LinExpr>> subs;
    for (int guard = 0;; ++guard) {
        if (guard > 100000) throw std::logic_error("equality elimination diverged");
        auto it = std::find_if(atoms.begin(), atoms.end(), [](const LinearAtom& a) {
            return a.cmp == LinearAtom::Cmp::Eq;
        });
        if (it == atoms.end()) break;
        LinearAtom eq = *it;
        if (eq.expr.coeff.empty()) {
            if (eq.expr.constant != 0) return std::nullopt;
            atoms.erase(it);
            continue;
        }
        std::int64_t g = 0;
        for (auto [v, c] : eq.expr.coeff) g = std::gcd(g, c < 0 ? -c : c);
        if (eq.expr.constant % g != 0) return std::nullopt;
        if (g > 1) {
            for (auto& [v, c] : eq.expr.coeff) c /= g;
            eq.expr.constant /= g;
        }
        var_t best = 0;
        std::int64_t best_abs = 0;
        for (auto [v, c] : eq.expr.coeff) {
            std::int64_t a = c < 0 ? -c : c;
            if (best_abs == 0 || a < best_abs) best = v, best_abs = a;
        }
        std::int64_t a_k = eq.expr.coeff[best];
        LinExpr rest = eq.expr;
        rest.coeff.erase(best);
        if (best_abs == 1) {
            // a_k x + rest = 0  =>  x = -rest / a_k
            LinExpr repl = a_k == 1 ? -rest : rest;
            atoms.erase(it);
            substitute(atoms, best, repl);
            subs.emplace_back(best, std::move(repl));
        } else {
            std::int64_t m = best_abs + 1;
            std::int64_t s = a_k > 0 ? 1 : -1;
            var_t sigma = fresh++;
            LinExpr repl;
            for (auto [v, c] : rest.coeff) repl.add_term(v, s * smod(c, m));
            repl += s * smod(rest.constant, m);
            repl.add_term(sigma, -s * m);
            substitute(atoms, best, repl);  // the equality itself stays, shrunk
            subs.emplace_back(best, std::move(repl));
        }
    }

    // Inequality projection (Omega test).
    std::optional<Model> model;
    std::set<var_t> vars;
    for (const LinearAtom& a : atoms) collect_vars(a.expr, vars);
    if (vars.empty()) {
        for (const LinearAtom& a : atoms)
            if (a.expr.constant < 0) return std::nullopt;
        model = Model{};
    } else {
        // Target: fewest lower/upper combinations, lowest id on ties.
        var_t x = 0;
        std::size_t best_score = SIZE_MAX;
        for (var_t v : vars) {
            std::size_t lo = 0, hi = 0;
            for (const LinearAtom& a : atoms) {
                auto it = a.expr.coeff.find(v);
                if (it == a.expr.coeff.end()) continue;
                (it->second > 0 ? lo : hi)++;
            }
            std::size_t score = lo * hi;
            if (score < best_score) x = v, best_score = score;
        }
        struct Bound {
            std::int64_t a;  // positive coefficient of x
            LinExpr e;       // a*x >= e (lower) / a*x <= e (upper)
        };
        std::vector<Bound> lowers, uppers;
        std::vector<LinearAtom> rest;
        for (const LinearAtom& at : atoms) {
            auto it = at.expr.coeff.find(x);
            if (it == at.expr.coeff.end()) {
                rest.push_back(at);
                continue;
            }
            std::int64_t c = it->second;
            LinExpr e = at.expr;
            e.coeff.erase(x);
            if (c > 0)
                lowers.push_back({c, -e});  // c*x + e >= 0  =>  c*x >= -e
            else
                uppers.push_back({-c, e});  // -b*x + e >= 0  =>  b*x <= e
        }
        auto extend = [&](const Model& sub) {
            Model m = sub;
            std::optional<std::int64_t> lo, hi;
            for (const Bound& b : lowers) {
                std::int64_t v = ceil_div(b.e.eval(m), b.a);
                lo = lo ? std::max(*lo, v) : v;
            }
            for (const Bound& b : uppers) {
                std::int64_t v = floor_div(b.e.eval(m), b.a);
                hi = hi ? std::min(*hi, v) : v;
            }
            assert(!(lo && hi) || *lo <= *hi);
            m[x] = lo ? *lo : hi ? std::min<std::int64_t>(*hi, 0) : 0;
            return m;
        };
        if (lowers.empty() || uppers.empty()) {
            std::optional<Model> sub = lia_solve(std::move(rest), fresh);
            if (!sub) return std::nullopt;
            model = extend(*sub);
        } else {
            bool exact = true;
            for (const Bound& l : lowers)
                for (const Bound& u : uppers)
                    if (l.a != 1 && u.a != 1) exact = false;
            // Dark shadow; equal to the real shadow (and exact) when every
            // combination involves a unit coefficient.
            std::vector<LinearAtom> shadow = rest;
            for (const Bound& l : lowers)
                for (const Bound& u : uppers) {
                    LinExpr d = l.a * u.e - u.a * l.e;
                    d += -chk(static_cast<__int128>(l.a - 1) * (u.a - 1));
                    shadow.push_back({std::move(d), LinearAtom::Cmp::Ge});
                }
            std::optional<Model> sub = lia_solve(std::move(shadow), fresh);
            if (sub) {
                model = extend(*sub);
            } else if (exact) {
                return std::nullopt;
            } else {
                // Splinters: any integer solution missed by the dark shadow
                // sits within a bounded offset of some lower bound.
                std::int64_t bmax = 0;
                for (const Bound& u : uppers) bmax = std::max(bmax, u.a);
                for (const Bound& l : lowers) {
                    if (model) break;
                    std::int64_t span =
                        floor_div(chk(static_cast<__int128>(l.a) * bmax - l.a - bmax), bmax);
                    for (std::int64_t i = 0; i <= span && !model; ++i) {
                        std::vector<LinearAtom> trial = atoms;
                        LinExpr e = LinExpr::var(x, l.a) - l.e;
                        e += -i;  // l.a * x = l.e + i
                        trial.push_back({std::move(e), LinearAtom::Cmp::Eq});
                        model = lia_solve(std::move(trial), fresh);
                    }
                }
                if (!model) return std::nullopt;
            }
        }
    }

    for (auto sub = subs.rbegin(); sub != subs.rend(); ++sub)
        (*model)[sub->first] = sub->second.eval(*model);
    return model;
}

// Leftmost-first search over the disjunctions, with a pruning satisfiability
// check at every branch point.
inline std::optional<Model> dpll(std::vector<LinearAtom> atoms, std::deque<const Formula*> pending,
                                 var_t fresh) {
    while (!pending.empty()) {
        const Formula* f = pending.front();
        pending.pop_front();
        switch (f->kind) {
            case Formula::Kind::Atom:
                atoms.push_back(f->atom);
                break;
            case Formula::Kind::And:
                for (auto it = f->children.rbegin(); it != f->children.rend(); ++it)
                    pending.push_front(&*it);
                break;
            case Formula::Kind::Or: {
                if (!lia_solve(atoms, fresh)) return std::nullopt;
                for (const Formula& child : f->children) {
                    std::deque<const Formula*> branch = pending;
                    branch.push_front(&child);
                    if (std::optional<Model> m = dpll(atoms, std::move(branch), fresh)) return m;
                }
                return std::nullopt;
            }
        }
    }
    return lia_solve(std::move(atoms), fresh);
}

}  // namespace detail

inline SatResult solve(const Formula& f) {
    std::set<var_t> vars;
    collect_vars(f, vars);
    var_t fresh = vars.empty() ? 0 : *vars.rbegin() + 1;
    std::optional<Model> m = detail::dpll({}, {&f}, fresh);
    if (!m) return {SatStatus::Unsat, {}};
    Model model;
    for (var_t v : vars) {
        auto it = m->find(v);
        model[v] = it == m->end() ? 0 : it->second;
    }
    bool ok = eval_formula(f, model);
    assert(ok);
    if (!ok) throw std::logic_error("solver produced a bad model");
    return {SatStatus::Sat, model};
}

// ---------------------------------------------------------------------------
// SMT-LIB export
// ---------------------------------------------------------------------------

namespace detail {

inline std::string smt_int(std::int64_t n) {
    return n < 0 ? "(- " + std::to_string(-n) + ")" : std::to_string(n);
}

inline std::string smt_expr(const LinExpr& e, const std::vector<std::string>& names) {
    std::vector<std::string> parts;
    for (auto [v, c] : e.coeff) {
        assert(v >= 0 && static_cast<std::size_t>(v) < names.size());
        parts.push_back(c == 1 ? names[v] : "(* " + smt_int(c) + " " + names[v] + ")");
    }
    if (e.constant != 0 || parts.empty()) parts.push_back(smt_int(e.constant));
    if (parts.size() == 1) return parts[0];
    std::string out = "(+";
    for (const std::string& p : parts) out += " " + p;
    return out + ")";
}

inline std::string smt_formula(const Formula& f, const std::vector<std::string>& names) {
    switch (f.kind) {
        case Formula::Kind::Atom:
            return std::string(f.atom.cmp == LinearAtom::Cmp::Eq ? "(= " : "(>= ") +
                   smt_expr(f.atom.expr, names) + " 0)";
        case Formula::Kind::And:
        case Formula::Kind::Or: {
            if (f.children.empty()) return f.kind == Formula::Kind::And ? "true" : "false";
            if (f.children.size() == 1) return smt_formula(f.children[0], names);
            std::string out = f.kind == Formula::Kind::And ? "(and" : "(or";
            for (const Formula& c : f.children) out += " " + smt_formula(c, names);
            return out + ")";
        }
    }
    throw std::logic_error("bad formula kind");
}

}  // namespace detail

// Deterministic, byte-stable rendering: one declaration per variable in
// creation order, a single assertion, then (check-sat).
inline std::string to_smtlib(const RewriteResult& rw) {
    std::string out = "(set-logic QF_LIA)\n";
    for (const std::string& name : rw.var_names) out += "(declare-const " + name + " Int)\n";
    out += "(assert " + detail::smt_formula(rw.formula, rw.var_names) + ")\n(check-sat)\n";
    return out;
}

}  // namespace ttdcov
