// SPDX-License-Identifier: Apache-2.0
//
// The symbolic expectation algebra: terms are linear combinations of norms
// sum_i c_i * [b_i] * e_i, where each guard b_i is a conjunction of linear
// atoms, each body e_i is a polynomial that is non-negative wherever its
// guard holds, and each coefficient c_i is a rational function of unknown
// coefficients and (through dynamic sampling probabilities) program
// variables.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ast.hpp"
#include "poly.hpp"

namespace peval::terms {

struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Linear atoms and conjunctive guards

struct Atom {
    enum class Op { Ge, Gt, Eq, Ne };  // lin >= 0, > 0, = 0, != 0
    LinExpr lin;
    Op op = Op::Ge;

    // -1 false, 1 true, 0 undecided
    int const_truth() const {
        if (!lin.is_constant()) return 0;
        const Rat& c = lin.constant;
        switch (op) {
            case Op::Ge: return c >= Rat(0) ? 1 : -1;
            case Op::Gt: return c > Rat(0) ? 1 : -1;
            case Op::Eq: return c.is_zero() ? 1 : -1;
            case Op::Ne: return c.is_zero() ? -1 : 1;
        }
        return 0;
    }

    // Canonical form: primitive integer coefficients; for Eq/Ne a positive
    // leading coefficient.
    Atom normalized() const {
        Atom a = *this;
        a.lin = a.lin.integer_scaled();
        BigInt content(0);
        auto fold = [&content](const Rat& r) {
            content = BigInt::gcd(content, BigInt::abs(r.num()));
        };
        fold(a.lin.constant);
        for (auto& [v, c] : a.lin.coeffs) fold(c);
        if (!content.is_zero() && !content.is_one()) {
            Rat inv = Rat(BigInt(1), content);
            a.lin = a.lin * inv;
        }
        if ((a.op == Op::Eq || a.op == Op::Ne) && !a.lin.coeffs.empty() &&
            a.lin.coeffs.begin()->second.sign() < 0) {
            a.lin = a.lin * Rat(-1);
        }
        return a;
    }

    bool operator<(const Atom& o) const {
        if (op != o.op) return op < o.op;
        return lin < o.lin;
    }
    bool operator==(const Atom& o) const { return op == o.op && lin == o.lin; }

    bool eval(const std::map<std::string, Rat>& env) const {
        Rat v = lin.eval(env);
        switch (op) {
            case Op::Ge: return v >= Rat(0);
            case Op::Gt: return v > Rat(0);
            case Op::Eq: return v.is_zero();
            case Op::Ne: return !v.is_zero();
        }
        return false;
    }

    std::string to_string() const {
        std::string rel;
        switch (op) {
            case Op::Ge: rel = " >= 0"; break;
            case Op::Gt: rel = " > 0"; break;
            case Op::Eq: rel = " = 0"; break;
            case Op::Ne: rel = " != 0"; break;
        }
        return lin.to_string() + rel;
    }
};

struct Guard {
    bool is_false = false;
    std::vector<Atom> atoms;  // sorted, deduplicated, constants folded

    static Guard truth() { return Guard{}; }
    static Guard falsity() {
        Guard g;
        g.is_false = true;
        return g;
    }
    bool is_true() const { return !is_false && atoms.empty(); }

    void push(const Atom& raw) {
        if (is_false) return;
        Atom a = raw.normalized();
        int t = a.const_truth();
        if (t == 1) return;
        if (t == -1) {
            is_false = true;
            atoms.clear();
            return;
        }
        auto it = std::lower_bound(atoms.begin(), atoms.end(), a);
        if (it != atoms.end() && *it == a) return;
        atoms.insert(it, a);
    }
    static Guard conj(const Guard& a, const Guard& b) {
        if (a.is_false || b.is_false) return falsity();
        Guard g = a;
        for (auto& at : b.atoms) g.push(at);
        return g;
    }

    bool operator<(const Guard& o) const {
        if (is_false != o.is_false) return is_false < o.is_false;
        return atoms < o.atoms;
    }
    bool operator==(const Guard& o) const {
        return is_false == o.is_false && atoms == o.atoms;
    }

    bool eval(const std::map<std::string, Rat>& env) const {
        if (is_false) return false;
        for (auto& a : atoms)
            if (!a.eval(env)) return false;
        return true;
    }

    std::string to_string() const {
        if (is_false) return "false";
        if (atoms.empty()) return "true";
        std::string s;
        for (size_t i = 0; i < atoms.size(); ++i) {
            if (i) s += " && ";
            s += atoms[i].to_string();
        }
        return s;
    }
};

// ---------------------------------------------------------------------------
// Expression conversion

inline Poly expr_to_poly(const ExprPtr& e) {
    switch (e->kind) {
        case Expr::Kind::Var: return Poly::var(e->var);
        case Expr::Kind::Const: return Poly::constant(e->value);
        case Expr::Kind::Neg: return -expr_to_poly(e->lhs);
        case Expr::Kind::Add: return expr_to_poly(e->lhs) + expr_to_poly(e->rhs);
        case Expr::Kind::Sub: return expr_to_poly(e->lhs) - expr_to_poly(e->rhs);
        case Expr::Kind::Mul: return expr_to_poly(e->lhs) * expr_to_poly(e->rhs);
        case Expr::Kind::Div: {
            Poly d = expr_to_poly(e->rhs);
            if (!d.is_constant() || d.constant_value().is_zero())
                throw UnsupportedError("non-constant division in expression position");
            return expr_to_poly(e->lhs) * (Rat(1) / d.constant_value());
        }
    }
    throw UnsupportedError("expr_to_poly");
}

inline RatFn expr_to_ratfn(const ExprPtr& e) {
    switch (e->kind) {
        case Expr::Kind::Div: {
            RatFn n = expr_to_ratfn(e->lhs);
            Poly d = expr_to_poly(e->rhs);  // denominators must be polynomial
            if (d.is_constant()) {
                if (d.constant_value().is_zero())
                    throw UnsupportedError("division by zero");
                return n * (Rat(1) / d.constant_value());
            }
            RatFn r = n;
            r.den.push_back(d);
            r.normalize();
            return r;
        }
        case Expr::Kind::Neg: return expr_to_ratfn(e->lhs) * Rat(-1);
        case Expr::Kind::Add: return expr_to_ratfn(e->lhs) + expr_to_ratfn(e->rhs);
        case Expr::Kind::Sub: return expr_to_ratfn(e->lhs) - expr_to_ratfn(e->rhs);
        case Expr::Kind::Mul: return expr_to_ratfn(e->lhs) * expr_to_ratfn(e->rhs);
        default: return RatFn(expr_to_poly(e));
    }
}

inline LinExpr poly_to_linexpr(const Poly& p) {
    LinExpr le;
    for (auto& [m, c] : p.terms()) {
        if (m.is_one()) {
            le.constant += c;
        } else if (m.factors.size() == 1 && m.factors[0].second == 1) {
            le.add(m.factors[0].first, c);
        } else {
            throw UnsupportedError("non-linear guard atom: " + p.to_string());
        }
    }
    return le;
}

inline Atom cmp_to_atom(CmpOp op, const ExprPtr& l, const ExprPtr& r) {
    Poly diff;
    switch (op) {
        case CmpOp::Lt: diff = expr_to_poly(r) - expr_to_poly(l); break;  // r-l > 0
        case CmpOp::Le: diff = expr_to_poly(r) - expr_to_poly(l); break;  // r-l >= 0
        case CmpOp::Gt: diff = expr_to_poly(l) - expr_to_poly(r); break;
        case CmpOp::Ge: diff = expr_to_poly(l) - expr_to_poly(r); break;
        case CmpOp::Eq:
        case CmpOp::Ne: diff = expr_to_poly(l) - expr_to_poly(r); break;
    }
    Atom a;
    a.lin = poly_to_linexpr(diff);
    switch (op) {
        case CmpOp::Lt:
        case CmpOp::Gt: a.op = Atom::Op::Gt; break;
        case CmpOp::Le:
        case CmpOp::Ge: a.op = Atom::Op::Ge; break;
        case CmpOp::Eq: a.op = Atom::Op::Eq; break;
        case CmpOp::Ne: a.op = Atom::Op::Ne; break;
    }
    return a;
}

inline Atom negate_atom_weak(const Atom& a, bool& splits) {
    // negation of Ge/Gt/Ne is a single atom; negation of Eq needs a split
    splits = false;
    Atom n;
    switch (a.op) {
        case Atom::Op::Ge:
            n.lin = a.lin * Rat(-1);
            n.op = Atom::Op::Gt;
            return n;
        case Atom::Op::Gt:
            n.lin = a.lin * Rat(-1);
            n.op = Atom::Op::Ge;
            return n;
        case Atom::Op::Ne:
            n.lin = a.lin;
            n.op = Atom::Op::Eq;
            return n;
        case Atom::Op::Eq: splits = true; return a;
    }
    return n;
}

// Disjoint conjunctive cover of a boolean expression: [b] equals the sum of
// the Iverson brackets of the returned guards.
inline std::vector<Guard> disjoint_cover(const BExprPtr& b, bool positive = true);

namespace detail_cover {
inline std::vector<Guard> product(const std::vector<Guard>& a, const std::vector<Guard>& b) {
    std::vector<Guard> out;
    for (auto& x : a)
        for (auto& y : b) {
            Guard g = Guard::conj(x, y);
            if (!g.is_false) out.push_back(g);
        }
    return out;
}
inline std::vector<Guard> atom_cover(const Atom& a) {
    Guard g;
    g.push(a);
    if (g.is_false) return {};
    return {g};
}
inline std::vector<Guard> atom_ncover(const Atom& a) {
    if (a.op == Atom::Op::Eq) {
        Atom gt{a.lin, Atom::Op::Gt};
        Atom lt{a.lin * Rat(-1), Atom::Op::Gt};
        std::vector<Guard> out;
        for (auto& at : {gt, lt}) {
            Guard g;
            g.push(at);
            if (!g.is_false) out.push_back(g);
        }
        return out;
    }
    bool splits = false;
    Atom n = negate_atom_weak(a, splits);
    return atom_cover(n);
}
}  // namespace detail_cover

inline std::vector<Guard> disjoint_cover(const BExprPtr& b, bool positive) {
    using detail_cover::atom_cover;
    using detail_cover::atom_ncover;
    using detail_cover::product;
    switch (b->kind) {
        case BExpr::Kind::Cmp: {
            Atom a = cmp_to_atom(b->op, b->el, b->er);
            return positive ? atom_cover(a) : atom_ncover(a);
        }
        case BExpr::Kind::Const:
            if (b->value == positive) return {Guard::truth()};
            return {};
        case BExpr::Kind::Not: return disjoint_cover(b->bl, !positive);
        case BExpr::Kind::And: {
            if (positive)
                return product(disjoint_cover(b->bl, true), disjoint_cover(b->br, true));
            // not(x && y) = not x  |  x && not y   (disjoint)
            auto r = disjoint_cover(b->bl, false);
            auto extra = product(disjoint_cover(b->bl, true), disjoint_cover(b->br, false));
            r.insert(r.end(), extra.begin(), extra.end());
            return r;
        }
        case BExpr::Kind::Or: {
            if (!positive)
                return product(disjoint_cover(b->bl, false), disjoint_cover(b->br, false));
            auto r = disjoint_cover(b->bl, true);
            auto extra = product(disjoint_cover(b->bl, false), disjoint_cover(b->br, true));
            r.insert(r.end(), extra.begin(), extra.end());
            return r;
        }
        case BExpr::Kind::Star:
            throw UnsupportedError("'*' guard has no truth value");
    }
    return {};
}

// ---------------------------------------------------------------------------
// Norms and terms

struct Norm {
    Guard guard;
    Poly body;

    static Norm one() { return Norm{Guard::truth(), Poly::constant(Rat(1))}; }
    // <e> = [e >= 0] * e
    static Norm abs(const Poly& e) {
        Norm n;
        Atom a;
        a.lin = poly_to_linexpr(e);
        a.op = Atom::Op::Ge;
        n.guard.push(a);
        n.body = e;
        return n;
    }
    static Norm iverson(const Guard& g) { return Norm{g, Poly::constant(Rat(1))}; }

    bool operator<(const Norm& o) const {
        if (!(guard == o.guard)) return guard < o.guard;
        return body < o.body;
    }
    bool operator==(const Norm& o) const { return guard == o.guard && body == o.body; }

    std::string to_string() const {
        // <e> sugar when the guard is exactly the body's non-negativity
        if (guard.atoms.size() == 1 && guard.atoms[0].op == Atom::Op::Ge && !body.is_constant()) {
            Atom want;
            want.lin = poly_to_linexpr_or_empty(body);
            want.op = Atom::Op::Ge;
            if (!want.lin.coeffs.empty() && guard.atoms[0] == want.normalized() &&
                want.lin == guard.atoms[0].lin)
                return "<" + body.to_string() + ">";
        }
        if (guard.is_true()) return body.is_constant() ? body.to_string() : body.to_string();
        std::string g = "[" + guard.to_string() + "]";
        if (body.is_constant() && body.constant_value() == Rat(1)) return g;
        return g + "*(" + body.to_string() + ")";
    }

private:
    static LinExpr poly_to_linexpr_or_empty(const Poly& p) {
        try {
            return poly_to_linexpr(p);
        } catch (const UnsupportedError&) {
            return LinExpr{};
        }
    }
};

struct Term {
    struct Summand {
        RatFn coeff;
        Norm norm;
    };
    std::vector<Summand> summands;  // canonical: sorted by norm, merged

    static Term zero() { return Term{}; }
    static Term constant(const Rat& c) {
        Term t;
        t.push(RatFn(c), Norm::one());
        return t;
    }
    static Term of_norm(const Norm& n) {
        Term t;
        t.push(RatFn(Rat(1)), n);
        return t;
    }
    static Term logical(const std::string& lv) {
        Term t;
        t.push(RatFn(Rat(1)), Norm{Guard::truth(), Poly::var(lv)});
        return t;
    }

    bool is_zero() const { return summands.empty(); }

    void push(const RatFn& c, const Norm& n) {
        if (c.is_zero() || n.guard.is_false || n.body.is_zero()) return;
        summands.push_back({c, n});
    }

    void canonicalize() {
        std::sort(summands.begin(), summands.end(),
                  [](const Summand& a, const Summand& b) { return a.norm < b.norm; });
        std::vector<Summand> merged;
        for (auto& s : summands) {
            if (!merged.empty() && merged.back().norm == s.norm) {
                merged.back().coeff = merged.back().coeff + s.coeff;
            } else {
                merged.push_back(s);
            }
        }
        summands.clear();
        for (auto& s : merged)
            if (!s.coeff.is_zero()) summands.push_back(std::move(s));
    }

    std::set<std::string> variables() const {
        std::set<std::string> vs;
        for (auto& s : summands) {
            for (auto& v : s.coeff.variables()) vs.insert(v);
            for (auto& v : s.norm.body.variables()) vs.insert(v);
            for (auto& a : s.norm.guard.atoms)
                for (auto& [v, c] : a.lin.coeffs) vs.insert(v);
        }
        return vs;
    }
    bool mentions(const std::string& v) const { return variables().count(v) > 0; }

    std::string to_string() const {
        if (summands.empty()) return "0";
        std::string s;
        for (size_t i = 0; i < summands.size(); ++i) {
            if (i) s += " + ";
            auto c = summands[i].coeff.constant_value();
            std::string body = summands[i].norm.to_string();
            bool trivial_norm = summands[i].norm.guard.is_true() &&
                                summands[i].norm.body.is_constant() &&
                                summands[i].norm.body.constant_value() == Rat(1);
            if (c && *c == Rat(1)) {
                s += body;
            } else if (trivial_norm) {
                s += summands[i].coeff.to_string();
            } else {
                std::string cs = summands[i].coeff.to_string();
                if (!summands[i].coeff.is_polynomial() ||
                    summands[i].coeff.num.terms().size() > 1)
                    cs = "(" + cs + ")";
                s += cs + "*" + body;
            }
        }
        return s;
    }
};

// ---------------------------------------------------------------------------
// Operations

inline Term add(const Term& a, const Term& b) {
    Term r = a;
    r.summands.insert(r.summands.end(), b.summands.begin(), b.summands.end());
    r.canonicalize();
    return r;
}

inline Term scale(const RatFn& c, const Term& t) {
    Term r;
    for (auto& s : t.summands) r.push(c * s.coeff, s.norm);
    r.canonicalize();
    return r;
}
inline Term scale(const Rat& c, const Term& t) { return scale(RatFn(c), t); }

inline Term guard_mul_guard(const Guard& g, const Term& t) {
    if (g.is_false) return Term::zero();
    Term r;
    for (auto& s : t.summands) {
        Norm n = s.norm;
        n.guard = Guard::conj(g, n.guard);
        r.push(s.coeff, n);
    }
    r.canonicalize();
    return r;
}

// [b] * t with the boolean resolved into a disjoint conjunctive cover.
inline Term guard_mul(const BExprPtr& b, const Term& t) {
    Term r;
    for (auto& g : disjoint_cover(b, true)) r = add(r, guard_mul_guard(g, t));
    return r;
}

// Capture-avoiding simultaneous substitution of polynomials for variables.
inline Term substitute(const Term& t, const std::map<std::string, Poly>& su) {
    Term r;
    for (auto& s : t.summands) {
        RatFn c = s.coeff.substitute(su);
        Norm n;
        n.body = s.norm.body.substitute(su);
        n.guard = Guard::truth();
        bool dropped = false;
        for (auto& a : s.norm.guard.atoms) {
            Poly p = a.lin.to_poly().substitute(su);
            Atom na;
            na.lin = poly_to_linexpr(p);  // throws on non-linear result
            na.op = a.op;
            n.guard.push(na);
            if (n.guard.is_false) {
                dropped = true;
                break;
            }
        }
        if (!dropped) r.push(c, n);
    }
    r.canonicalize();
    return r;
}

inline Term substitute_expr(const Term& t, const std::string& var, const ExprPtr& e) {
    return substitute(t, {{var, expr_to_poly(e)}});
}

// Substitution of a term for a logical variable.  Permitted only where the
// variable occurs as the entire body of a summand; elsewhere the guard or
// coefficient cannot absorb a term and we reject.
inline Term substitute_logical(const Term& t, const std::string& lv, const Term& tau) {
    Term r;
    for (auto& s : t.summands) {
        bool in_guard = false;
        for (auto& a : s.norm.guard.atoms)
            if (a.lin.mentions(lv)) in_guard = true;
        bool in_coeff = s.coeff.num.mentions(lv);
        for (auto& f : s.coeff.den)
            if (f.mentions(lv)) in_coeff = true;
        bool in_body = s.norm.body.mentions(lv);
        if (in_guard || in_coeff)
            throw UnsupportedError("term substitution into a guard or coefficient");
        if (!in_body) {
            r.push(s.coeff, s.norm);
            continue;
        }
        if (!(s.norm.body == Poly::var(lv)))
            throw UnsupportedError("term substitution inside a composite body");
        Term piece = guard_mul_guard(s.norm.guard, tau);
        piece = scale(s.coeff, piece);
        r.summands.insert(r.summands.end(), piece.summands.begin(), piece.summands.end());
    }
    r.canonicalize();
    return r;
}

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exact evaluation under a memory, logical valuation and coefficient model
// (all merged into one environment).
inline Rat eval_term(const Term& t, const std::map<std::string, Rat>& env) {
    Rat total(0);
    for (auto& s : t.summands) {
        bool holds;
        try {
            holds = s.norm.guard.eval(env);
        } catch (const std::runtime_error& e) {
            throw EvalError(e.what());
        }
        if (!holds) continue;
        auto c = s.coeff.eval(env);
        if (!c) throw EvalError("coefficient denominator vanished");
        try {
            total += *c * s.norm.body.eval(env);
        } catch (const std::runtime_error& e) {
            throw EvalError(e.what());
        }
    }
    return total;
}

}  // namespace peval::terms
