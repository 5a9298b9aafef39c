// SPDX-License-Identifier: Apache-2.0
//
// Resolution of Iverson-bracket conditionals through case analysis.  A side
// condition  ctx |- lhs <= rhs  becomes a family of unconditional polynomial
// inequalities: one per feasible truth assignment of the guard atoms, with
// the atoms (or their negations) as premises and rhs - lhs as the goal.
// Strict atoms over integer-valued symbols are tightened (a > b becomes
// a >= b + 1); infeasible assignments are pruned with an exact
// Fourier-Motzkin test.  Dynamic-probability denominators are cleared after
// adding their positivity as a premise.

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "transformer.hpp"

namespace peval::constraints {

struct PolyInequality {
    std::vector<Poly> premises;  // each premise >= 0 (over reals)
    Poly goal;                   // required >= 0; coefficients may carry unknowns
    const transformer::SideCondition* origin = nullptr;
    std::string case_note;
};

namespace detail_cs {

// inequality over variables, possibly strict, for the feasibility test
struct Ineq {
    LinExpr lin;  // lin >= 0 or lin > 0
    bool strict;
};

inline bool fm_feasible(std::vector<Ineq> sys, size_t cap = 600) {
    // gather variables
    std::set<std::string> vars;
    for (auto& q : sys)
        for (auto& [v, c] : q.lin.coeffs) vars.insert(v);
    for (auto& v : vars) {
        std::vector<Ineq> pos, neg, rest;
        for (auto& q : sys) {
            auto it = q.lin.coeffs.find(v);
            if (it == q.lin.coeffs.end())
                rest.push_back(q);
            else if (it->second.sign() > 0)
                pos.push_back(q);
            else
                neg.push_back(q);
        }
        if (pos.size() * neg.size() + rest.size() > cap) return true;  // give up: assume feasible
        for (auto& p : pos)
            for (auto& n : neg) {
                Rat a = p.lin.coeffs.at(v);
                Rat b = -n.lin.coeffs.at(v);
                Ineq comb;
                comb.lin = p.lin * b + n.lin * a;
                comb.lin.coeffs.erase(v);
                comb.strict = p.strict || n.strict;
                if (comb.lin.is_constant()) {
                    if (comb.strict ? comb.lin.constant <= Rat(0)
                                    : comb.lin.constant < Rat(0))
                        return false;
                } else {
                    rest.push_back(comb);
                }
            }
        sys = std::move(rest);
    }
    for (auto& q : sys) {
        if (!q.lin.is_constant()) continue;
        if (q.strict ? q.lin.constant <= Rat(0) : q.lin.constant < Rat(0)) return false;
    }
    return true;
}

// A case atom in canonical form plus its premise representations.
struct SplitAtom {
    terms::Atom canonical;           // key for deduplication
    std::vector<terms::Atom> sources;  // original atoms mapping to this key
    // variants: premises + whether the source atom evaluates true
    struct Variant {
        std::vector<Ineq> premises;
        bool truth;
    };
    std::vector<Variant> variants;
};

// integer tightening:  lin > 0  with integer symbols becomes lin' - 1 >= 0
// after scaling to integer coefficients
inline terms::Atom tighten(const terms::Atom& a0) {
    terms::Atom a = a0.normalized();
    if (a.op == terms::Atom::Op::Gt && a.lin.all_integer_symbols()) {
        bool integral = a.lin.constant.is_integer();
        for (auto& [v, c] : a.lin.coeffs)
            if (!c.is_integer()) integral = false;
        if (integral) {
            a.lin.constant -= Rat(1);
            a.op = terms::Atom::Op::Ge;
            return a.normalized();
        }
    }
    return a;
}

inline std::vector<SplitAtom::Variant> variants_of(const terms::Atom& canon) {
    using Op = terms::Atom::Op;
    auto tight_neg = [&](const LinExpr& lin) {
        // not (lin >= 0): -lin > 0, tightened where integral
        terms::Atom n;
        n.lin = lin * Rat(-1);
        n.op = Op::Gt;
        n = tighten(n);
        return Ineq{n.lin, n.op == Op::Gt};
    };
    std::vector<SplitAtom::Variant> out;
    switch (canon.op) {
        case Op::Ge:
            out.push_back({{Ineq{canon.lin, false}}, true});
            out.push_back({{tight_neg(canon.lin)}, false});
            break;
        case Op::Gt:  // non-integer strict (integer ones were tightened)
            out.push_back({{Ineq{canon.lin, true}}, true});
            out.push_back({{Ineq{canon.lin * Rat(-1), false}}, false});
            break;
        case Op::Eq: {
            out.push_back({{Ineq{canon.lin, false}, Ineq{canon.lin * Rat(-1), false}}, true});
            terms::Atom gt{canon.lin, Op::Gt};
            gt = tighten(gt);
            out.push_back({{Ineq{gt.lin, gt.op == Op::Gt}}, false});
            terms::Atom lt{canon.lin * Rat(-1), Op::Gt};
            lt = tighten(lt);
            out.push_back({{Ineq{lt.lin, lt.op == Op::Gt}}, false});
            break;
        }
        case Op::Ne: {
            terms::Atom gt{canon.lin, Op::Gt};
            gt = tighten(gt);
            out.push_back({{Ineq{gt.lin, gt.op == Op::Gt}}, true});
            terms::Atom lt{canon.lin * Rat(-1), Op::Gt};
            lt = tighten(lt);
            out.push_back({{Ineq{lt.lin, lt.op == Op::Gt}}, true});
            out.push_back({{Ineq{canon.lin, false}, Ineq{canon.lin * Rat(-1), false}}, false});
            break;
        }
    }
    return out;
}

}  // namespace detail_cs

struct CaseSplitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Enumerate the feasible truth assignments of the distinct guard atoms of a
// side condition.  The union of the produced inequalities is equivalent to
// the original condition over the integers.
inline std::vector<PolyInequality> case_split(const transformer::SideCondition& sc) {
    using detail_cs::Ineq;
    using detail_cs::SplitAtom;

    // fixed premises from the condition context
    std::vector<Ineq> fixed;
    for (auto& a : sc.ctx.atoms) {
        terms::Atom t = detail_cs::tighten(a);
        switch (t.op) {
            case terms::Atom::Op::Ge: fixed.push_back({t.lin, false}); break;
            case terms::Atom::Op::Gt: fixed.push_back({t.lin, true}); break;
            case terms::Atom::Op::Eq:
                fixed.push_back({t.lin, false});
                fixed.push_back({t.lin * Rat(-1), false});
                break;
            case terms::Atom::Op::Ne:
                throw CaseSplitError("disequality context is unsupported");
        }
    }

    // distinct split atoms from the guards on both sides
    std::vector<SplitAtom> atoms;
    std::map<terms::Atom, size_t> index;
    auto add_atom = [&](const terms::Atom& src) {
        terms::Atom canon = detail_cs::tighten(src);
        auto it = index.find(canon);
        if (it == index.end()) {
            SplitAtom sa;
            sa.canonical = canon;
            sa.sources.push_back(src);
            sa.variants = detail_cs::variants_of(canon);
            index[canon] = atoms.size();
            atoms.push_back(std::move(sa));
        } else {
            atoms[it->second].sources.push_back(src);
        }
    };
    for (const terms::Term* side : {&sc.lhs, &sc.rhs})
        for (auto& s : side->summands)
            for (auto& a : s.norm.guard.atoms) add_atom(a);

    if (atoms.size() > 16)
        throw CaseSplitError("too many distinct guard atoms (" +
                             std::to_string(atoms.size()) + ")");

    std::vector<PolyInequality> out;
    // truth of each canonical atom per assignment
    std::map<terms::Atom, bool> truth;
    std::vector<size_t> chosen(atoms.size(), 0);

    std::function<void(size_t, std::vector<Ineq>&)> rec = [&](size_t i,
                                                              std::vector<Ineq>& premset) {
        if (!detail_cs::fm_feasible(premset)) return;
        if (i == atoms.size()) {
            // assemble the case
            RatFn diff;
            auto active_sum = [&](const terms::Term& t, const Rat& sign) {
                for (auto& s : t.summands) {
                    bool on = true;
                    for (auto& a : s.norm.guard.atoms) {
                        terms::Atom canon = detail_cs::tighten(a);
                        auto it = truth.find(canon);
                        if (it == truth.end())
                            throw CaseSplitError("internal: undecided atom");
                        if (!it->second) {
                            on = false;
                            break;
                        }
                    }
                    if (on) diff = diff + s.coeff * RatFn(s.norm.body) * sign;
                }
            };
            active_sum(sc.rhs, Rat(1));
            active_sum(sc.lhs, Rat(-1));

            PolyInequality pi;
            pi.origin = &sc;
            for (auto& q : premset) pi.premises.push_back(q.lin.to_poly());
            // clear denominators; their positivity becomes a premise
            std::set<Poly> dens;
            for (auto& f : diff.den) dens.insert(f);
            for (auto& f : dens) {
                Poly shifted = f - Poly::constant(Rat(1));
                pi.premises.push_back(shifted);  // f >= 1
            }
            pi.goal = diff.num;
            std::string note;
            for (size_t k = 0; k < atoms.size(); ++k) {
                if (!note.empty()) note += ", ";
                note += atoms[k].canonical.to_string() + "=" +
                        (atoms[k].variants[chosen[k]].truth ? "T" : "F");
            }
            pi.case_note = note;
            out.push_back(std::move(pi));
            return;
        }
        for (size_t v = 0; v < atoms[i].variants.size(); ++v) {
            chosen[i] = v;
            auto& var = atoms[i].variants[v];
            size_t mark = premset.size();
            for (auto& q : var.premises) premset.push_back(q);
            truth[atoms[i].canonical] = var.truth;
            rec(i + 1, premset);
            premset.resize(mark);
            truth.erase(atoms[i].canonical);
        }
    };
    std::vector<Ineq> premset = fixed;
    rec(0, premset);
    return out;
}

// Direct validity test of a side condition at a sampled point (used by the
// model checker and the property suites).
enum class PointStatus { Holds, Violated, CtxFalse, Undefined };

inline PointStatus check_at_point(const transformer::SideCondition& sc,
                                  const std::map<std::string, Rat>& env) {
    try {
        if (!sc.ctx.eval(env)) return PointStatus::CtxFalse;
        Rat l = terms::eval_term(sc.lhs, env);
        Rat r = terms::eval_term(sc.rhs, env);
        return l <= r ? PointStatus::Holds : PointStatus::Violated;
    } catch (const terms::EvalError&) {
        return PointStatus::Undefined;
    }
}

}  // namespace peval::constraints
