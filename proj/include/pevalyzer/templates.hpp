// SPDX-License-Identifier: Apache-2.0
//
// Template synthesis: per-procedure pre/post-expectation pairs <h_f, k_f>
// over unknown coefficients, loop/choice invariant templates, and the linear
// instantiation templates for logical variables at call sites.

#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "forward.hpp"
#include "term.hpp"

namespace peval::templates {

enum class TemplateKind { Linear, SimpleMixed };

inline std::string kind_name(TemplateKind k) {
    return k == TemplateKind::Linear ? "linear" : "simple-mixed";
}

// Fresh-name generation is the only stateful part of the analysis; one
// context per program analysis.
struct AnalysisContext {
    int coeff = 0, inst = 0, lambda = 0, logical = 0;
    std::map<std::string, std::string> describe;  // symbol -> provenance
    std::map<std::string, int> inst_role;         // d-symbol -> 0 constant, 1 per-logical

    std::string fresh_coeff(const std::string& what) {
        std::string s = "c$" + std::to_string(coeff++);
        describe[s] = what;
        return s;
    }
    std::string fresh_inst(const std::string& what, int role) {
        std::string s = "d$" + std::to_string(inst++);
        describe[s] = what;
        inst_role[s] = role;
        return s;
    }
    std::string fresh_lambda() { return "h$" + std::to_string(lambda++); }
    std::string fresh_logical() { return sym::free_logical(logical++); }
};

using BaseFunction = terms::Norm;

// Variables introduced by the parser's desugarings; they scope over a couple
// of commands and never make useful bases.
inline std::set<std::string> hoist_temporaries(const ProcedureDecl& f) {
    std::set<std::string> temps;
    std::function<void(const CommandPtr&)> walk = [&](const CommandPtr& c) {
        if (!c) return;
        if (c->kind == Command::Kind::Local && c->sugar != 0) temps.insert(c->var);
        walk(c->c1);
        walk(c->c2);
    };
    walk(f.body);
    return temps;
}

// Core heuristic: the constant, a norm per visible variable, and a distance
// norm per comparison reachable in guards or forward invariants.
inline std::vector<BaseFunction> collect_base_functions(const ProcedureDecl& f,
                                                        const forward::Info& inv,
                                                        const std::set<std::string>& globals) {
    std::set<std::string> temps = hoist_temporaries(f);
    std::set<terms::Norm> seen;
    std::vector<BaseFunction> out;
    auto mentions_temp = [&](const terms::Norm& n) {
        for (auto& v : n.body.variables())
            if (temps.count(v)) return true;
        for (auto& a : n.guard.atoms)
            for (auto& [v, c] : a.lin.coeffs)
                if (temps.count(v)) return true;
        return false;
    };
    auto push = [&](const terms::Norm& n) {
        if (n.body.is_constant()) return;
        if (n.guard.is_false || mentions_temp(n)) return;
        if (seen.insert(n).second) out.push_back(n);
    };
    out.push_back(terms::Norm::one());
    for (auto& p : f.params) push(terms::Norm::abs(Poly::var(p)));
    for (auto& g : globals) push(terms::Norm::abs(Poly::var(g)));
    std::function<void(const CommandPtr&)> locals = [&](const CommandPtr& c) {
        if (!c) return;
        if (c->kind == Command::Kind::Local && !temps.count(c->var))
            push(terms::Norm::abs(Poly::var(c->var)));
        locals(c->c1);
        locals(c->c2);
    };
    locals(f.body);
    for (auto& a : inv.atoms) {
        switch (a.op) {
            case terms::Atom::Op::Ge:
            case terms::Atom::Op::Gt: push(terms::Norm::abs(a.lin.to_poly())); break;
            case terms::Atom::Op::Eq:
                push(terms::Norm::abs(a.lin.to_poly()));
                push(terms::Norm::abs(a.lin.to_poly() * Rat(-1)));
                break;
            case terms::Atom::Op::Ne: break;
        }
    }
    return out;
}

// Extension of the core set with guard-scoped bases: for a conjunctive guard
// g this contributes [g] itself and [g]-scoped distances of its atoms.
inline std::vector<BaseFunction> extend_with_guard_bases(std::vector<BaseFunction> bases,
                                                         const forward::Info& inv,
                                                         const std::set<std::string>& temps = {}) {
    std::set<terms::Norm> seen(bases.begin(), bases.end());
    auto mentions_temp = [&](const terms::Guard& g) {
        for (auto& a : g.atoms)
            for (auto& [v, c] : a.lin.coeffs)
                if (temps.count(v)) return true;
        return false;
    };
    auto push = [&](const terms::Norm& n) {
        if (n.guard.is_false) return;
        if (seen.insert(n).second) bases.push_back(n);
    };
    std::set<terms::Guard> guards(inv.conj_guards.begin(), inv.conj_guards.end());
    for (auto& g : guards) {
        if (mentions_temp(g)) continue;
        push(terms::Norm::iverson(g));
        for (auto& a : g.atoms) {
            if (a.op == terms::Atom::Op::Ne) continue;
            push(terms::Norm{g, a.lin.to_poly()});
        }
    }
    return bases;
}

// Simple-mixed closure: squares of non-constant bases and pairwise products
// under the joint guard.
inline std::vector<BaseFunction> simple_mixed_closure(const std::vector<BaseFunction>& bases,
                                                      size_t cap) {
    std::vector<BaseFunction> out = bases;
    std::set<terms::Norm> seen(out.begin(), out.end());
    auto push = [&](const terms::Norm& n) {
        if (out.size() >= cap) return;
        if (n.guard.is_false || n.body.is_constant()) return;
        if (seen.insert(n).second) out.push_back(n);
    };
    std::vector<BaseFunction> nc;
    for (auto& b : bases)
        if (!b.body.is_constant()) nc.push_back(b);
    for (auto& b : nc) push(terms::Norm{b.guard, b.body * b.body});
    for (size_t i = 0; i < nc.size(); ++i)
        for (size_t j = i + 1; j < nc.size(); ++j)
            push(terms::Norm{terms::Guard::conj(nc[i].guard, nc[j].guard),
                             nc[i].body * nc[j].body});
    return out;
}

struct BuiltTemplate {
    terms::Term term;
    std::vector<std::string> coeffs;  // all fresh unknowns, base order
    std::string const_coeff;          // unknown attached to the constant base
    std::vector<std::pair<std::string, terms::Norm>> columns;
};

// sum_i c_i * b_i (+ squares and products for simple-mixed), plus one
// coefficient per supplied logical variable.
inline BuiltTemplate make_template(AnalysisContext& actx, std::vector<BaseFunction> bases,
                                   TemplateKind kind,
                                   const std::vector<std::string>& logicals,
                                   const std::string& what, size_t mixed_cap = 40) {
    if (kind == TemplateKind::SimpleMixed) bases = simple_mixed_closure(bases, mixed_cap);
    BuiltTemplate bt;
    for (auto& b : bases) {
        std::string c = actx.fresh_coeff(what);
        bt.coeffs.push_back(c);
        if (b.guard.is_true() && b.body.is_constant()) bt.const_coeff = c;
        bt.columns.push_back({c, b});
        bt.term.push(RatFn(Poly::var(c)), b);
    }
    for (auto& lv : logicals) {
        std::string c = actx.fresh_coeff(what + " logical weight");
        bt.coeffs.push_back(c);
        bt.columns.push_back({c, terms::Norm{terms::Guard::truth(), Poly::var(lv)}});
        bt.term.push(RatFn(Poly::var(c)), terms::Norm{terms::Guard::truth(), Poly::var(lv)});
    }
    bt.term.canonicalize();
    return bt;
}

// Pre/post-expectation family of one procedure, indexed by its free logical
// variables under the context 0 <= l.
struct TemplatePair {
    std::string proc;
    terms::Term h, k;
    std::vector<std::string> logicals;
    terms::Guard ctx;
    std::vector<std::string> h_coeffs;
    std::string h_const_coeff;
    std::vector<std::pair<std::string, terms::Norm>> h_columns;
};

enum class MeasureKind { Return, Zero };

inline TemplatePair make_procedure_templates(AnalysisContext& actx, const ProcedureDecl& f,
                                             const forward::Info& inv,
                                             const std::set<std::string>& globals,
                                             TemplateKind kind, int logical_count,
                                             MeasureKind measure, size_t mixed_cap = 40) {
    TemplatePair tp;
    tp.proc = f.name;
    for (int i = 0; i < logical_count; ++i) tp.logicals.push_back(actx.fresh_logical());
    for (auto& lv : tp.logicals) {
        terms::Atom a;
        a.lin.add(lv, Rat(1));
        a.op = terms::Atom::Op::Ge;
        tp.ctx.push(a);
    }

    // h ranges over logical parameters and globals
    std::map<std::string, Poly> to_logical;
    for (size_t i = 0; i < f.params.size(); ++i)
        to_logical[f.params[i]] = Poly::var(sym::logical_param(f.name, i));
    std::set<std::string> allowed = globals;
    for (auto& p : f.params) allowed.insert(p);

    std::vector<BaseFunction> bases = extend_with_guard_bases(
        collect_base_functions(f, inv, globals), inv, hoist_temporaries(f));
    std::vector<BaseFunction> hbases;
    for (auto& b : bases) {
        std::set<std::string> vars = b.body.variables();
        for (auto& a : b.guard.atoms)
            for (auto& [v, c] : a.lin.coeffs) vars.insert(v);
        bool ok = true;
        for (auto& v : vars)
            if (!allowed.count(v)) ok = false;
        if (!ok) continue;
        terms::Norm renamed;
        renamed.body = b.body.substitute(to_logical);
        renamed.guard = terms::Guard::truth();
        for (auto& a : b.guard.atoms) {
            terms::Atom na;
            na.lin = terms::poly_to_linexpr(a.lin.to_poly().substitute(to_logical));
            na.op = a.op;
            renamed.guard.push(na);
        }
        hbases.push_back(renamed);
    }
    BuiltTemplate bh = make_template(actx, hbases, kind, tp.logicals,
                                     "h_" + f.name, mixed_cap);
    tp.h = bh.term;
    tp.h_coeffs = bh.coeffs;
    tp.h_const_coeff = bh.const_coeff;
    tp.h_columns = bh.columns;

    // k measures the return value plus globals, shifted by the logicals
    if (measure == MeasureKind::Return)
        tp.k = terms::add(tp.k, terms::Term::of_norm(terms::Norm::abs(Poly::var(sym::logical_ret()))));
    for (auto& g : globals) {
        std::string c = actx.fresh_coeff("k_" + f.name + " global " + g);
        terms::Term gn;
        gn.push(RatFn(Poly::var(c)), terms::Norm::abs(Poly::var(g)));
        tp.k = terms::add(tp.k, gn);
    }
    for (auto& lv : tp.logicals) tp.k = terms::add(tp.k, terms::Term::logical(lv));
    return tp;
}

// Loop / demonic-choice invariant template over the norms of the
// continuation, the in-scope variables, and the guard-derived bases.
inline BuiltTemplate make_invariant_template(AnalysisContext& actx, const terms::Term& cont,
                                             const std::vector<std::string>& scope_vars,
                                             const std::vector<BaseFunction>& guard_bases,
                                             TemplateKind kind,
                                             const std::vector<std::string>& logicals,
                                             const std::string& what, size_t mixed_cap = 40) {
    std::set<terms::Norm> seen;
    std::vector<BaseFunction> bases;
    auto push = [&](const terms::Norm& n) {
        if (n.guard.is_false) return;
        if (seen.insert(n).second) bases.push_back(n);
    };
    push(terms::Norm::one());
    std::set<std::string> logi(logicals.begin(), logicals.end());
    for (auto& s : cont.summands) {
        // logical columns are appended separately
        if (s.norm.guard.is_true() && s.norm.body.terms().size() == 1) {
            auto& m = s.norm.body.terms().begin()->first;
            if (m.factors.size() == 1 && logi.count(m.factors[0].first)) continue;
        }
        push(s.norm);
    }
    for (auto& v : scope_vars) push(terms::Norm::abs(Poly::var(v)));
    for (auto& b : guard_bases) push(b);
    return make_template(actx, bases, kind, logicals, what, mixed_cap);
}

// Per-call instantiation templates for the callee's logical variables:
// linear in the caller's logical (and optionally local) variables.
inline std::vector<terms::Term> make_instantiation(AnalysisContext& actx,
                                                   const TemplatePair& callee,
                                                   const std::vector<std::string>& caller_logicals,
                                                   const std::vector<std::string>& caller_locals) {
    std::vector<terms::Term> taus;
    for (size_t i = 0; i < callee.logicals.size(); ++i) {
        std::string what = "instantiation for " + callee.proc;
        terms::Term tau;
        tau.push(RatFn(Poly::var(actx.fresh_inst(what, 0))), terms::Norm::one());
        for (auto& lv : caller_logicals) {
            tau.push(RatFn(Poly::var(actx.fresh_inst(what, 1))),
                     terms::Norm{terms::Guard::truth(), Poly::var(lv)});
        }
        for (auto& loc : caller_locals) {
            tau.push(RatFn(Poly::var(actx.fresh_inst(what, 0))),
                     terms::Norm::abs(Poly::var(loc)));
        }
        tau.canonicalize();
        taus.push_back(tau);
    }
    return taus;
}

}  // namespace peval::templates
