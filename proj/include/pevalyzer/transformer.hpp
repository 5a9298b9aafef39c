// SPDX-License-Identifier: Apache-2.0
//
// The constraint-emitting term transformer.  Every command is compiled to a
// pre-expectation term; loops, demonic choice and procedure calls replace
// their fixed points by constrained templates, emitting side-conditions of
// the form  ctx |- lhs <= rhs  along the way.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "expected.hpp"
#include "forward.hpp"
#include "templates.hpp"

namespace peval::transformer {

struct SideCondition {
    terms::Guard ctx;
    terms::Term lhs, rhs;
    std::string rule;  // transformer rule that emitted it
    SourceLoc loc;

    std::string to_string() const {
        return "[" + rule + " @ " + loc.to_string() + "] " + ctx.to_string() +
               " |- " + lhs.to_string() + " <= " + rhs.to_string();
    }
};

struct AnalysisConfig {
    templates::TemplateKind kind = templates::TemplateKind::Linear;
    templates::MeasureKind measure = templates::MeasureKind::Return;
    int logicals = 1;
    bool insts_use_locals = false;  // include in-scope locals in instantiations
    size_t mixed_cap = 40;
};

struct AnalysisState {
    const Program& prog;
    AnalysisConfig cfg;
    templates::AnalysisContext names;
    std::map<std::string, forward::Info> fwd;
    std::map<std::string, templates::TemplatePair> tpl;
    std::vector<SideCondition> conditions;

    explicit AnalysisState(const Program& p, AnalysisConfig c = {}) : prog(p), cfg(c) {}
};

namespace detail {

struct ProcCtx {
    AnalysisState& st;
    const ProcedureDecl& proc;
    const forward::Info& inv;
    terms::Term s;  // the caller post-expectation k_f
    std::vector<std::string> scope_locals;

    const templates::TemplatePair& tp() const { return st.tpl.at(proc.name); }

    terms::Guard here(const Command* c) const {
        auto it = inv.at.find(c);
        terms::Guard g = it == inv.at.end() ? terms::Guard::truth() : it->second;
        return terms::Guard::conj(tp().ctx, g);
    }

    void emit(terms::Guard ctx, terms::Term lhs, terms::Term rhs, std::string rule,
              SourceLoc loc) {
        st.conditions.push_back(
            {std::move(ctx), std::move(lhs), std::move(rhs), std::move(rule), loc});
    }
};

terms::Term et_cmd(const CommandPtr& c, const terms::Term& t, ProcCtx& pc);

// h or k of the callee with logical parameters bound to the argument
// expressions and logical variables bound to the instantiation templates.
inline terms::Term instantiate(const terms::Term& body, const std::string& callee,
                               const std::vector<std::string>& callee_logicals,
                               const std::vector<ExprPtr>* args,
                               const std::vector<terms::Term>& taus,
                               templates::AnalysisContext& names) {
    terms::Term r = body;
    if (args) {
        std::map<std::string, Poly> su;
        for (size_t i = 0; i < args->size(); ++i)
            su[sym::logical_param(callee, i)] = terms::expr_to_poly((*args)[i]);
        r = terms::substitute(r, su);
    }
    // simultaneous logical substitution through fresh placeholders
    std::vector<std::string> tmps;
    for (size_t i = 0; i < callee_logicals.size(); ++i) {
        std::string tmp = names.fresh_logical();
        tmps.push_back(tmp);
        r = terms::substitute_logical(r, callee_logicals[i], terms::Term::logical(tmp));
    }
    for (size_t i = 0; i < tmps.size(); ++i)
        r = terms::substitute_logical(r, tmps[i], taus[i]);
    return r;
}

inline terms::Term et_call(const CommandPtr& c, const terms::Term& t, ProcCtx& pc) {
    auto it = pc.st.tpl.find(c->proc);
    if (it == pc.st.tpl.end())
        throw terms::UnsupportedError("call to untemplated procedure " + c->proc);
    const templates::TemplatePair& callee = it->second;
    std::vector<terms::Term> taus = templates::make_instantiation(
        pc.st.names, callee, pc.tp().logicals,
        pc.st.cfg.insts_use_locals ? pc.scope_locals : std::vector<std::string>{});

    terms::Guard ctx = pc.here(c.get());
    // context instantiation:  Gamma_g |- Gamma_g[ls -> taus]
    for (auto& tau : taus)
        pc.emit(ctx, terms::Term::zero(), tau, "call-ctx", c->loc);
    // continuation bound:  Gamma_g |- t[x -> lr] <= k_g[ls -> taus]
    terms::Term cont = terms::substitute(t, {{c->var, Poly::var(sym::logical_ret())}});
    terms::Term bound =
        instantiate(callee.k, c->proc, callee.logicals, nullptr, taus, pc.st.names);
    pc.emit(ctx, cont, bound, "call-post", c->loc);

    return instantiate(callee.h, c->proc, callee.logicals, &c->args, taus, pc.st.names);
}

inline terms::Term et_while(const CommandPtr& c, const terms::Term& t, ProcCtx& pc) {
    std::vector<templates::BaseFunction> gbases;
    try {
        for (auto& g : terms::disjoint_cover(c->guard, true))
            for (auto& a : g.atoms)
                if (a.op != terms::Atom::Op::Ne)
                    gbases.push_back(terms::Norm::abs(a.lin.to_poly()));
        auto conj = terms::disjoint_cover(c->guard, true);
        if (conj.size() == 1 && !conj[0].is_true()) {
            gbases.push_back(terms::Norm::iverson(conj[0]));
            for (auto& a : conj[0].atoms)
                if (a.op != terms::Atom::Op::Ne)
                    gbases.push_back(terms::Norm{conj[0], a.lin.to_poly()});
        }
    } catch (const terms::UnsupportedError&) {
    }
    std::vector<std::string> scope = pc.scope_locals;
    for (auto& p : pc.proc.params) scope.push_back(p);
    for (auto& g : pc.st.prog.globals) scope.push_back(g);
    templates::BuiltTemplate u = templates::make_invariant_template(
        pc.st.names, t, scope, gbases, pc.st.cfg.kind, pc.tp().logicals,
        "loop invariant at " + c->loc.to_string(), pc.st.cfg.mixed_cap);

    terms::Guard base = pc.here(c.get());
    terms::Term body_pre = et_cmd(c->c1, u.term, pc);
    for (auto& g : terms::disjoint_cover(c->guard, true))
        pc.emit(terms::Guard::conj(base, g), body_pre, u.term, "while-step", c->loc);
    for (auto& g : terms::disjoint_cover(c->guard, false))
        pc.emit(terms::Guard::conj(base, g), t, u.term, "while-exit", c->loc);
    return u.term;
}

inline terms::Term et_nondet(const CommandPtr& c, const terms::Term& t, ProcCtx& pc) {
    std::vector<std::string> scope = pc.scope_locals;
    for (auto& p : pc.proc.params) scope.push_back(p);
    for (auto& g : pc.st.prog.globals) scope.push_back(g);
    templates::BuiltTemplate u = templates::make_invariant_template(
        pc.st.names, t, scope, {}, pc.st.cfg.kind, pc.tp().logicals,
        "choice bound at " + c->loc.to_string(), pc.st.cfg.mixed_cap);
    terms::Guard ctx = pc.here(c.get());
    pc.emit(ctx, et_cmd(c->c1, t, pc), u.term, "choice-left", c->loc);
    pc.emit(ctx, et_cmd(c->c2, t, pc), u.term, "choice-right", c->loc);
    return u.term;
}

inline terms::Term et_cmd(const CommandPtr& c, const terms::Term& t, ProcCtx& pc) {
    switch (c->kind) {
        case Command::Kind::Skip: return t;
        case Command::Kind::Sample:
            return terms::expected_term(c->var, c->dist, t);
        case Command::Kind::Call: return et_call(c, t, pc);
        case Command::Kind::Ret:
            return terms::substitute(pc.s,
                                     {{sym::logical_ret(), terms::expr_to_poly(c->expr)}});
        case Command::Kind::Local: {
            pc.scope_locals.push_back(c->var);
            terms::Term inner = et_cmd(c->c1, t, pc);
            pc.scope_locals.pop_back();
            return terms::substitute(inner, {{c->var, terms::expr_to_poly(c->expr)}});
        }
        case Command::Kind::Seq: return et_cmd(c->c1, et_cmd(c->c2, t, pc), pc);
        case Command::Kind::If: {
            terms::Term then_pre = et_cmd(c->c1, t, pc);
            terms::Term else_pre = et_cmd(c->c2, t, pc);
            terms::Term r;
            for (auto& g : terms::disjoint_cover(c->guard, true))
                r = terms::add(r, terms::guard_mul_guard(g, then_pre));
            for (auto& g : terms::disjoint_cover(c->guard, false))
                r = terms::add(r, terms::guard_mul_guard(g, else_pre));
            return r;
        }
        case Command::Kind::While: return et_while(c, t, pc);
        case Command::Kind::NonDet: return et_nondet(c, t, pc);
    }
    throw terms::UnsupportedError("et_cmd: unknown command");
}

}  // namespace detail

// spec-facing wrapper: compile one command against an explicit continuation
// and caller post-expectation.
inline terms::Term et_command(const CommandPtr& c, const terms::Term& cont,
                              const terms::Term& caller_post, AnalysisState& st,
                              const ProcedureDecl& proc) {
    auto fit = st.fwd.find(proc.name);
    if (fit == st.fwd.end()) fit = st.fwd.emplace(proc.name, forward::analyze(proc)).first;
    detail::ProcCtx pc{st, proc, fit->second, caller_post, {}};
    return detail::et_cmd(c, cont, pc);
}

// ET[f](k_f) with parameters renamed to the logical parameters; conditions
// emitted during the traversal undergo the same renaming.
inline terms::Term et_procedure(const ProcedureDecl& f, AnalysisState& st) {
    const templates::TemplatePair& tp = st.tpl.at(f.name);
    terms::Term t0 =
        terms::substitute(tp.k, {{sym::logical_ret(), Poly::constant(Rat(0))}});
    size_t first_cond = st.conditions.size();
    auto fit = st.fwd.find(f.name);
    if (fit == st.fwd.end()) fit = st.fwd.emplace(f.name, forward::analyze(f)).first;
    detail::ProcCtx pc{st, f, fit->second, tp.k, {}};
    terms::Term result = detail::et_cmd(f.body, t0, pc);

    std::map<std::string, Poly> to_logical;
    for (size_t i = 0; i < f.params.size(); ++i)
        to_logical[f.params[i]] = Poly::var(sym::logical_param(f.name, i));
    result = terms::substitute(result, to_logical);
    for (size_t i = first_cond; i < st.conditions.size(); ++i) {
        SideCondition& sc = st.conditions[i];
        sc.lhs = terms::substitute(sc.lhs, to_logical);
        sc.rhs = terms::substitute(sc.rhs, to_logical);
        terms::Guard g;
        for (auto& a : sc.ctx.atoms) {
            terms::Atom na;
            na.lin = terms::poly_to_linexpr(a.lin.to_poly().substitute(to_logical));
            na.op = a.op;
            g.push(na);
        }
        sc.ctx = g;
    }
    return result;
}

// The whole-program constraint set: templates for every procedure up front
// (so mutual recursion needs no ordering), then per procedure the top-level
// adherence condition, the accumulated side-conditions, and non-negativity
// of h_f.
inline std::vector<SideCondition> generate_constraints(AnalysisState& st) {
    for (auto& d : st.prog.decls)
        st.fwd.emplace(d.name, forward::analyze(d));
    for (auto& d : st.prog.decls) {
        st.tpl.emplace(d.name, templates::make_procedure_templates(
                                   st.names, d, st.fwd.at(d.name), st.prog.globals,
                                   st.cfg.kind, st.cfg.logicals, st.cfg.measure,
                                   st.cfg.mixed_cap));
    }
    for (auto& d : st.prog.decls) {
        const templates::TemplatePair& tp = st.tpl.at(d.name);
        terms::Term lhs = et_procedure(d, st);
        st.conditions.push_back({tp.ctx, lhs, tp.h, "procedure", d.loc});
        st.conditions.push_back({tp.ctx, terms::Term::zero(), tp.h, "h-nonneg", d.loc});
    }
    return st.conditions;
}

}  // namespace peval::transformer
