// SPDX-License-Identifier: Apache-2.0
//
// Alpha-renaming to the variable convention (formal parameters, globals and
// all locally bound variables pairwise distinct, program-wide) and the
// well-formedness checks.

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ast.hpp"

namespace peval::frontend {

namespace detail_norm {

inline std::string fresh(const std::string& base, std::set<std::string>& taken) {
    if (!taken.count(base)) {
        taken.insert(base);
        return base;
    }
    for (int k = 1;; ++k) {
        std::string cand = base + "_" + std::to_string(k);
        if (!taken.count(cand)) {
            taken.insert(cand);
            return cand;
        }
    }
}

inline ExprPtr rename(const ExprPtr& e, const std::map<std::string, std::string>& env) {
    if (!e) return e;
    switch (e->kind) {
        case Expr::Kind::Var: {
            auto it = env.find(e->var);
            if (it == env.end() || it->second == e->var) return e;
            return Expr::mkvar(it->second, e->loc);
        }
        case Expr::Kind::Const: return e;
        default: {
            ExprPtr l = rename(e->lhs, env), r = rename(e->rhs, env);
            if (l == e->lhs && r == e->rhs) return e;
            return Expr::mk(e->kind, l, r, e->loc);
        }
    }
}
inline BExprPtr rename(const BExprPtr& b, const std::map<std::string, std::string>& env) {
    if (!b) return b;
    switch (b->kind) {
        case BExpr::Kind::Cmp: {
            auto l = rename(b->el, env), r = rename(b->er, env);
            if (l == b->el && r == b->er) return b;
            return BExpr::mkcmp(b->op, l, r, b->loc);
        }
        case BExpr::Kind::And:
        case BExpr::Kind::Or: {
            auto l = rename(b->bl, env), r = rename(b->br, env);
            if (l == b->bl && r == b->br) return b;
            return b->kind == BExpr::Kind::And ? BExpr::mkand(l, r) : BExpr::mkor(l, r);
        }
        case BExpr::Kind::Not: {
            auto l = rename(b->bl, env);
            return l == b->bl ? b : BExpr::mknot(l);
        }
        default: return b;
    }
}
inline SamplingExpr rename(const SamplingExpr& d, const std::map<std::string, std::string>& env) {
    SamplingExpr r = d;
    r.e1 = rename(d.e1, env);
    r.e2 = rename(d.e2, env);
    r.e3 = rename(d.e3, env);
    for (auto& [p, v] : r.table) {
        p = rename(p, env);
        v = rename(v, env);
    }
    return r;
}

inline CommandPtr rename_cmd(const CommandPtr& c, std::map<std::string, std::string> env,
                             std::set<std::string>& taken) {
    if (!c) return c;
    auto copy = std::make_shared<Command>(*c);
    switch (c->kind) {
        case Command::Kind::Skip: return c;
        case Command::Kind::Sample: {
            auto it = env.find(c->var);
            if (it != env.end()) copy->var = it->second;
            copy->dist = rename(c->dist, env);
            break;
        }
        case Command::Kind::Call: {
            auto it = env.find(c->var);
            if (it != env.end()) copy->var = it->second;
            for (auto& a : copy->args) a = rename(a, env);
            break;
        }
        case Command::Kind::Ret: copy->expr = rename(c->expr, env); break;
        case Command::Kind::Local: {
            copy->expr = rename(c->expr, env);
            std::string nn = fresh(c->var, taken);
            env[c->var] = nn;
            copy->var = nn;
            copy->c1 = rename_cmd(c->c1, env, taken);
            break;
        }
        case Command::Kind::Seq:
        case Command::Kind::NonDet:
            copy->c1 = rename_cmd(c->c1, env, taken);
            copy->c2 = rename_cmd(c->c2, env, taken);
            break;
        case Command::Kind::If:
            copy->guard = rename(c->guard, env);
            copy->c1 = rename_cmd(c->c1, env, taken);
            copy->c2 = rename_cmd(c->c2, env, taken);
            break;
        case Command::Kind::While:
            copy->guard = rename(c->guard, env);
            copy->c1 = rename_cmd(c->c1, env, taken);
            break;
    }
    return copy;
}

}  // namespace detail_norm

// Globally freshens all bound names; idempotent.
inline Program normalize(const Program& p) {
    Program out;
    out.globals = p.globals;
    std::set<std::string> taken = p.globals;
    for (auto& d : p.decls) {
        ProcedureDecl nd;
        nd.name = d.name;
        nd.loc = d.loc;
        std::map<std::string, std::string> env;
        for (auto& prm : d.params) {
            std::string nn = detail_norm::fresh(prm, taken);
            env[prm] = nn;
            nd.params.push_back(nn);
        }
        nd.body = detail_norm::rename_cmd(d.body, env, taken);
        out.decls.push_back(std::move(nd));
    }
    return out;
}

namespace detail_wf {

inline void check_dist(const SamplingExpr& d, const SourceLoc& loc,
                       std::vector<Diagnostic>& out) {
    auto const_val = [](const ExprPtr& e) -> std::optional<Rat> {
        if (e && e->kind == Expr::Kind::Const) return e->value;
        if (e && e->kind == Expr::Kind::Div && e->lhs->kind == Expr::Kind::Const &&
            e->rhs->kind == Expr::Kind::Const && !e->rhs->value.is_zero())
            return e->lhs->value / e->rhs->value;
        return std::nullopt;
    };
    switch (d.kind) {
        case SamplingExpr::Kind::Uniform:
            if (!d.lo.is_integer() || !d.hi.is_integer())
                out.push_back({"Uniform bounds must be integers", loc});
            if (d.lo > d.hi)
                out.push_back({"Uniform lower bound exceeds upper bound", loc});
            break;
        case SamplingExpr::Kind::Bernoulli:
            if (auto p = const_val(d.e1)) {
                if (*p < Rat(0) || *p > Rat(1))
                    out.push_back({"Bernoulli probability outside [0, 1]", loc});
            }
            break;
        case SamplingExpr::Kind::Binomial:
            if (auto p = const_val(d.e2)) {
                if (*p < Rat(0) || *p > Rat(1))
                    out.push_back({"Binomial probability outside [0, 1]", loc});
            }
            break;
        case SamplingExpr::Kind::DiscreteTable: {
            bool all_const = true;
            Rat sum(0);
            for (auto& [p, v] : d.table) {
                auto c = const_val(p);
                if (!c) {
                    all_const = false;
                    break;
                }
                if (*c < Rat(0) || *c > Rat(1)) {
                    out.push_back({"Discrete probability outside [0, 1]", loc});
                }
                sum += *c;
            }
            if (all_const && sum != Rat(1))
                out.push_back({"Discrete probabilities do not sum to 1", loc});
            break;
        }
        default: break;
    }
}

inline void walk(const CommandPtr& c, const Program& p, std::set<std::string> scope,
                 std::set<std::string>& bound_seen, std::vector<Diagnostic>& out) {
    if (!c) return;
    auto check_var = [&](const std::string& v, const SourceLoc& l) {
        if (!scope.count(v)) out.push_back({"unbound variable '" + v + "'", l});
    };
    std::set<std::string> used;
    switch (c->kind) {
        case Command::Kind::Sample:
            check_var(c->var, c->loc);
            ast::collect_vars(c->dist, used);
            for (auto& v : used) check_var(v, c->loc);
            detail_wf::check_dist(c->dist, c->loc, out);
            break;
        case Command::Kind::Call: {
            check_var(c->var, c->loc);
            const ProcedureDecl* callee = p.find(c->proc);
            if (!callee) {
                out.push_back({"call to undefined procedure '" + c->proc + "'", c->loc});
            } else if (callee->arity() != c->args.size()) {
                out.push_back({"arity mismatch in call to '" + c->proc + "'", c->loc});
            }
            for (auto& a : c->args) {
                std::set<std::string> vs;
                ast::collect_vars(a, vs);
                for (auto& v : vs) check_var(v, c->loc);
            }
            break;
        }
        case Command::Kind::Ret: {
            ast::collect_vars(c->expr, used);
            for (auto& v : used) check_var(v, c->loc);
            break;
        }
        case Command::Kind::Local: {
            ast::collect_vars(c->expr, used);
            for (auto& v : used) check_var(v, c->loc);
            if (bound_seen.count(c->var))
                out.push_back({"locally bound variable '" + c->var +
                                   "' is not unique program-wide",
                               c->loc});
            bound_seen.insert(c->var);
            scope.insert(c->var);
            walk(c->c1, p, scope, bound_seen, out);
            break;
        }
        case Command::Kind::Seq:
        case Command::Kind::NonDet:
            walk(c->c1, p, scope, bound_seen, out);
            walk(c->c2, p, scope, bound_seen, out);
            break;
        case Command::Kind::If:
        case Command::Kind::While: {
            ast::collect_vars(c->guard, used);
            for (auto& v : used) check_var(v, c->loc);
            walk(c->c1, p, scope, bound_seen, out);
            walk(c->c2, p, scope, bound_seen, out);
            break;
        }
        default: break;
    }
}

}  // namespace detail_wf

// Empty result iff the program satisfies every structural invariant.
inline std::vector<Diagnostic> check_well_formed(const Program& p) {
    std::vector<Diagnostic> out;
    std::set<std::string> proc_names;
    for (auto& d : p.decls) {
        if (!proc_names.insert(d.name).second)
            out.push_back({"duplicate procedure '" + d.name + "'", d.loc});
    }
    std::set<std::string> bound_seen = p.globals;
    for (auto& d : p.decls) {
        std::set<std::string> scope = p.globals;
        for (auto& prm : d.params) {
            if (bound_seen.count(prm))
                out.push_back({"parameter '" + prm + "' is not unique program-wide", d.loc});
            bound_seen.insert(prm);
            scope.insert(prm);
        }
        detail_wf::walk(d.body, p, scope, bound_seen, out);
    }
    return out;
}

}  // namespace peval::frontend
