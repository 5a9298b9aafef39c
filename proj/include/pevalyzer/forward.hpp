// SPDX-License-Identifier: Apache-2.0
//
// A simple forward guard-propagation pass.  Conditionals propagate their
// guard into the branches; assignments kill atoms mentioning the written
// variable; loops keep only atoms over variables the body never writes.
// The collected facts serve two purposes: they become premises of call and
// loop side-conditions, and they seed base-function collection.

#pragma once

#include <map>
#include <set>
#include <vector>

#include "ast.hpp"
#include "term.hpp"

namespace peval::forward {

struct Info {
    // invariant context valid on entry to each call / loop / choice node
    std::map<const Command*, terms::Guard> at;
    // full conjunctive guards of conditionals and loops (used for Iverson bases)
    std::vector<terms::Guard> conj_guards;
    // every comparison atom appearing in a guard (used for distance bases)
    std::vector<terms::Atom> atoms;
};

namespace detail {

inline terms::Guard kill(const terms::Guard& g, const std::set<std::string>& vars) {
    terms::Guard out;
    for (auto& a : g.atoms) {
        bool hit = false;
        for (auto& v : vars)
            if (a.lin.mentions(v)) hit = true;
        if (!hit) out.push(a);
    }
    return out;
}

inline terms::Guard intersect(const terms::Guard& a, const terms::Guard& b) {
    terms::Guard out;
    for (auto& at : a.atoms) {
        if (std::binary_search(b.atoms.begin(), b.atoms.end(), at)) out.push(at);
    }
    return out;
}

// Guard as a single conjunction, when the boolean has one.
inline std::optional<terms::Guard> as_conj(const BExprPtr& b, bool positive) {
    try {
        auto cover = terms::disjoint_cover(b, positive);
        if (cover.size() == 1) return cover[0];
    } catch (const terms::UnsupportedError&) {
    }
    return std::nullopt;
}

struct Pass {
    Info& info;

    void collect_guard(const BExprPtr& b) {
        if (!b || b->kind == BExpr::Kind::Star) return;
        try {
            for (auto& g : terms::disjoint_cover(b, true))
                for (auto& a : g.atoms) info.atoms.push_back(a);
            if (auto g = as_conj(b, true)) {
                if (!g->is_true() && !g->is_false) info.conj_guards.push_back(*g);
            }
        } catch (const terms::UnsupportedError&) {
        }
    }

    terms::Guard run(const CommandPtr& c, terms::Guard ctx) {
        switch (c->kind) {
            case Command::Kind::Skip: return ctx;
            case Command::Kind::Sample: {
                info.at[c.get()] = ctx;
                return kill(ctx, {c->var});
            }
            case Command::Kind::Call: {
                info.at[c.get()] = ctx;
                return kill(ctx, {c->var});
            }
            case Command::Kind::Ret: return ctx;
            case Command::Kind::Local: {
                terms::Guard g = kill(ctx, {c->var});
                try {
                    terms::Atom eq;
                    eq.lin = terms::poly_to_linexpr(Poly::var(c->var) -
                                                    terms::expr_to_poly(c->expr));
                    eq.op = terms::Atom::Op::Eq;
                    g.push(eq);
                } catch (const terms::UnsupportedError&) {
                }
                return run(c->c1, g);
            }
            case Command::Kind::Seq: return run(c->c2, run(c->c1, ctx));
            case Command::Kind::If: {
                collect_guard(c->guard);
                terms::Guard tctx = ctx, ectx = ctx;
                if (auto g = as_conj(c->guard, true)) tctx = terms::Guard::conj(ctx, *g);
                if (auto g = as_conj(c->guard, false)) ectx = terms::Guard::conj(ctx, *g);
                terms::Guard tout = run(c->c1, tctx.is_false ? terms::Guard::truth() : tctx);
                terms::Guard eout = run(c->c2, ectx.is_false ? terms::Guard::truth() : ectx);
                return intersect(tout, eout);
            }
            case Command::Kind::While: {
                collect_guard(c->guard);
                std::set<std::string> written;
                ast::assigned_vars(c->c1, written);
                terms::Guard stable = kill(ctx, written);
                info.at[c.get()] = stable;
                terms::Guard bctx = stable;
                if (auto g = as_conj(c->guard, true)) bctx = terms::Guard::conj(stable, *g);
                run(c->c1, bctx.is_false ? terms::Guard::truth() : bctx);
                terms::Guard out = stable;
                if (auto g = as_conj(c->guard, false)) out = terms::Guard::conj(stable, *g);
                return out.is_false ? stable : out;
            }
            case Command::Kind::NonDet: {
                info.at[c.get()] = ctx;
                terms::Guard a = run(c->c1, ctx);
                terms::Guard b = run(c->c2, ctx);
                return intersect(a, b);
            }
        }
        return ctx;
    }
};

}  // namespace detail

inline Info analyze(const ProcedureDecl& proc) {
    Info info;
    detail::Pass pass{info};
    pass.run(proc.body, terms::Guard::truth());
    return info;
}

}  // namespace peval::forward
