// SPDX-License-Identifier: Apache-2.0
//
// Core AST of the probabilistic while-language: programs are sequences of
// integer procedures over global variables, with sampling assignments,
// procedure calls, local declarations, conditionals, loops, demonic choice
// and return statements.

#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rational.hpp"

namespace peval {

struct SourceLoc {
    int line = 0;
    int col = 0;
    std::string to_string() const {
        return std::to_string(line) + ":" + std::to_string(col);
    }
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Var, Const, Add, Sub, Mul, Div, Neg };
    Kind kind;
    std::string var;   // Var
    Rat value;         // Const
    ExprPtr lhs, rhs;  // binary / unary (lhs)
    SourceLoc loc;

    static ExprPtr mkvar(std::string v, SourceLoc l = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = Kind::Var;
        e->var = std::move(v);
        e->loc = l;
        return e;
    }
    static ExprPtr mkconst(Rat c, SourceLoc l = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = Kind::Const;
        e->value = std::move(c);
        e->loc = l;
        return e;
    }
    static ExprPtr mk(Kind k, ExprPtr a, ExprPtr b, SourceLoc l = {}) {
        auto e = std::make_shared<Expr>();
        e->kind = k;
        e->lhs = std::move(a);
        e->rhs = std::move(b);
        e->loc = l;
        return e;
    }
};

enum class CmpOp { Lt, Le, Gt, Ge, Eq, Ne };

struct BExpr;
using BExprPtr = std::shared_ptr<const BExpr>;

struct BExpr {
    enum class Kind { Cmp, And, Or, Not, Const, Star };
    Kind kind;
    CmpOp op = CmpOp::Eq;  // Cmp
    ExprPtr el, er;        // Cmp
    BExprPtr bl, br;       // And / Or / Not (bl)
    bool value = false;    // Const
    SourceLoc loc;

    static BExprPtr mkcmp(CmpOp o, ExprPtr a, ExprPtr b, SourceLoc l = {}) {
        auto e = std::make_shared<BExpr>();
        e->kind = Kind::Cmp;
        e->op = o;
        e->el = std::move(a);
        e->er = std::move(b);
        e->loc = l;
        return e;
    }
    static BExprPtr mkand(BExprPtr a, BExprPtr b) {
        auto e = std::make_shared<BExpr>();
        e->kind = Kind::And;
        e->bl = std::move(a);
        e->br = std::move(b);
        return e;
    }
    static BExprPtr mkor(BExprPtr a, BExprPtr b) {
        auto e = std::make_shared<BExpr>();
        e->kind = Kind::Or;
        e->bl = std::move(a);
        e->br = std::move(b);
        return e;
    }
    static BExprPtr mknot(BExprPtr a) {
        auto e = std::make_shared<BExpr>();
        e->kind = Kind::Not;
        e->bl = std::move(a);
        return e;
    }
    static BExprPtr mkconst(bool v) {
        auto e = std::make_shared<BExpr>();
        e->kind = Kind::Const;
        e->value = v;
        return e;
    }
    static BExprPtr mkstar(SourceLoc l = {}) {
        auto e = std::make_shared<BExpr>();
        e->kind = Kind::Star;
        e->loc = l;
        return e;
    }
};

struct SamplingExpr {
    enum class Kind { Bernoulli, Uniform, Binomial, Hypergeometric, DiscreteTable };
    Kind kind;
    // Bernoulli(p); Binomial(n, p); Hypergeometric(population, successes, draws)
    ExprPtr e1, e2, e3;
    Rat lo, hi;  // Uniform bounds, constant integers
    std::vector<std::pair<ExprPtr, ExprPtr>> table;  // (probability, value)
    SourceLoc loc;

    bool is_dirac() const {
        return kind == Kind::DiscreteTable && table.size() == 1;
    }
    static SamplingExpr dirac(ExprPtr e) {
        SamplingExpr d;
        d.kind = Kind::DiscreteTable;
        d.table.push_back({Expr::mkconst(Rat(1)), std::move(e)});
        return d;
    }
};

struct Command;
using CommandPtr = std::shared_ptr<const Command>;

struct Command {
    enum class Kind { Skip, Sample, Call, Ret, Local, Seq, If, While, NonDet };
    Kind kind;
    std::string var;   // Sample / Call / Local target
    SamplingExpr dist; // Sample
    std::string proc;  // Call
    std::vector<ExprPtr> args;  // Call
    ExprPtr expr;      // Ret / Local initializer
    BExprPtr guard;    // If / While
    CommandPtr c1, c2; // Seq / If / NonDet branches, Local body (c1), While body (c1)
    bool default_init = false;  // Local came from bare "var x" (presentation only)
    int var_group = 0;  // shared id of locals from one multi-variable "var" line
    int sugar = 0;     // presentation hint, see printer
    SourceLoc loc;
    int id = 0;        // stable node id assigned by the frontend

    static std::shared_ptr<Command> make(Kind k) {
        auto c = std::make_shared<Command>();
        c->kind = k;
        return c;
    }
};

struct ProcedureDecl {
    std::string name;
    std::vector<std::string> params;
    CommandPtr body;
    SourceLoc loc;
    size_t arity() const { return params.size(); }
};

struct Program {
    std::set<std::string> globals;
    std::vector<ProcedureDecl> decls;

    const ProcedureDecl* find(const std::string& name) const {
        for (auto& d : decls)
            if (d.name == name) return &d;
        return nullptr;
    }
};

struct Diagnostic {
    std::string message;
    SourceLoc loc;
    std::string to_string() const {
        return (loc.line ? loc.to_string() + ": " : std::string()) + message;
    }
};

// Thrown by the frontend on unrecoverable input errors.
struct FrontendError : std::runtime_error {
    Diagnostic diag;
    explicit FrontendError(Diagnostic d)
        : std::runtime_error(d.to_string()), diag(std::move(d)) {}
};

namespace ast {

inline void collect_vars(const ExprPtr& e, std::set<std::string>& out) {
    if (!e) return;
    if (e->kind == Expr::Kind::Var) out.insert(e->var);
    collect_vars(e->lhs, out);
    collect_vars(e->rhs, out);
}
inline void collect_vars(const BExprPtr& b, std::set<std::string>& out) {
    if (!b) return;
    collect_vars(b->el, out);
    collect_vars(b->er, out);
    collect_vars(b->bl, out);
    collect_vars(b->br, out);
}
inline void collect_vars(const SamplingExpr& d, std::set<std::string>& out) {
    collect_vars(d.e1, out);
    collect_vars(d.e2, out);
    collect_vars(d.e3, out);
    for (auto& [p, v] : d.table) {
        collect_vars(p, out);
        collect_vars(v, out);
    }
}

// Variables written by a command (sampling and call targets).
inline void assigned_vars(const CommandPtr& c, std::set<std::string>& out) {
    if (!c) return;
    switch (c->kind) {
        case Command::Kind::Sample:
        case Command::Kind::Call: out.insert(c->var); break;
        case Command::Kind::Local:
            assigned_vars(c->c1, out);
            break;
        case Command::Kind::Seq:
        case Command::Kind::If:
        case Command::Kind::NonDet:
            assigned_vars(c->c1, out);
            assigned_vars(c->c2, out);
            break;
        case Command::Kind::While: assigned_vars(c->c1, out); break;
        default: break;
    }
}

inline bool contains_nondet(const CommandPtr& c) {
    if (!c) return false;
    if (c->kind == Command::Kind::NonDet) return true;
    return contains_nondet(c->c1) || contains_nondet(c->c2);
}

inline void collect_called_procs(const CommandPtr& c, std::set<std::string>& out) {
    if (!c) return;
    if (c->kind == Command::Kind::Call) out.insert(c->proc);
    collect_called_procs(c->c1, out);
    collect_called_procs(c->c2, out);
}

// Structural equality (ignores locations, ids and presentation hints).
bool equal(const ExprPtr& a, const ExprPtr& b);
bool equal(const BExprPtr& a, const BExprPtr& b);

inline bool equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case Expr::Kind::Var: return a->var == b->var;
        case Expr::Kind::Const: return a->value == b->value;
        default: return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
    }
}
inline bool equal(const BExprPtr& a, const BExprPtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case BExpr::Kind::Cmp:
            return a->op == b->op && equal(a->el, b->el) && equal(a->er, b->er);
        case BExpr::Kind::Const: return a->value == b->value;
        case BExpr::Kind::Star: return true;
        default: return equal(a->bl, b->bl) && equal(a->br, b->br);
    }
}
inline bool equal(const SamplingExpr& a, const SamplingExpr& b) {
    if (a.kind != b.kind) return false;
    if (a.lo != b.lo || a.hi != b.hi) return false;
    if (a.table.size() != b.table.size()) return false;
    for (size_t i = 0; i < a.table.size(); ++i)
        if (!equal(a.table[i].first, b.table[i].first) ||
            !equal(a.table[i].second, b.table[i].second))
            return false;
    return equal(a.e1, b.e1) && equal(a.e2, b.e2) && equal(a.e3, b.e3);
}
inline bool equal(const CommandPtr& a, const CommandPtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind) return false;
    if (a->var != b->var || a->proc != b->proc) return false;
    if (a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->args.size(); ++i)
        if (!equal(a->args[i], b->args[i])) return false;
    if (!equal(a->dist, b->dist)) return false;
    if (!equal(a->expr, b->expr) || !equal(a->guard, b->guard)) return false;
    return equal(a->c1, b->c1) && equal(a->c2, b->c2);
}
inline bool equal(const Program& a, const Program& b) {
    if (a.globals != b.globals || a.decls.size() != b.decls.size()) return false;
    for (size_t i = 0; i < a.decls.size(); ++i) {
        if (a.decls[i].name != b.decls[i].name) return false;
        if (a.decls[i].params != b.decls[i].params) return false;
        if (!equal(a.decls[i].body, b.decls[i].body)) return false;
    }
    return true;
}

}  // namespace ast
}  // namespace peval
