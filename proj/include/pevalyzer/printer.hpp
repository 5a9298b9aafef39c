// SPDX-License-Identifier: Apache-2.0
//
// Canonical pretty-printer.  Desugared forms introduced by the parser are
// folded back into surface syntax so that print . parse is the identity on
// the benchmark sources up to whitespace.

#pragma once

#include <map>
#include <sstream>
#include <string>

#include "ast.hpp"

namespace peval::frontend {

namespace detail_pp {

inline int prec(Expr::Kind k) {
    switch (k) {
        case Expr::Kind::Add:
        case Expr::Kind::Sub: return 1;
        case Expr::Kind::Mul:
        case Expr::Kind::Div: return 2;
        case Expr::Kind::Neg: return 3;
        default: return 4;
    }
}

inline std::string print_expr(const ExprPtr& e,
                              const std::map<std::string, std::string>& subst,
                              int parent_prec = 0) {
    std::string s;
    int p = prec(e->kind);
    switch (e->kind) {
        case Expr::Kind::Var: {
            auto it = subst.find(e->var);
            // substituted draws are call syntax, atomic at any precedence
            s = it == subst.end() ? e->var : it->second;
            break;
        }
        case Expr::Kind::Const: s = e->value.to_string(); break;
        case Expr::Kind::Neg:
            s = "-" + print_expr(e->lhs, subst, p);
            break;
        case Expr::Kind::Add:
            s = print_expr(e->lhs, subst, p) + " + " + print_expr(e->rhs, subst, p + 1);
            break;
        case Expr::Kind::Sub:
            s = print_expr(e->lhs, subst, p) + " - " + print_expr(e->rhs, subst, p + 1);
            break;
        case Expr::Kind::Mul:
            s = print_expr(e->lhs, subst, p) + " * " + print_expr(e->rhs, subst, p + 1);
            break;
        case Expr::Kind::Div:
            s = print_expr(e->lhs, subst, p) + "/" + print_expr(e->rhs, subst, p + 1);
            break;
    }
    if (p < parent_prec) return "(" + s + ")";
    return s;
}

inline std::string cmp_text(CmpOp op) {
    switch (op) {
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
        case CmpOp::Eq: return "=";
        case CmpOp::Ne: return "!=";
    }
    return "?";
}

inline std::string print_bexpr(const BExprPtr& b,
                               const std::map<std::string, std::string>& subst,
                               bool parens_or = false) {
    switch (b->kind) {
        case BExpr::Kind::Cmp:
            return print_expr(b->el, subst) + " " + cmp_text(b->op) + " " +
                   print_expr(b->er, subst);
        case BExpr::Kind::And: {
            // re-chain  a < b && b <= c  to  a < b <= c
            auto ascending = [](CmpOp op) { return op == CmpOp::Lt || op == CmpOp::Le; };
            if (b->bl->kind == BExpr::Kind::Cmp && b->br->kind == BExpr::Kind::Cmp &&
                ascending(b->bl->op) && ascending(b->br->op) &&
                ast::equal(b->bl->er, b->br->el)) {
                return print_expr(b->bl->el, subst) + " " + cmp_text(b->bl->op) + " " +
                       print_expr(b->bl->er, subst) + " " + cmp_text(b->br->op) + " " +
                       print_expr(b->br->er, subst);
            }
            return print_bexpr(b->bl, subst, true) + " && " +
                   print_bexpr(b->br, subst, true);
        }
        case BExpr::Kind::Or: {
            std::string s =
                print_bexpr(b->bl, subst) + " || " + print_bexpr(b->br, subst);
            return parens_or ? "(" + s + ")" : s;
        }
        case BExpr::Kind::Not: return "!(" + print_bexpr(b->bl, subst) + ")";
        case BExpr::Kind::Const: return b->value ? "true" : "false";
        case BExpr::Kind::Star: return "*";
    }
    return "?";
}

inline std::string print_dist(const SamplingExpr& d,
                              const std::map<std::string, std::string>& subst) {
    auto pe = [&](const ExprPtr& e) { return print_expr(e, subst); };
    switch (d.kind) {
        case SamplingExpr::Kind::Bernoulli: return "Bernoulli(" + pe(d.e1) + ")";
        case SamplingExpr::Kind::Uniform:
            return "Uniform(" + d.lo.to_string() + ", " + d.hi.to_string() + ")";
        case SamplingExpr::Kind::Binomial:
            return "Binomial(" + pe(d.e1) + ", " + pe(d.e2) + ")";
        case SamplingExpr::Kind::Hypergeometric:
            return "Hypergeometric(" + pe(d.e1) + ", " + pe(d.e2) + ", " + pe(d.e3) + ")";
        case SamplingExpr::Kind::DiscreteTable: {
            std::string s = "Discrete(";
            bool first = true;
            for (auto& [p, v] : d.table) {
                if (!first) s += ", ";
                first = false;
                s += "(" + pe(p) + ", " + pe(v) + ")";
            }
            return s + ")";
        }
    }
    return "?";
}

struct Printer {
    std::ostringstream out;
    int indent = 0;

    void line_start() {
        for (int i = 0; i < indent; ++i) out << "  ";
    }

    bool is_skip(const CommandPtr& c) const {
        return !c || c->kind == Command::Kind::Skip;
    }

    void block(const CommandPtr& c) {
        out << "{";
        if (is_skip(c)) {
            out << " }";
            return;
        }
        out << "\n";
        ++indent;
        stmts(c, true);
        --indent;
        out << "\n";
        line_start();
        out << "}";
    }

    // prints a statement sequence; `fresh_line` means we are at line start
    void stmts(const CommandPtr& c, bool fresh_line) {
        if (c->kind == Command::Kind::Seq) {
            stmts(c->c1, fresh_line);
            out << ";\n";
            stmts(c->c2, true);
            return;
        }
        if (c->kind == Command::Kind::Local) {
            local(c, fresh_line);
            return;
        }
        if (fresh_line) line_start();
        stmt(c);
    }

    void local(const CommandPtr& c, bool fresh_line) {
        // re-sugared forms introduced by the parser
        if (c->sugar == 1) {  // if (Bernoulli(p)) {..} else {..}
            auto seq = c->c1;
            auto sample = seq->c1;
            auto iff = seq->c2;
            if (fresh_line) line_start();
            out << "if (" << print_dist(sample->dist, {}) << ") ";
            block(iff->c1);
            if (!is_skip(iff->c2)) {
                out << " else ";
                block(iff->c2);
            }
            return;
        }
        if (c->sugar == 2 || c->sugar == 3) {  // hoisted draw in assignment/return
            auto seq = c->c1;
            auto draw = seq->c1;
            auto tail = seq->c2;
            std::string drawn =
                draw->kind == Command::Kind::Sample
                    ? print_dist(draw->dist, {})
                    : draw->proc + "(" + args_text(draw->args) + ")";
            std::map<std::string, std::string> subst{{c->var, drawn}};
            if (fresh_line) line_start();
            if (c->sugar == 3) {
                out << "return " << print_expr(tail->expr, subst);
            } else {
                out << tail->var << " ~ "
                    << print_expr(tail->dist.table[0].second, subst);
            }
            return;
        }
        if (fresh_line) line_start();
        out << "var " << c->var;
        if (!c->default_init) out << " := " << print_expr(c->expr, {});
        // rejoin locals that came from one multi-variable declaration
        CommandPtr rest = c->c1;
        while (c->var_group != 0 && rest && rest->kind == Command::Kind::Local &&
               rest->var_group == c->var_group) {
            out << ", " << rest->var;
            if (!rest->default_init) out << " := " << print_expr(rest->expr, {});
            rest = rest->c1;
        }
        if (!is_skip(rest)) {
            out << ";\n";
            stmts(rest, true);
        }
    }

    std::string args_text(const std::vector<ExprPtr>& args) {
        std::string s;
        for (size_t i = 0; i < args.size(); ++i) {
            if (i) s += ", ";
            s += print_expr(args[i], {});
        }
        return s;
    }

    void stmt(const CommandPtr& c) {
        switch (c->kind) {
            case Command::Kind::Skip: out << "skip"; break;
            case Command::Kind::Sample:
                if (c->dist.is_dirac()) {
                    out << c->var << " := "
                        << print_expr(c->dist.table[0].second, {});
                } else {
                    out << c->var << " ~ " << print_dist(c->dist, {});
                }
                break;
            case Command::Kind::Call:
                out << c->var << " ~ " << c->proc << "(" << args_text(c->args) << ")";
                break;
            case Command::Kind::Ret:
                out << "return " << print_expr(c->expr, {});
                break;
            case Command::Kind::If:
                out << "if (" << print_bexpr(c->guard, {}) << ") ";
                block(c->c1);
                if (!is_skip(c->c2)) {
                    out << " else ";
                    block(c->c2);
                }
                break;
            case Command::Kind::While:
                out << "while (" << print_bexpr(c->guard, {}) << ") ";
                block(c->c1);
                break;
            case Command::Kind::NonDet:
                out << "if (*) ";
                block(c->c1);
                if (!is_skip(c->c2)) {
                    out << " else ";
                    block(c->c2);
                }
                break;
            case Command::Kind::Local:
            case Command::Kind::Seq:
                local(c, false);  // handled above; defensive
                break;
        }
    }
};

}  // namespace detail_pp

inline std::string pretty_print(const Program& p) {
    detail_pp::Printer pr;
    if (!p.globals.empty()) {
        pr.out << "global ";
        bool first = true;
        for (auto& g : p.globals) {
            if (!first) pr.out << ", ";
            first = false;
            pr.out << g;
        }
        pr.out << ";\n\n";
    }
    bool first = true;
    for (auto& d : p.decls) {
        if (!first) pr.out << "\n";
        first = false;
        pr.out << "def " << d.name << "(";
        for (size_t i = 0; i < d.params.size(); ++i) {
            if (i) pr.out << ", ";
            pr.out << d.params[i];
        }
        pr.out << "):\n";
        pr.indent = 1;
        pr.stmts(d.body, true);
        pr.indent = 0;
        pr.out << "\n";
    }
    return pr.out.str();
}

}  // namespace peval::frontend
