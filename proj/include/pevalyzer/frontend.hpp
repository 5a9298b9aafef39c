// SPDX-License-Identifier: Apache-2.0
//
// Lexer and recursive-descent parser for .pw files, plus the desugarings
// that keep the core AST small:
//
//   x := e                      sampling from the Dirac distribution of e
//   x ~ e  (one embedded draw)  hoisted through a fresh temporary
//   if (Bernoulli(p)) C else D  fresh temporary + integer test
//   if (*) C else D             demonic choice
//   return e (embedded call)    hoisted through a fresh temporary

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ast.hpp"

namespace peval::frontend {

struct Token {
    enum class Kind { Ident, Int, Punct, End };
    Kind kind;
    std::string text;
    SourceLoc loc;
};

inline bool ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

inline std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto loc = [&]() { return SourceLoc{line, col}; };
    auto advance = [&](size_t n) {
        for (size_t k = 0; k < n; ++k) {
            if (src[i + k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        i += n;
    };
    while (i < src.size()) {
        char c = src[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        SourceLoc l = loc();
        if (ident_start(c)) {
            size_t j = i;
            while (j < src.size() && ident_char(src[j])) ++j;
            std::string text = src.substr(i, j - i);
            if (text.find('$') != std::string::npos)
                throw FrontendError({"'$' is reserved in identifiers", l});
            out.push_back({Token::Kind::Ident, text, l});
            advance(j - i);
            continue;
        }
        if (c >= '0' && c <= '9') {
            size_t j = i;
            while (j < src.size() && src[j] >= '0' && src[j] <= '9') ++j;
            out.push_back({Token::Kind::Int, src.substr(i, j - i), l});
            advance(j - i);
            continue;
        }
        static const char* puncts[] = {":=", "<=", ">=", "==", "!=", "&&", "||",
                                       "~",  "+",  "-",  "*",  "/",  "(",  ")",
                                       "{",  "}",  "[",  "]",  ";",  ",",  "<",
                                       ">",  "=",  "!",  ":"};
        bool matched = false;
        for (const char* p : puncts) {
            size_t n = std::char_traits<char>::length(p);
            if (src.compare(i, n, p) == 0) {
                out.push_back({Token::Kind::Punct, p, l});
                advance(n);
                matched = true;
                break;
            }
        }
        if (!matched)
            throw FrontendError({std::string("unexpected character '") + c + "'", l});
    }
    out.push_back({Token::Kind::End, "", loc()});
    return out;
}

namespace detail {

// Parser-internal expression that may still contain draws and calls.
struct PExpr {
    enum class K { Var, Const, Add, Sub, Mul, Div, Neg, Dist, ProcCall };
    K k;
    std::string name;  // Var / ProcCall
    Rat val;
    std::shared_ptr<PExpr> a, b;
    std::shared_ptr<SamplingExpr> dist;
    std::vector<ExprPtr> callargs;
    SourceLoc loc;
};
using PExprPtr = std::shared_ptr<PExpr>;

inline int count_draws(const PExprPtr& e) {
    if (!e) return 0;
    if (e->k == PExpr::K::Dist || e->k == PExpr::K::ProcCall) return 1;
    return count_draws(e->a) + count_draws(e->b);
}

// Convert a draw-free PExpr to a pure Expr.
inline ExprPtr purify(const PExprPtr& e) {
    switch (e->k) {
        case PExpr::K::Var: return Expr::mkvar(e->name, e->loc);
        case PExpr::K::Const: return Expr::mkconst(e->val, e->loc);
        case PExpr::K::Neg:
            return Expr::mk(Expr::Kind::Neg, purify(e->a), nullptr, e->loc);
        case PExpr::K::Add:
            return Expr::mk(Expr::Kind::Add, purify(e->a), purify(e->b), e->loc);
        case PExpr::K::Sub:
            return Expr::mk(Expr::Kind::Sub, purify(e->a), purify(e->b), e->loc);
        case PExpr::K::Mul:
            return Expr::mk(Expr::Kind::Mul, purify(e->a), purify(e->b), e->loc);
        case PExpr::K::Div:
            return Expr::mk(Expr::Kind::Div, purify(e->a), purify(e->b), e->loc);
        default:
            throw FrontendError({"sampling expression not allowed here", e->loc});
    }
}

// Replace the single draw subterm by a variable; returns the draw.
inline PExprPtr extract_draw(const PExprPtr& e, const std::string& tmp, ExprPtr& out) {
    if (e->k == PExpr::K::Dist || e->k == PExpr::K::ProcCall) {
        out = Expr::mkvar(tmp, e->loc);
        return e;
    }
    auto wrap = [&](Expr::Kind k) -> PExprPtr {
        ExprPtr ea, eb;
        PExprPtr draw;
        if (count_draws(e->a) > 0) {
            draw = extract_draw(e->a, tmp, ea);
            if (e->b) eb = purify(e->b);
        } else {
            ea = purify(e->a);
            draw = extract_draw(e->b, tmp, eb);
        }
        out = Expr::mk(k, ea, eb, e->loc);
        return draw;
    };
    switch (e->k) {
        case PExpr::K::Neg: return wrap(Expr::Kind::Neg);
        case PExpr::K::Add: return wrap(Expr::Kind::Add);
        case PExpr::K::Sub: return wrap(Expr::Kind::Sub);
        case PExpr::K::Mul: return wrap(Expr::Kind::Mul);
        case PExpr::K::Div: return wrap(Expr::Kind::Div);
        default: throw FrontendError({"internal: extract_draw", e->loc});
    }
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Program parse_program() {
        Program p;
        while (at_ident("global")) {
            next();
            do {
                p.globals.insert(expect_ident());
            } while (accept(","));
            accept(";");
        }
        while (!at_end()) {
            if (!at_ident("def")) throw err("expected 'def'");
            p.decls.push_back(parse_decl());
        }
        resolve(p);
        return p;
    }

private:
    std::vector<Token> toks_;
    size_t pos_ = 0;
    int tmp_counter_ = 0;
    int var_group_counter_ = 0;

    const Token& cur() const { return toks_[pos_]; }
    bool at_end() const { return cur().kind == Token::Kind::End; }
    bool at_ident(const std::string& s) const {
        return cur().kind == Token::Kind::Ident && cur().text == s;
    }
    bool at_punct(const std::string& s) const {
        return cur().kind == Token::Kind::Punct && cur().text == s;
    }
    void next() { ++pos_; }
    bool accept(const std::string& punct) {
        if (at_punct(punct)) {
            next();
            return true;
        }
        return false;
    }
    void expect(const std::string& punct) {
        if (!accept(punct)) throw err("expected '" + punct + "'");
    }
    std::string expect_ident() {
        if (cur().kind != Token::Kind::Ident) throw err("expected identifier");
        std::string s = cur().text;
        next();
        return s;
    }
    FrontendError err(const std::string& msg) const {
        std::string got = at_end() ? "end of input" : "'" + cur().text + "'";
        return FrontendError({msg + ", got " + got, cur().loc});
    }
    std::string fresh_tmp() { return "tmp_" + std::to_string(tmp_counter_++); }

    static bool is_keyword(const std::string& s) {
        static const std::set<std::string> kw = {"def",   "var",  "skip",  "return",
                                                 "if",    "else", "while", "global",
                                                 "true",  "false"};
        return kw.count(s) > 0;
    }
    static bool is_dist_name(const std::string& s) {
        return s == "Bernoulli" || s == "Uniform" || s == "Binomial" ||
               s == "Hypergeometric" || s == "Discrete";
    }

    ProcedureDecl parse_decl() {
        ProcedureDecl d;
        d.loc = cur().loc;
        next();  // def
        d.name = expect_ident();
        expect("(");
        if (!at_punct(")")) {
            do {
                d.params.push_back(expect_ident());
            } while (accept(","));
        }
        expect(")");
        expect(":");
        d.body = parse_stmt_seq(/*in_block=*/false);
        return d;
    }

    bool at_stmt_end(bool in_block) const {
        if (in_block) return at_punct("}");
        return at_end() || at_ident("def");
    }

    CommandPtr parse_stmt_seq(bool in_block) {
        accept(";");
        if (at_stmt_end(in_block)) return Command::make(Command::Kind::Skip);
        // A var-declaration scopes over the remainder of the sequence.
        if (at_ident("var")) {
            SourceLoc l = cur().loc;
            next();
            std::vector<std::pair<std::string, std::pair<ExprPtr, bool>>> decls;
            do {
                std::string name = expect_ident();
                if (accept(":=")) {
                    auto pe = parse_pexpr();
                    if (count_draws(pe) > 0)
                        throw FrontendError({"sampling not allowed in 'var' initializer", l});
                    decls.push_back({name, {purify(pe), false}});
                } else {
                    decls.push_back({name, {Expr::mkconst(Rat(0), l), true}});
                }
            } while (accept(","));
            bool more = accept(";");
            CommandPtr rest = (more || at_stmt_end(in_block))
                                  ? parse_stmt_seq(in_block)
                                  : throw err("expected ';' or end of block");
            int group = decls.size() > 1 ? ++var_group_counter_ : 0;
            for (size_t i = decls.size(); i-- > 0;) {
                auto local = Command::make(Command::Kind::Local);
                local->var = decls[i].first;
                local->expr = decls[i].second.first;
                local->default_init = decls[i].second.second;
                local->var_group = group;
                local->c1 = rest;
                local->loc = l;
                rest = local;
            }
            return rest;
        }
        CommandPtr first = parse_stmt();
        if (accept(";")) {
            if (at_stmt_end(in_block)) return first;
            CommandPtr rest = parse_stmt_seq(in_block);
            auto seq = Command::make(Command::Kind::Seq);
            seq->c1 = first;
            seq->c2 = rest;
            return seq;
        }
        if (!at_stmt_end(in_block)) throw err("expected ';' or end of block");
        return first;
    }

    CommandPtr parse_block() {
        expect("{");
        CommandPtr c = parse_stmt_seq(/*in_block=*/true);
        expect("}");
        return c;
    }

    CommandPtr parse_stmt() {
        SourceLoc l = cur().loc;
        if (at_ident("skip")) {
            next();
            auto c = Command::make(Command::Kind::Skip);
            c->loc = l;
            return c;
        }
        if (at_ident("return")) {
            next();
            auto pe = parse_pexpr();
            int draws = count_draws(pe);
            if (draws == 0) {
                auto c = Command::make(Command::Kind::Ret);
                c->expr = purify(pe);
                c->loc = l;
                return c;
            }
            if (draws > 1) throw FrontendError({"at most one draw per statement", l});
            std::string tmp = fresh_tmp();
            ExprPtr rewritten;
            PExprPtr draw = extract_draw(pe, tmp, rewritten);
            auto ret = Command::make(Command::Kind::Ret);
            ret->expr = rewritten;
            ret->loc = l;
            return hoist(tmp, draw, ret, /*sugar=*/3, l);
        }
        if (at_ident("if")) return parse_if();
        if (at_ident("while")) {
            next();
            expect("(");
            BExprPtr g = parse_bexpr();
            expect(")");
            auto w = Command::make(Command::Kind::While);
            w->guard = g;
            w->c1 = parse_block();
            w->loc = l;
            return w;
        }
        if (cur().kind == Token::Kind::Ident && !is_keyword(cur().text)) {
            std::string target = expect_ident();
            bool sampled = false;
            if (accept(":=")) {
                sampled = false;
            } else if (accept("~")) {
                sampled = true;
            } else {
                throw err("expected ':=' or '~'");
            }
            (void)sampled;
            auto pe = parse_pexpr();
            return assemble_assignment(target, pe, l);
        }
        throw err("expected statement");
    }

    CommandPtr assemble_assignment(const std::string& target, const PExprPtr& pe,
                                   SourceLoc l) {
        int draws = count_draws(pe);
        if (draws == 0) {
            auto c = Command::make(Command::Kind::Sample);
            c->var = target;
            c->dist = SamplingExpr::dirac(purify(pe));
            c->loc = l;
            return c;
        }
        if (draws > 1) throw FrontendError({"at most one draw per statement", l});
        // the whole right-hand side is a single draw: no temporary needed
        if (pe->k == PExpr::K::Dist) {
            auto c = Command::make(Command::Kind::Sample);
            c->var = target;
            c->dist = *pe->dist;
            c->loc = l;
            return c;
        }
        if (pe->k == PExpr::K::ProcCall) {
            auto c = Command::make(Command::Kind::Call);
            c->var = target;
            c->proc = pe->name;
            c->args = pe->callargs;
            c->loc = l;
            return c;
        }
        std::string tmp = fresh_tmp();
        ExprPtr rewritten;
        PExprPtr draw = extract_draw(pe, tmp, rewritten);
        auto assign = Command::make(Command::Kind::Sample);
        assign->var = target;
        assign->dist = SamplingExpr::dirac(rewritten);
        assign->loc = l;
        return hoist(tmp, draw, assign, /*sugar=*/2, l);
    }

    // local tmp := 0; tmp <- draw; tail
    CommandPtr hoist(const std::string& tmp, const PExprPtr& draw, CommandPtr tail,
                     int sugar, SourceLoc l) {
        CommandPtr drawcmd;
        if (draw->k == PExpr::K::Dist) {
            auto c = Command::make(Command::Kind::Sample);
            c->var = tmp;
            c->dist = *draw->dist;
            c->loc = draw->loc;
            drawcmd = c;
        } else {
            auto c = Command::make(Command::Kind::Call);
            c->var = tmp;
            c->proc = draw->name;
            c->args = draw->callargs;
            c->loc = draw->loc;
            drawcmd = c;
        }
        auto seq = Command::make(Command::Kind::Seq);
        seq->c1 = drawcmd;
        seq->c2 = std::move(tail);
        auto local = Command::make(Command::Kind::Local);
        local->var = tmp;
        local->expr = Expr::mkconst(Rat(0), l);
        local->c1 = seq;
        local->sugar = sugar;
        local->loc = l;
        return local;
    }

    CommandPtr parse_if() {
        SourceLoc l = cur().loc;
        next();  // if
        expect("(");
        if (at_punct("*")) {
            next();
            expect(")");
            CommandPtr then = parse_block();
            CommandPtr els = parse_else();
            auto nd = Command::make(Command::Kind::NonDet);
            nd->c1 = then;
            nd->c2 = els;
            nd->loc = l;
            return nd;
        }
        // probabilistic guard sugar: the guard is exactly one Bernoulli draw
        {
            size_t save = pos_;
            if (cur().kind == Token::Kind::Ident && is_dist_name(cur().text)) {
                auto pe = parse_pexpr();
                if (at_punct(")") && pe->k == PExpr::K::Dist &&
                    pe->dist->kind == SamplingExpr::Kind::Bernoulli) {
                    next();
                    CommandPtr then = parse_block();
                    CommandPtr els = parse_else();
                    std::string tmp = fresh_tmp();
                    auto iff = Command::make(Command::Kind::If);
                    iff->guard = BExpr::mkcmp(CmpOp::Eq, Expr::mkvar(tmp, l),
                                              Expr::mkconst(Rat(1), l), l);
                    iff->c1 = then;
                    iff->c2 = els;
                    iff->loc = l;
                    return hoist(tmp, pe, iff, /*sugar=*/1, l);
                }
                pos_ = save;
            }
        }
        BExprPtr g = parse_bexpr();
        expect(")");
        CommandPtr then = parse_block();
        CommandPtr els = parse_else();
        auto iff = Command::make(Command::Kind::If);
        iff->guard = g;
        iff->c1 = then;
        iff->c2 = els;
        iff->loc = l;
        return iff;
    }

    CommandPtr parse_else() {
        if (at_ident("else")) {
            next();
            if (at_ident("if")) return parse_if();
            return parse_block();
        }
        return Command::make(Command::Kind::Skip);
    }

    // ---- boolean expressions ----

    BExprPtr parse_bexpr() {
        BExprPtr l = parse_band();
        while (at_punct("||") || at_ident("or")) {
            next();
            l = BExpr::mkor(l, parse_band());
        }
        return l;
    }
    BExprPtr parse_band() {
        BExprPtr l = parse_bfactor();
        while (at_punct("&&") || at_ident("and")) {
            next();
            l = BExpr::mkand(l, parse_bfactor());
        }
        return l;
    }
    BExprPtr parse_bfactor() {
        if (at_punct("!")) {
            next();
            return BExpr::mknot(parse_bfactor());
        }
        if (at_ident("true")) {
            next();
            return BExpr::mkconst(true);
        }
        if (at_ident("false")) {
            next();
            return BExpr::mkconst(false);
        }
        if (at_punct("(")) {
            // try a parenthesised boolean expression, fall back to arithmetic
            size_t save = pos_;
            next();
            try {
                BExprPtr inner = parse_bexpr();
                if (accept(")") && !at_cmp_op() && !at_arith_continuation())
                    return inner;
            } catch (const FrontendError&) {
            }
            pos_ = save;
        }
        return parse_cmp_chain();
    }
    bool at_cmp_op() const {
        return at_punct("<") || at_punct("<=") || at_punct(">") || at_punct(">=") ||
               at_punct("=") || at_punct("==") || at_punct("!=");
    }
    bool at_arith_continuation() const {
        return at_punct("+") || at_punct("-") || at_punct("*") || at_punct("/");
    }
    std::optional<CmpOp> accept_cmp() {
        struct {
            const char* t;
            CmpOp op;
        } table[] = {{"<=", CmpOp::Le}, {">=", CmpOp::Ge}, {"==", CmpOp::Eq},
                     {"!=", CmpOp::Ne}, {"<", CmpOp::Lt},  {">", CmpOp::Gt},
                     {"=", CmpOp::Eq}};
        for (auto& e : table) {
            if (at_punct(e.t)) {
                next();
                return e.op;
            }
        }
        return std::nullopt;
    }
    // Chained comparisons conjoin: 0 < i <= 5.
    BExprPtr parse_cmp_chain() {
        SourceLoc l = cur().loc;
        ExprPtr first = purify_arith(parse_pexpr());
        auto op = accept_cmp();
        if (!op) throw err("expected comparison");
        ExprPtr second = purify_arith(parse_pexpr());
        BExprPtr acc = BExpr::mkcmp(*op, first, second, l);
        ExprPtr prev = second;
        while (auto op2 = accept_cmp()) {
            ExprPtr nexte = purify_arith(parse_pexpr());
            acc = BExpr::mkand(acc, BExpr::mkcmp(*op2, prev, nexte, l));
            prev = nexte;
        }
        return acc;
    }
    ExprPtr purify_arith(const PExprPtr& pe) {
        if (count_draws(pe) > 0)
            throw FrontendError({"sampling not allowed inside a comparison", pe->loc});
        return purify(pe);
    }

    // ---- arithmetic expressions ----

    PExprPtr parse_pexpr() { return parse_additive(); }
    PExprPtr parse_additive() {
        PExprPtr l = parse_multiplicative();
        while (at_punct("+") || at_punct("-")) {
            auto k = at_punct("+") ? PExpr::K::Add : PExpr::K::Sub;
            SourceLoc lc = cur().loc;
            next();
            auto node = std::make_shared<PExpr>();
            node->k = k;
            node->a = l;
            node->b = parse_multiplicative();
            node->loc = lc;
            l = node;
        }
        return l;
    }
    PExprPtr parse_multiplicative() {
        PExprPtr l = parse_unary();
        while (at_punct("*") || at_punct("/")) {
            auto k = at_punct("*") ? PExpr::K::Mul : PExpr::K::Div;
            SourceLoc lc = cur().loc;
            next();
            auto node = std::make_shared<PExpr>();
            node->k = k;
            node->a = l;
            node->b = parse_unary();
            node->loc = lc;
            l = node;
        }
        return l;
    }
    PExprPtr parse_unary() {
        if (at_punct("-")) {
            SourceLoc lc = cur().loc;
            next();
            auto node = std::make_shared<PExpr>();
            node->k = PExpr::K::Neg;
            node->a = parse_unary();
            node->loc = lc;
            return node;
        }
        return parse_primary();
    }
    PExprPtr parse_primary() {
        SourceLoc l = cur().loc;
        if (accept("(")) {
            PExprPtr e = parse_pexpr();
            expect(")");
            return e;
        }
        if (cur().kind == Token::Kind::Int) {
            auto node = std::make_shared<PExpr>();
            node->k = PExpr::K::Const;
            node->val = Rat::from_string(cur().text);
            node->loc = l;
            next();
            return node;
        }
        if (cur().kind == Token::Kind::Ident && !is_keyword(cur().text)) {
            std::string name = expect_ident();
            if (at_punct("(")) {
                if (is_dist_name(name)) return parse_dist(name, l);
                // procedure call
                next();
                std::vector<ExprPtr> args;
                if (!at_punct(")")) {
                    do {
                        args.push_back(purify_arith(parse_pexpr()));
                    } while (accept(","));
                }
                expect(")");
                auto node = std::make_shared<PExpr>();
                node->k = PExpr::K::ProcCall;
                node->name = name;
                node->callargs = std::move(args);
                node->loc = l;
                return node;
            }
            auto node = std::make_shared<PExpr>();
            node->k = PExpr::K::Var;
            node->name = name;
            node->loc = l;
            return node;
        }
        throw err("expected expression");
    }

    PExprPtr parse_dist(const std::string& name, SourceLoc l) {
        expect("(");
        auto d = std::make_shared<SamplingExpr>();
        d->loc = l;
        auto arg = [&]() { return purify_arith(parse_pexpr()); };
        if (name == "Bernoulli") {
            d->kind = SamplingExpr::Kind::Bernoulli;
            d->e1 = arg();
        } else if (name == "Uniform") {
            d->kind = SamplingExpr::Kind::Uniform;
            ExprPtr lo = arg();
            expect(",");
            ExprPtr hi = arg();
            auto cval = [&](const ExprPtr& e) -> Rat {
                if (e->kind == Expr::Kind::Const) return e->value;
                if (e->kind == Expr::Kind::Neg && e->lhs->kind == Expr::Kind::Const)
                    return -e->lhs->value;
                throw FrontendError({"Uniform bounds must be integer constants", l});
            };
            d->lo = cval(lo);
            d->hi = cval(hi);
        } else if (name == "Binomial") {
            d->kind = SamplingExpr::Kind::Binomial;
            d->e1 = arg();
            expect(",");
            d->e2 = arg();
        } else if (name == "Hypergeometric") {
            d->kind = SamplingExpr::Kind::Hypergeometric;
            d->e1 = arg();
            expect(",");
            d->e2 = arg();
            expect(",");
            d->e3 = arg();
        } else {  // Discrete((p, v), ...)
            d->kind = SamplingExpr::Kind::DiscreteTable;
            do {
                expect("(");
                ExprPtr p = arg();
                expect(",");
                ExprPtr v = arg();
                expect(")");
                d->table.push_back({p, v});
            } while (accept(","));
        }
        expect(")");
        auto node = std::make_shared<PExpr>();
        node->k = PExpr::K::Dist;
        node->dist = d;
        node->loc = l;
        return node;
    }

    // ---- name resolution ----

    void resolve(const Program& p) {
        std::map<std::string, size_t> procs;
        for (auto& d : p.decls) {
            if (procs.count(d.name))
                throw FrontendError({"duplicate procedure '" + d.name + "'", d.loc});
            procs[d.name] = d.arity();
        }
        for (auto& d : p.decls) {
            std::set<std::string> scope = p.globals;
            for (auto& prm : d.params) scope.insert(prm);
            resolve_cmd(d.body, scope, procs);
        }
    }
    void resolve_cmd(const CommandPtr& c, std::set<std::string> scope,
                     const std::map<std::string, size_t>& procs) {
        if (!c) return;
        auto check_expr = [&](const ExprPtr& e) { resolve_expr(e, scope); };
        switch (c->kind) {
            case Command::Kind::Skip: break;
            case Command::Kind::Sample: {
                if (!scope.count(c->var))
                    throw FrontendError({"unbound variable '" + c->var + "'", c->loc});
                resolve_dist(c->dist, scope);
                break;
            }
            case Command::Kind::Call: {
                if (!scope.count(c->var))
                    throw FrontendError({"unbound variable '" + c->var + "'", c->loc});
                auto it = procs.find(c->proc);
                if (it == procs.end())
                    throw FrontendError({"call to undefined procedure '" + c->proc + "'", c->loc});
                if (it->second != c->args.size())
                    throw FrontendError(
                        {"arity mismatch: '" + c->proc + "' expects " +
                             std::to_string(it->second) + " argument(s), got " +
                             std::to_string(c->args.size()),
                         c->loc});
                for (auto& a : c->args) check_expr(a);
                break;
            }
            case Command::Kind::Ret: check_expr(c->expr); break;
            case Command::Kind::Local: {
                check_expr(c->expr);
                scope.insert(c->var);
                resolve_cmd(c->c1, scope, procs);
                break;
            }
            case Command::Kind::Seq:
                resolve_cmd(c->c1, scope, procs);
                resolve_cmd(c->c2, scope, procs);
                break;
            case Command::Kind::If:
                resolve_bexpr(c->guard, scope);
                resolve_cmd(c->c1, scope, procs);
                resolve_cmd(c->c2, scope, procs);
                break;
            case Command::Kind::While:
                resolve_bexpr(c->guard, scope);
                resolve_cmd(c->c1, scope, procs);
                break;
            case Command::Kind::NonDet:
                resolve_cmd(c->c1, scope, procs);
                resolve_cmd(c->c2, scope, procs);
                break;
        }
    }
    void resolve_expr(const ExprPtr& e, const std::set<std::string>& scope) {
        if (!e) return;
        if (e->kind == Expr::Kind::Var && !scope.count(e->var))
            throw FrontendError({"unbound variable '" + e->var + "'", e->loc});
        resolve_expr(e->lhs, scope);
        resolve_expr(e->rhs, scope);
    }
    void resolve_bexpr(const BExprPtr& b, const std::set<std::string>& scope) {
        if (!b) return;
        resolve_expr(b->el, scope);
        resolve_expr(b->er, scope);
        resolve_bexpr(b->bl, scope);
        resolve_bexpr(b->br, scope);
    }
    void resolve_dist(const SamplingExpr& d, const std::set<std::string>& scope) {
        resolve_expr(d.e1, scope);
        resolve_expr(d.e2, scope);
        resolve_expr(d.e3, scope);
        for (auto& [p, v] : d.table) {
            resolve_expr(p, scope);
            resolve_expr(v, scope);
        }
    }
};

}  // namespace detail

// Parse UTF-8 source text into a core Program.  Lexical, syntactic, scoping
// and arity errors are thrown as FrontendError with a source location.
inline Program parse_program(const std::string& source) {
    detail::Parser p(lex(source));
    return p.parse_program();
}

}  // namespace peval::frontend
