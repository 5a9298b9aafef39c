// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "pevalyzer/expected.hpp"
#include "pevalyzer/frontend.hpp"
#include "pevalyzer/oracle.hpp"
#include "pevalyzer/term.hpp"

using namespace peval;
using namespace peval::terms;

namespace {

ExprPtr E(const std::string& src) {
    // parse a lone expression by wrapping it in a return statement
    std::set<std::string> ids;
    for (auto& t : frontend::lex(src))
        if (t.kind == frontend::Token::Kind::Ident) ids.insert(t.text);
    std::string params;
    for (auto& id : ids) params += (params.empty() ? "" : ", ") + id;
    Program p = frontend::parse_program("def w(" + params + "): return " + src);
    return p.decls[0].body->expr;
}

BExprPtr B(const std::string& src) {
    std::set<std::string> ids;
    for (auto& t : frontend::lex(src))
        if (t.kind == frontend::Token::Kind::Ident && t.text != "true" && t.text != "false")
            ids.insert(t.text);
    std::string params;
    for (auto& id : ids) params += (params.empty() ? "" : ", ") + id;
    Program p = frontend::parse_program("def w(" + params + "): if (" + src +
                                        ") { skip }; return 0");
    return p.decls[0].body->c1->guard;
}

Term abs_term(const std::string& e) { return Term::of_norm(Norm::abs(expr_to_poly(E(e)))); }

// --- random generators for the property suites ---

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(uint64_t seed) : rng(seed) {}
    long long small_int() { return static_cast<long long>(rng() % 21) - 10; }
    Rat coeff() { return Rat(static_cast<long long>(rng() % 9) - 4, 1 + rng() % 4); }
    LinExpr lin(const std::vector<std::string>& vars) {
        LinExpr le;
        le.constant = coeff();
        for (auto& v : vars)
            if (rng() % 2) le.add(v, coeff());
        return le;
    }
    Atom atom(const std::vector<std::string>& vars) {
        Atom a;
        a.lin = lin(vars);
        switch (rng() % 4) {
            case 0: a.op = Atom::Op::Ge; break;
            case 1: a.op = Atom::Op::Gt; break;
            case 2: a.op = Atom::Op::Eq; break;
            default: a.op = Atom::Op::Ne; break;
        }
        return a;
    }
    Guard guard(const std::vector<std::string>& vars, int max_atoms = 2) {
        Guard g;
        int n = rng() % (max_atoms + 1);
        for (int i = 0; i < n; ++i) g.push(atom(vars));
        return g;
    }
    Poly body(const std::vector<std::string>& vars) {
        Poly p = Poly::constant(coeff());
        for (auto& v : vars)
            if (rng() % 2) p.add_term(Monomial::var(v), coeff());
        if (rng() % 3 == 0 && vars.size() >= 2)
            p.add_term(Monomial::mul(Monomial::var(vars[0]), Monomial::var(vars[1])), coeff());
        return p;
    }
    Term term(const std::vector<std::string>& vars, int max_summands = 3) {
        Term t;
        int n = 1 + rng() % max_summands;
        for (int i = 0; i < n; ++i) t.push(RatFn(coeff()), Norm{guard(vars), body(vars)});
        t.canonicalize();
        return t;
    }
    std::map<std::string, Rat> memory(const std::vector<std::string>& vars) {
        std::map<std::string, Rat> m;
        for (auto& v : vars) m[v] = Rat(small_int());
        return m;
    }
};

}  // namespace

TEST_CASE("guard_mul distributes the guard and simplifies constants") {
    // [n > 0] * <n>  ==  [n > 0 && n >= 0] * n
    Term t = guard_mul(B("n > 0"), abs_term("n"));
    REQUIRE(t.summands.size() == 1);
    CHECK(t.summands[0].norm.guard.atoms.size() == 2);
    // [true] * t  ==  t, dropped conjunct
    Term u = abs_term("n");
    CHECK(guard_mul(B("true"), u).to_string() == u.to_string());
    // [false] * t evaluates to zero everywhere
    CHECK(guard_mul(B("false"), u).is_zero());
}

TEST_CASE("guard_mul law on 1000 random cases") {
    Gen gen(2024);
    std::vector<std::string> vars{"x", "y"};
    for (int i = 0; i < 1000; ++i) {
        Guard g = gen.guard(vars);
        Term t = gen.term(vars);
        Term gt = guard_mul_guard(g, t);
        auto m = gen.memory(vars);
        Rat lhs = eval_term(gt, m);
        Rat rhs = (g.eval(m) ? Rat(1) : Rat(0)) * eval_term(t, m);
        CHECK(lhs == rhs);
    }
}

TEST_CASE("substitution: the balls continuation arises from <b>[b -> b+1]") {
    Term t = add(abs_term("b"), Term::logical("l$0"));
    Term r = substitute(t, {{"b", expr_to_poly(E("b + 1"))}});
    // r == <b+1> + l
    Term want = add(abs_term("b + 1"), Term::logical("l$0"));
    CHECK(r.to_string() == want.to_string());
    // identity substitution
    CHECK(substitute(t, {{"b", Poly::var("b")}}).to_string() == t.to_string());
}

TEST_CASE("logical substitution: (lr + l)[l -> d0 + d1*l]") {
    Term t = add(Term::of_norm(Norm::abs(Poly::var(sym::logical_ret()))),
                 Term::logical("l$0"));
    Term tau;
    tau.push(RatFn(Poly::var("d$0")), Norm::one());
    tau.push(RatFn(Poly::var("d$1")), Norm{Guard::truth(), Poly::var("l$0")});
    tau.canonicalize();
    Term r = substitute_logical(t, "l$0", tau);
    std::map<std::string, Rat> env{{"lr$", Rat(2)}, {"l$0", Rat(3)},
                                   {"d$0", Rat(1, 5)}, {"d$1", Rat(1)}};
    CHECK(eval_term(r, env) == Rat(2) + Rat(1, 5) + Rat(3));
    // substituting into a composite body is rejected
    Term bad = Term::of_norm(Norm{Guard::truth(),
                                  Poly::var("l$0") + Poly::var(sym::logical_ret())});
    CHECK_THROWS_AS(substitute_logical(bad, "l$0", tau), UnsupportedError);
}

TEST_CASE("add and scale are pointwise") {
    Term t = abs_term("x");
    CHECK(add(t, Term::zero()).to_string() == t.to_string());
    CHECK(scale(Rat(0), t).is_zero());
    Term s = add(scale(Rat(1, 5), abs_term("b + 1")), scale(Rat(4, 5), abs_term("b")));
    std::map<std::string, Rat> env{{"b", Rat(7)}};
    CHECK(eval_term(s, env) == Rat(1, 5) * Rat(8) + Rat(4, 5) * Rat(7));
}

TEST_CASE("canonicalization merges identical norms") {
    Term t;
    t.push(RatFn(Rat(1, 3)), Norm::abs(Poly::var("x")));
    t.push(RatFn(Rat(1, 6)), Norm::abs(Poly::var("x")));
    t.canonicalize();
    REQUIRE(t.summands.size() == 1);
    CHECK(t.summands[0].coeff.constant_value() == Rat(1, 2));
}

TEST_CASE("expected_term reproduces the balls continuation") {
    // E[c ~ Bernoulli(1/5)]([c = 1]*<b+1> + [c != 1]*<b>) = 1/5<b+1> + 4/5<b>
    Term t = add(guard_mul(B("c = 1"), abs_term("b + 1")),
                 guard_mul(B("c != 1"), abs_term("b")));
    SamplingExpr d;
    d.kind = SamplingExpr::Kind::Bernoulli;
    d.e1 = E("1/5");
    Term r = expected_term("c", d, t);
    Term want = add(scale(Rat(1, 5), abs_term("b + 1")), scale(Rat(4, 5), abs_term("b")));
    for (long long b = -3; b <= 6; ++b) {
        std::map<std::string, Rat> env{{"b", Rat(b)}};
        CHECK(eval_term(r, env) == eval_term(want, env));
    }
}

TEST_CASE("expected_term of <x> under Uniform(0,2) is the constant 1") {
    SamplingExpr d;
    d.kind = SamplingExpr::Kind::Uniform;
    d.lo = Rat(0);
    d.hi = Rat(2);
    Term r = expected_term("x", d, abs_term("x"));
    CHECK(eval_term(r, {}) == Rat(1));  // (0+1+2)/3
}

TEST_CASE("expected_term is the identity when the variable does not occur") {
    SamplingExpr d;
    d.kind = SamplingExpr::Kind::Bernoulli;
    d.e1 = E("p/(p + 1)");
    Term t = abs_term("y");
    CHECK(expected_term("x", d, t).to_string() == t.to_string());
}

namespace {

// independent brute-force oracle: sum over the support
Rat brute_force(const std::string& x, const std::vector<std::pair<Rat, Rat>>& support,
                const Term& t, const std::map<std::string, Rat>& env) {
    Rat total(0);
    for (auto& [p, v] : support) {
        Term ti = substitute(t, {{x, Poly::constant(v)}});
        total += p * eval_term(ti, env);
    }
    return total;
}

std::vector<std::pair<Rat, Rat>> dist_support(const SamplingExpr& d) {
    std::vector<std::pair<Rat, Rat>> s;
    auto cval = [](const ExprPtr& e) { return expr_to_poly(e).constant_value(); };
    switch (d.kind) {
        case SamplingExpr::Kind::Bernoulli: {
            Rat p = cval(d.e1);
            s = {{p, Rat(1)}, {Rat(1) - p, Rat(0)}};
            break;
        }
        case SamplingExpr::Kind::Uniform: {
            long long lo = d.lo.num().to_ll(), hi = d.hi.num().to_ll();
            for (long long v = lo; v <= hi; ++v) s.push_back({Rat(1, hi - lo + 1), Rat(v)});
            break;
        }
        case SamplingExpr::Kind::Binomial: {
            long long n = cval(d.e1).num().to_ll();
            Rat p = cval(d.e2);
            auto choose = [](long long a, long long b) {
                BigInt r(1);
                for (long long i = 0; i < b; ++i) r = r * BigInt(a - i) / BigInt(i + 1);
                return r;
            };
            for (long long k = 0; k <= n; ++k) {
                Rat pr(choose(n, k));
                for (int i = 0; i < k; ++i) pr *= p;
                for (long long i = k; i < n; ++i) pr *= Rat(1) - p;
                s.push_back({pr, Rat(k)});
            }
            break;
        }
        case SamplingExpr::Kind::Hypergeometric: {
            long long N = cval(d.e1).num().to_ll(), K = cval(d.e2).num().to_ll(),
                      n = cval(d.e3).num().to_ll();
            auto choose = [](long long a, long long b) {
                if (b < 0 || b > a) return BigInt(0);
                BigInt r(1);
                for (long long i = 0; i < b; ++i) r = r * BigInt(a - i) / BigInt(i + 1);
                return r;
            };
            BigInt total = choose(N, n);
            for (long long k = std::max(0ll, n + K - N); k <= std::min(n, K); ++k)
                s.push_back({Rat(choose(K, k) * choose(N - K, n - k), total), Rat(k)});
            break;
        }
        case SamplingExpr::Kind::DiscreteTable:
            for (auto& [pe, ve] : d.table)
                s.push_back({expr_to_poly(pe).constant_value(),
                             expr_to_poly(ve).constant_value()});
            break;
    }
    return s;
}

}  // namespace

TEST_CASE("expected_term equals brute-force enumeration exactly, 1000 random cases") {
    Gen gen(77);
    std::vector<std::string> vars{"x", "y"};
    for (int i = 0; i < 1000; ++i) {
        SamplingExpr d;
        switch (gen.rng() % 4) {
            case 0: {
                d.kind = SamplingExpr::Kind::Bernoulli;
                long long num = gen.rng() % 5;
                d.e1 = Expr::mkconst(Rat(num, 4));
                break;
            }
            case 1: {
                d.kind = SamplingExpr::Kind::Uniform;
                long long lo = static_cast<long long>(gen.rng() % 7) - 3;
                d.lo = Rat(lo);
                d.hi = Rat(lo + static_cast<long long>(gen.rng() % 4));
                break;
            }
            case 2: {
                d.kind = SamplingExpr::Kind::Binomial;
                d.e1 = Expr::mkconst(Rat(static_cast<long long>(gen.rng() % 6)));
                d.e2 = Expr::mkconst(Rat(static_cast<long long>(gen.rng() % 4), 3));
                break;
            }
            default: {
                d.kind = SamplingExpr::Kind::Hypergeometric;
                long long N = 1 + gen.rng() % 6;
                long long K = gen.rng() % (N + 1);
                long long n = gen.rng() % (N + 1);
                d.e1 = Expr::mkconst(Rat(N));
                d.e2 = Expr::mkconst(Rat(K));
                d.e3 = Expr::mkconst(Rat(n));
                break;
            }
        }
        Term t = gen.term(vars);
        Term r = expected_term("x", d, t);
        auto env = gen.memory(vars);
        env.erase("x");
        Rat direct = brute_force("x", dist_support(d), t, env);
        env["x"] = Rat(999);  // must be irrelevant in r
        CHECK(eval_term(r, env) == direct);
    }
}

TEST_CASE("expected_term is linear, 300 random cases") {
    Gen gen(99);
    std::vector<std::string> vars{"x", "y"};
    SamplingExpr d;
    d.kind = SamplingExpr::Kind::Uniform;
    d.lo = Rat(-1);
    d.hi = Rat(2);
    for (int i = 0; i < 300; ++i) {
        Term t1 = gen.term(vars), t2 = gen.term(vars);
        Rat a = gen.coeff(), b = gen.coeff();
        Term combined = expected_term("x", d, add(scale(a, t1), scale(b, t2)));
        Term split = add(scale(a, expected_term("x", d, t1)),
                         scale(b, expected_term("x", d, t2)));
        auto env = gen.memory(vars);
        CHECK(eval_term(combined, env) == eval_term(split, env));
    }
}

TEST_CASE("dynamic Binomial moments agree with enumeration at every point") {
    SamplingExpr dyn;
    dyn.kind = SamplingExpr::Kind::Binomial;
    dyn.e1 = E("n");
    dyn.e2 = E("1/3");
    // quadratic shape picks up the second-moment rule
    Term t;
    t.push(RatFn(Rat(1)), Norm{Guard::truth(), expr_to_poly(E("x * x + 2 * x + y"))});
    Term sym = expected_term("x", dyn, t);
    for (long long n = 0; n <= 6; ++n) {
        SamplingExpr cst = dyn;
        cst.e1 = Expr::mkconst(Rat(n));
        std::map<std::string, Rat> env{{"n", Rat(n)}, {"y", Rat(5)}};
        Rat direct = brute_force("x", dist_support(cst), t, env);
        CHECK(eval_term(sym, env) == direct);
    }
    // <x> under dynamic Binomial: the support is non-negative, so the guard drops
    Term linear = expected_term("x", dyn, abs_term("x"));
    std::map<std::string, Rat> env{{"n", Rat(5)}};
    CHECK(eval_term(linear, env) == Rat(5, 3));
}

TEST_CASE("unsupported dynamic expansion fails gracefully") {
    SamplingExpr dyn;
    dyn.kind = SamplingExpr::Kind::Binomial;
    dyn.e1 = E("n");
    dyn.e2 = E("1/2");
    // a guard on x cannot be resolved by moments
    Term t = guard_mul(B("x > y"), Term::constant(Rat(1)));
    CHECK_THROWS_AS(expected_term("x", dyn, t), UnsupportedError);
}

TEST_CASE("eval_term worked examples") {
    Term t = scale(Rat(1, 5), abs_term("n"));
    CHECK(eval_term(t, {{"n", Rat(10)}}) == Rat(2));
    CHECK(eval_term(abs_term("x"), {{"x", Rat(-3)}}) == Rat(0));
    Term kr = add(Term::of_norm(Norm::abs(Poly::var(sym::logical_ret()))),
                  Term::logical("l$0"));
    CHECK(eval_term(kr, {{"lr$", Rat(2)}, {"l$0", Rat(3)}}) == Rat(5));
    CHECK_THROWS_AS(eval_term(abs_term("x"), {}), EvalError);
}

TEST_CASE("norm non-negativity under guard, 1000 random abs-norms") {
    Gen gen(5);
    std::vector<std::string> vars{"x", "y", "z"};
    for (int i = 0; i < 1000; ++i) {
        Poly body = gen.lin(vars).to_poly();
        Term t = Term::of_norm(Norm::abs(body));
        auto env = gen.memory(vars);
        CHECK(eval_term(t, env) >= Rat(0));
    }
}

TEST_CASE("disjoint covers partition the truth of a boolean") {
    Gen gen(31);
    std::vector<std::string> vars{"x", "y"};
    auto bex = B("x > 0 && (y <= 2 || !(x = y)) || y > 4");
    auto pos = disjoint_cover(bex, true);
    auto neg = disjoint_cover(bex, false);
    for (int i = 0; i < 500; ++i) {
        auto env = gen.memory(vars);
        int hits = 0;
        for (auto& g : pos) hits += g.eval(env) ? 1 : 0;
        for (auto& g : neg) hits += g.eval(env) ? 1 : 0;
        CHECK(hits == 1);  // exactly one cover cell holds
        bool truth = oracle::eval_bexpr(bex, {{"x", env["x"].num().to_ll()},
                                              {"y", env["y"].num().to_ll()}});
        bool in_pos = false;
        for (auto& g : pos) in_pos |= g.eval(env);
        CHECK(in_pos == truth);
    }
}
