// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <random>
#include <sstream>

#include "pevalyzer/frontend.hpp"
#include "pevalyzer/normalize.hpp"
#include "pevalyzer/oracle.hpp"
#include "pevalyzer/solver.hpp"
#include "pevalyzer/transformer.hpp"

using namespace peval;
using namespace peval::transformer;

static Program load(const std::string& name) {
    std::ifstream f(std::string(PEVAL_SOURCE_DIR) + "/benchmarks/" + name);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return frontend::normalize(frontend::parse_program(os.str()));
}

static terms::Term abs_of(const std::string& v) {
    return terms::Term::of_norm(terms::Norm::abs(Poly::var(v)));
}

// evaluation equality on a random integer grid; unknown coefficients must be
// covered by `model`
static bool eval_equal(const terms::Term& a, const terms::Term& b,
                       const std::map<std::string, Rat>& model, uint64_t seed,
                       int points = 2000) {
    std::set<std::string> vars;
    for (auto& v : a.variables())
        if (!model.count(v)) vars.insert(v);
    for (auto& v : b.variables())
        if (!model.count(v)) vars.insert(v);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < points; ++i) {
        std::map<std::string, Rat> env = model;
        for (auto& v : vars) {
            long long x = static_cast<long long>(rng() % 41) - 20;
            if (sym::is_free_logical(v)) x = std::abs(x);
            env[v] = Rat(x);
        }
        if (terms::eval_term(a, env) != terms::eval_term(b, env)) return false;
    }
    return true;
}

TEST_CASE("skip is the identity transformer") {
    Program p = load("balls.pw");
    AnalysisState st(p);
    generate_constraints(st);
    auto skip = Command::make(Command::Kind::Skip);
    terms::Term t = abs_of("x");
    terms::Term s = st.tpl.at("balls").k;
    CHECK(et_command(skip, t, s, st, *p.find("balls")).to_string() == t.to_string());
}

TEST_CASE("return 0 against k = <lr> + l gives l") {
    Program p = load("balls.pw");
    AnalysisState st(p);
    generate_constraints(st);
    auto ret = Command::make(Command::Kind::Ret);
    ret->expr = Expr::mkconst(Rat(0));
    terms::Term s = st.tpl.at("balls").k;
    terms::Term r = et_command(ret, abs_of("x"), s, st, *p.find("balls"));
    std::string lv = st.tpl.at("balls").logicals[0];
    CHECK(eval_equal(r, terms::Term::logical(lv), {}, 3));
}

TEST_CASE("balls generates its three characteristic constraints plus non-negativity") {
    Program p = load("balls.pw");
    AnalysisState st(p);
    auto conds = generate_constraints(st);
    REQUIRE(conds.size() == 4);
    CHECK(conds[0].rule == "call-ctx");
    CHECK(conds[1].rule == "call-post");
    CHECK(conds[2].rule == "procedure");
    CHECK(conds[3].rule == "h-nonneg");

    const auto& tp = st.tpl.at("balls");
    std::string l = tp.logicals[0];
    // collect the four template coefficients and the two instantiation ones
    std::map<std::string, Rat> model{{"d$0", Rat(1, 5)}, {"d$1", Rat(1)}};
    // columns: 1, <la>, [la>0], [la>0]*la, l
    REQUIRE(tp.h_coeffs.size() == 5);
    // assign the expected model: coefficient of <la> 1/5, of l 1, others 0
    std::string la = sym::logical_param("balls", 0);
    for (auto& [c, n] : tp.h_columns) {
        if (n == terms::Norm::abs(Poly::var(la)))
            model[c] = Rat(1, 5);
        else if (n.guard.is_true() && n.body == Poly::var(l))
            model[c] = Rat(1);
        else
            model[c] = Rat(0);
    }

    // (c2): 0 <= d0 + d1*l under 0 <= l
    {
        terms::Term tau;
        tau.push(RatFn(Poly::var("d$0")), terms::Norm::one());
        tau.push(RatFn(Poly::var("d$1")), terms::Norm{terms::Guard::truth(), Poly::var(l)});
        CHECK(conds[0].lhs.is_zero());
        CHECK(eval_equal(conds[0].rhs, tau, model, 11));
    }
    // (c1): 1/5<lr+1> + 4/5<lr> + l <= <lr> + d0 + d1 l
    {
        terms::Term lhs = terms::add(
            terms::scale(Rat(1, 5),
                         terms::Term::of_norm(terms::Norm::abs(
                             Poly::var(sym::logical_ret()) + Poly::constant(Rat(1))))),
            terms::add(terms::scale(Rat(4, 5),
                                    terms::Term::of_norm(
                                        terms::Norm::abs(Poly::var(sym::logical_ret())))),
                       terms::Term::logical(l)));
        CHECK(eval_equal(conds[1].lhs, lhs, model, 12));
        terms::Term rhs = terms::add(
            terms::Term::of_norm(terms::Norm::abs(Poly::var(sym::logical_ret()))),
            terms::add(terms::scale(Rat(1, 5), terms::Term::constant(Rat(1))),
                       terms::Term::logical(l)));
        CHECK(eval_equal(conds[1].rhs, rhs, model, 13));
    }
    // (c3): [la > 0](c0 + c1<la-1> + c2(d0 + d1 l)) + [la <= 0] l <= h
    {
        Program probe = frontend::parse_program(
            "def w(la): if (la > 0) { skip }; return 0");
        BExprPtr gpos = probe.decls[0].body->c1->guard;
        terms::Term inner = terms::add(
            terms::scale(Rat(1, 5),
                         terms::Term::of_norm(terms::Norm::abs(Poly::var("la") -
                                                               Poly::constant(Rat(1))))),
            terms::add(terms::scale(Rat(1, 5), terms::Term::constant(Rat(1))),
                       terms::Term::logical(l)));
        terms::Term expected =
            terms::add(terms::guard_mul(gpos, inner),
                       terms::guard_mul(BExpr::mknot(gpos), terms::Term::logical(l)));
        expected = terms::substitute(expected, {{"la", Poly::var(la)}});
        CHECK(eval_equal(conds[2].lhs, expected, model, 14));
        CHECK(eval_equal(conds[2].rhs, st.tpl.at("balls").h, model, 15));
        // premise is the logical context
        REQUIRE(conds[2].ctx.atoms.size() == 1);
        CHECK(conds[2].ctx.eval({{l, Rat(0)}}));
    }
}

TEST_CASE("hire's call conditions carry the forward premise 0 < la_n") {
    Program p = load("hire.pw");
    AnalysisState st(p);
    auto conds = generate_constraints(st);
    std::string la = sym::logical_param("hire", 0);
    bool found = false;
    for (auto& sc : conds) {
        if (sc.rule != "call-post") continue;
        for (auto& a : sc.ctx.atoms) {
            auto it = a.lin.coeffs.find(la);
            if (it != a.lin.coeffs.end()) found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("the biased-coin branch transformer matches the oracle pointwise") {
    // the non-trivial branch of the demonic choice, as its own procedure
    Program p = frontend::normalize(frontend::parse_program(
        "def branch(x1, x2):\n"
        "  if (Bernoulli(1/2)) {\n"
        "    x1 := 2 * x1;\n"
        "    x2 := 2 * x2;\n"
        "    if (x2 + 1 <= x1) { x2 := x2 + 1 }\n"
        "    else {\n"
        "      if (x2 + 1/2 <= x1) { x1 := 1; x2 := 0 }\n"
        "      else { x1 := 0; x2 := 0 }\n"
        "    }\n"
        "  };\n"
        "  return x1"));
    AnalysisState st(p);
    generate_constraints(st);
    // straight-line body: no templates, no unknowns; ET is the exact
    // pre-expectation of <x1>
    const ProcedureDecl& f = *p.find("branch");
    terms::Term pre = et_command(f.body, abs_of("unused"),
                                 st.tpl.at("branch").k, st, f);
    for (long long x1 = -2; x1 <= 6; ++x1)
        for (long long x2 = -2; x2 <= 6; ++x2) {
            std::map<std::string, Rat> env{{"x1", Rat(x1)}, {"x2", Rat(x2)},
                                           {st.tpl.at("branch").logicals[0], Rat(0)},
                                           {sym::logical_ret(), Rat(0)}};
            Rat sym = terms::eval_term(pre, env);
            Rat orc = oracle::exact_expectation(p, "branch", {x1, x2}, {}, 4);
            CHECK(sym == orc);
        }
}

TEST_CASE("while loops produce a fresh template and its two conditions") {
    Program p = load("binomial_update.pw");
    AnalysisState st(p);
    auto conds = generate_constraints(st);
    int steps = 0, exits = 0;
    const SideCondition* step = nullptr;
    for (auto& sc : conds) {
        if (sc.rule == "while-step") {
            ++steps;
            step = &sc;
        }
        if (sc.rule == "while-exit") ++exits;
    }
    CHECK(steps == 1);
    CHECK(exits == 1);
    // the invariant template ranges over <N - n> among its columns
    REQUIRE(step);
    bool has_distance = false;
    for (auto& s : step->rhs.summands) {
        Poly want = Poly::var(sym::logical_param("binomial_update", 0)) - Poly::var("n");
        if (s.norm.body == want) has_distance = true;
    }
    CHECK(has_distance);
}

TEST_CASE("demonic choice emits one bound condition per branch") {
    Program p = load("biased_coin.pw");
    AnalysisState st(p);
    auto conds = generate_constraints(st);
    int left = 0, right = 0;
    for (auto& sc : conds) {
        if (sc.rule == "choice-left") ++left;
        if (sc.rule == "choice-right") ++right;
    }
    CHECK(left == 1);
    CHECK(right == 1);
}

TEST_CASE("every transformer rule is exercised by one combined program") {
    Program p = frontend::normalize(frontend::parse_program(
        "def helper(k): return k + 1\n"
        "def main(n):\n"
        "  var acc := 0;\n"
        "  skip;\n"
        "  acc ~ helper(n);\n"
        "  if (n > 0) { acc := acc + 1 } else { skip };\n"
        "  while (acc > 0) { acc := acc - 1 };\n"
        "  if (*) { acc := 1 } else { acc := 2 };\n"
        "  acc ~ Uniform(0, 1);\n"
        "  return acc"));
    AnalysisState st(p);
    auto conds = generate_constraints(st);
    std::set<std::string> rules;
    for (auto& sc : conds) rules.insert(sc.rule);
    for (auto want : {"call-ctx", "call-post", "while-step", "while-exit", "choice-left",
                      "choice-right", "procedure", "h-nonneg"})
        CHECK(rules.count(want) == 1);
}

TEST_CASE("constraint generation is deterministic") {
    auto dump = [] {
        Program p = load("every5.pw");
        AnalysisState st(p);
        std::string out;
        for (auto& sc : generate_constraints(st)) out += sc.to_string() + "\n";
        return out;
    };
    CHECK(dump() == dump());
}

TEST_CASE("geo under the zero measure admits the zero bound") {
    Program p = load("geo.pw");
    transformer::AnalysisConfig cfg;
    cfg.measure = templates::MeasureKind::Zero;
    AnalysisState st(p, cfg);
    auto conds = generate_constraints(st);
    std::vector<constraints::PolyInequality> cases;
    for (auto& sc : conds) {
        auto cs = constraints::case_split(sc);
        cases.insert(cases.end(), cs.begin(), cs.end());
    }
    auto sys = constraints::build_system(st.names, cases, 1);
    for (auto& [s, r] : st.names.inst_role) sys.inst_role[s] = r;
    for (auto& c : st.tpl.at("geo").h_coeffs) sys.unknowns.insert(c);
    constraints::LinearObjective total;
    for (auto& c : st.tpl.at("geo").h_coeffs) total[c] = Rat(1);
    auto out = constraints::solve_system(sys, {total}, {});
    REQUIRE(out.status == constraints::SolveStatus::Sat);
    // h at l = 0 evaluates to 0: the inferred expected value of the zero
    // continuation is zero
    std::map<std::string, Rat> env = out.model;
    env[st.tpl.at("geo").logicals[0]] = Rat(0);
    CHECK(terms::eval_term(st.tpl.at("geo").h, env) == Rat(0));
}
