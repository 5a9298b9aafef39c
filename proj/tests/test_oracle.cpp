// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pevalyzer/frontend.hpp"
#include "pevalyzer/normalize.hpp"
#include "pevalyzer/oracle.hpp"

using namespace peval;
using oracle::exact_expectation;
using oracle::monte_carlo;

static Program load(const std::string& name) {
    std::ifstream f(std::string(PEVAL_SOURCE_DIR) + "/benchmarks/" + name);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return frontend::normalize(frontend::parse_program(os.str()));
}

TEST_CASE("balls(3) at depth 4 is exactly 3/5") {
    Program p = load("balls.pw");
    CHECK(exact_expectation(p, "balls", {3}, {}, 4) == Rat(3, 5));
    // matches 1/5 * n for inputs the depth covers exactly
    CHECK(exact_expectation(p, "balls", {5}, {}, 6) == Rat(1));
}

TEST_CASE("depth 0 is the zero approximation") {
    Program p = load("balls.pw");
    CHECK(exact_expectation(p, "balls", {3}, {}, 0) == Rat(0));
}

TEST_CASE("throws at depth 10 equals the geometric partial sum") {
    Program p = load("throws.pw");
    // independent oracle: sum_{k=1..10} k * (1/5) * (4/5)^(k-1)
    Rat expect(0), q(1);
    for (int k = 1; k <= 10; ++k) {
        expect += Rat(k) * Rat(1, 5) * q;
        q *= Rat(4, 5);
    }
    CHECK(exact_expectation(p, "throws", {}, {}, 10) == expect);
    CHECK(expect < Rat(5));
}

TEST_CASE("exact expectation is monotone in the depth") {
    for (auto name : {"balls.pw", "throws.pw", "every5.pw", "rdwalk.pw", "rec1.pw"}) {
        Program p = load(name);
        std::vector<long long> args(p.decls.back().arity(), 4);
        Rat prev(0);
        for (int depth = 0; depth <= 8; ++depth) {
            Rat cur = exact_expectation(p, p.decls.back().name, args, {}, depth);
            CHECK(cur >= prev);
            prev = cur;
        }
    }
}

TEST_CASE("every-5 exact value approaches 137/12 from below") {
    Program p = load("every5.pw");
    Rat truth(137, 12);  // 5 * (1/1 + ... + 1/5)
    Rat at30 = exact_expectation(p, "every", {5}, {}, 30);
    CHECK(at30 <= truth);
    CHECK(at30 > Rat(10));
    Rat at60 = exact_expectation(p, "every", {5}, {}, 60);
    CHECK(at60 >= at30);
    CHECK(at60 <= truth);
}

TEST_CASE("demonic choice takes the pointwise maximum") {
    Program p = load("biased_coin.pw");
    // branch values: skip keeps x1; the coin branch doubles x1 when x1 > x2
    CHECK(exact_expectation(p, "biased_coin", {3, 1}, {}, 3) == Rat(9, 2));
    CHECK(exact_expectation(p, "biased_coin", {2, 5}, {}, 3) == Rat(2));
    CHECK(exact_expectation(p, "biased_coin", {5, 5}, {}, 3) == Rat(5));
}

TEST_CASE("linearity on loop-free call-free bodies with custom continuations") {
    Program p = frontend::normalize(frontend::parse_program(
        "def f(x): var t := 0; t ~ Bernoulli(1/3); if (t = 1) { x := x + 4 }; return x"));
    auto lin = [&](const Rat& a, const Rat& b) {
        // measure a*<v> + b*[v > 2]
        return [a, b](long long v, const oracle::Memory&) {
            Rat r(0);
            if (v > 0) r += a * Rat(v);
            if (v > 2) r += b;
            return r;
        };
    };
    for (long long x : {-2ll, 0ll, 3ll}) {
        Rat a(2, 3), b(5);
        Rat combined = exact_expectation(p, "f", {x}, {}, 2, lin(a, b));
        Rat fa = exact_expectation(p, "f", {x}, {}, 2, lin(Rat(1), Rat(0)));
        Rat fb = exact_expectation(p, "f", {x}, {}, 2, lin(Rat(0), Rat(1)));
        CHECK(combined == a * fa + b * fb);
    }
}

TEST_CASE("while loops unroll within the budget") {
    Program p = load("binomial_update.pw");
    // N = 6 fits comfortably inside the unroll cap: exact value N/2
    CHECK(exact_expectation(p, "binomial_update", {6}, {}, 3) == Rat(3));
    // beyond the cap the result is still a lower bound
    oracle::ExactConfig tight;
    tight.unroll_cap = 3;
    Rat low = exact_expectation(p, "binomial_update", {6}, {}, 3,
                                oracle::measure_return(), tight);
    CHECK(low <= Rat(3));
}

TEST_CASE("probability well-formedness is checked at runtime") {
    Program p = frontend::normalize(frontend::parse_program(
        "def f(n): var x := 0; x ~ Bernoulli(1/n); return x"));
    CHECK_THROWS_AS(exact_expectation(p, "f", {0}, {}, 2), oracle::OracleError);
    CHECK_THROWS_AS(exact_expectation(p, "f", {-3}, {}, 2), oracle::OracleError);
    CHECK(exact_expectation(p, "f", {4}, {}, 2) == Rat(1, 4));
}

TEST_CASE("Monte-Carlo: deterministic program gives exact mean and zero stderr") {
    Program p = frontend::normalize(frontend::parse_program("def f(): return 7"));
    auto r = monte_carlo(p, "f", {}, {}, 2000, 1);
    CHECK(r.mean == doctest::Approx(7.0));
    CHECK(r.stderr_ == doctest::Approx(0.0));
    CHECK(r.truncated == 0);
}

TEST_CASE("Monte-Carlo estimate of balls(10) is within 4 sigma of 2") {
    Program p = load("balls.pw");
    auto r = monte_carlo(p, "balls", {10}, {}, 100000, 11);
    CHECK(std::abs(r.mean - 2.0) <= 4 * r.stderr_ + 1e-12);
}

TEST_CASE("Monte-Carlo under the zero measure is identically zero") {
    Program p = load("geo.pw");
    auto r = monte_carlo(p, "geo", {}, {}, 5000, 3, 10000, 30000,
                         [](long long) { return 0.0; });
    CHECK(r.mean == doctest::Approx(0.0));
}

TEST_CASE("identical seeds give identical estimates") {
    Program p = load("rdwalk.pw");
    auto a = monte_carlo(p, "rdwalk", {8}, {}, 20000, 99);
    auto b = monte_carlo(p, "rdwalk", {8}, {}, 20000, 99);
    CHECK(a.mean == b.mean);
    CHECK(a.stderr_ == b.stderr_);
    CHECK(a.truncated == b.truncated);
    auto c = monte_carlo(p, "rdwalk", {8}, {}, 20000, 100);
    CHECK(a.mean != c.mean);  // different seed, different stream
}

TEST_CASE("Monte-Carlo agrees with the exact oracle on the corpus") {
    for (auto name : {"balls.pw", "rec1.pw", "binomial_update.pw"}) {
        Program p = load(name);
        auto& d = p.decls.back();
        Rat exact = exact_expectation(p, d.name, {9}, {}, 24);
        auto mc = monte_carlo(p, d.name, {9}, {}, 60000, 5);
        CHECK(std::abs(mc.mean - exact.to_double()) <= 4 * mc.stderr_ + 1e-9);
    }
}

TEST_CASE("global memory threads through calls") {
    Program p = frontend::normalize(frontend::parse_program(
        "global g;\n"
        "def tick(): g := g + 1; return 0\n"
        "def main(): var r := 0; r ~ tick(); r ~ tick(); return g"));
    CHECK(exact_expectation(p, "main", {}, {{"g", 5}}, 3) == Rat(7));
    auto mc = monte_carlo(p, "main", {}, {{"g", 5}}, 50, 1);
    CHECK(mc.mean == doctest::Approx(7.0));
}

TEST_CASE("Uniform sampling: exact and Monte-Carlo agree") {
    Program p = frontend::normalize(frontend::parse_program(
        "def roll(): var x := 0; x ~ Uniform(1, 6); return x"));
    CHECK(exact_expectation(p, "roll", {}, {}, 2) == Rat(7, 2));
    auto mc = monte_carlo(p, "roll", {}, {}, 60000, 13);
    CHECK(std::abs(mc.mean - 3.5) <= 4 * mc.stderr_ + 1e-12);
}

TEST_CASE("state explosion hits the configurable cap") {
    Program p = load("every_while.pw");
    oracle::ExactConfig tiny;
    tiny.state_cap = 50;
    CHECK_THROWS_AS(exact_expectation(p, "every_while", {0}, {}, 4,
                                      oracle::measure_return(), tiny),
                    oracle::OracleError);
}

TEST_CASE("truncated runs contribute their partial value") {
    Program p = load("throws.pw");
    // depth 1 cuts off every recursive call: only the immediate hit counts
    auto r = monte_carlo(p, "throws", {}, {}, 20000, 17, /*maxdepth=*/1);
    CHECK(r.truncated > 0);
    CHECK(r.mean < 5.0);
}
