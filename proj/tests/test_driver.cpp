// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pevalyzer/pevalyzer.hpp"

using namespace peval;
using namespace peval::driver;
namespace fs = std::filesystem;

static std::string bench_path(const std::string& name) {
    return std::string(PEVAL_SOURCE_DIR) + "/benchmarks/" + name;
}

TEST_CASE("analyze balls end to end") {
    AnalysisReport rep = analyze_source(read_file(bench_path("balls.pw")), "balls.pw", {});
    REQUIRE(rep.status == Status::Bounded);
    CHECK(rep.entry == "balls");
    CHECK(rep.template_kind == "linear");
    CHECK(rep.check.passed);
    CHECK(rep.wall_ms < 10000);
    BoundExpr expected = BoundExpr::parse("1/5 * max0(n)");
    CHECK(compare_bounds(rep.bound, rep.param_names, {}, expected, "eval-equal", Rat(1))
              .empty());
}

TEST_CASE("analysis failures surface as report statuses, never exceptions") {
    AnalysisReport bad = analyze_source("def f(x): return y", "bad.pw", {});
    CHECK(bad.status == Status::Unsupported);
    CHECK(!bad.message.empty());

    AnalyzeOptions opt;
    opt.entry = "nosuch";
    AnalysisReport missing =
        analyze_source(read_file(bench_path("balls.pw")), "balls.pw", opt);
    CHECK(missing.status == Status::Unsupported);
}

TEST_CASE("the general coupon collector needs the simple-mixed escalation") {
    AnalyzeOptions linear_only;
    linear_only.template_kind = "linear";
    AnalysisReport lin =
        analyze_source(read_file(bench_path("every.pw")), "every.pw", linear_only);
    CHECK(lin.status == Status::TemplateFailure);

    AnalysisReport full = analyze_source(read_file(bench_path("every.pw")), "every.pw", {});
    CHECK(full.status == Status::Bounded);
    CHECK(full.template_kind == "simple-mixed");
}

TEST_CASE("validate: a constant return has zero slack") {
    AnalysisReport rep = analyze_source("def one(): return 1", "one.pw", {});
    REQUIRE(rep.status == Status::Bounded);
    std::map<std::string, Rat> env;
    CHECK(terms::eval_term(rep.bound, env) == Rat(1));
    ValidateOptions vo;
    vo.samples = 2000;
    ValidateReport vr = validate_report(rep, vo);
    CHECK(vr.passed);
}

TEST_CASE("validate catches an artificially broken bound") {
    AnalysisReport rep = analyze_source(read_file(bench_path("balls.pw")), "balls.pw", {});
    REQUIRE(rep.status == Status::Bounded);
    rep.bound = terms::scale(Rat(1, 100), rep.bound);  // now below the true value
    ValidateOptions vo;
    vo.samples = 4000;
    ValidateReport vr = validate_report(rep, vo);
    CHECK_FALSE(vr.passed);
    CHECK(!vr.detail.empty());
}

TEST_CASE("mutual recursion is analyzed whole-program") {
    std::string src =
        "def pong(n): var r := 0; if (n > 0) { r ~ ping(n - 1); r := r + 1 }; return r\n"
        "def ping(n): var s := 0; if (n > 0) { s ~ pong(n - 1); s := s + 1 }; return s\n";
    AnalyzeOptions opt;
    opt.entry = "ping";
    AnalysisReport rep = analyze_source(src, "pingpong.pw", opt);
    REQUIRE(rep.status == Status::Bounded);
    BoundExpr expected = BoundExpr::parse("max0(n)");
    CHECK(compare_bounds(rep.bound, rep.param_names, {}, expected, "eval-equal", Rat(1))
              .empty());
    ValidateOptions vo;
    vo.samples = 3000;
    CHECK(validate_report(rep, vo).passed);
}

TEST_CASE("global state is bounded through calls") {
    std::string src =
        "global g;\n"
        "def tick(): g := g + 1; return 0\n"
        "def main(): var r := 0; r ~ tick(); return g\n";
    AnalyzeOptions opt;
    opt.entry = "main";
    AnalysisReport rep = analyze_source(src, "globals.pw", opt);
    REQUIRE(rep.status == Status::Bounded);
    BoundExpr expected = BoundExpr::parse("max0(g) + 1");
    CHECK(compare_bounds(rep.bound, rep.param_names, {"g"}, expected, "eval-equal", Rat(1))
              .empty());
    ValidateOptions vo;
    vo.samples = 2000;
    CHECK(validate_report(rep, vo).passed);
}

TEST_CASE("nested loops solve jointly and validate") {
    std::string src =
        "def nest(n):\n"
        "  var c := 0;\n"
        "  var i := 0;\n"
        "  while (i < n) {\n"
        "    var j := 0;\n"
        "    while (j < 2) { c ~ c + Bernoulli(1/2); j := j + 1 };\n"
        "    i := i + 1\n"
        "  };\n"
        "  return c\n";
    AnalysisReport rep = analyze_source(src, "nest.pw", {});
    REQUIRE(rep.status == Status::Bounded);
    ValidateOptions vo;
    vo.samples = 3000;
    vo.exact_depth = 8;
    CHECK(validate_report(rep, vo).passed);
    // exact expected value is n, so the bound at n = 4 is at least 4
    std::map<std::string, Rat> env{{"n", Rat(4)}};
    CHECK(terms::eval_term(rep.bound, env) >= Rat(4));
}

TEST_CASE("reports are deterministic given program and configuration") {
    auto once = [] {
        return analyze_source(read_file(bench_path("rdwalk.pw")), "rdwalk.pw", {})
            .bound_text;
    };
    CHECK(once() == once());
}

TEST_CASE("bound expressions parse and evaluate") {
    BoundExpr e = BoundExpr::parse("1/2 * (1 + max0(n)) + [n > 3] * 2");
    CHECK(e.eval({{"n", Rat(5)}}) == Rat(5));
    CHECK(e.eval({{"n", Rat(-7)}}) == Rat(1, 2));
    CHECK_THROWS(BoundExpr::parse("1 +"));
    BoundExpr iv = BoundExpr::parse("[0 < i && i <= 5] * i");
    CHECK(iv.eval({{"i", Rat(3)}}) == Rat(3));
    CHECK(iv.eval({{"i", Rat(9)}}) == Rat(0));
}

TEST_CASE("comparison modes") {
    AnalysisReport rep = analyze_source(read_file(bench_path("throws.pw")), "throws.pw", {});
    REQUIRE(rep.status == Status::Bounded);
    CHECK(compare_bounds(rep.bound, rep.param_names, {}, BoundExpr::parse("5"),
                         "eval-equal", Rat(1))
              .empty());
    CHECK(compare_bounds(rep.bound, rep.param_names, {}, BoundExpr::parse("6"), "at-most",
                         Rat(1))
              .empty());
    CHECK(!compare_bounds(rep.bound, rep.param_names, {}, BoundExpr::parse("4"), "at-most",
                          Rat(1))
               .empty());
    CHECK(compare_bounds(rep.bound, rep.param_names, {}, BoundExpr::parse("4"),
                         "within-factor", Rat(3, 2))
              .empty());
    CHECK(!compare_bounds(rep.bound, rep.param_names, {}, BoundExpr::parse("1"),
                          "within-factor", Rat(2))
               .empty());
}

TEST_CASE("bench: empty corpus and partial failure") {
    fs::path dir = fs::path(PEVAL_BIN_DIR) / "bench_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream m(dir / "empty.json");
        m << "{\"programs\": []}\n";
    }
    BenchReport empty = run_benchmarks(dir.string(), (dir / "empty.json").string(), {});
    CHECK(empty.rows.empty());
    CHECK(empty.failed == 0);

    // one passing and one failing expectation
    fs::copy_file(bench_path("throws.pw"), dir / "throws.pw");
    {
        std::ofstream m(dir / "mixed.json");
        m << "{\"programs\": ["
             "{\"file\": \"throws.pw\", \"expected\": \"5\"},"
             "{\"file\": \"throws.pw\", \"expected\": \"4\"},"
             "{\"file\": \"missing.pw\", \"expected\": \"0\"}"
             "]}\n";
    }
    BenchReport mixed = run_benchmarks(dir.string(), (dir / "mixed.json").string(), {});
    CHECK(mixed.passed == 1);
    CHECK(mixed.failed == 2);

    // programs without manifest entries are warned about
    {
        std::ofstream m(dir / "none.json");
        m << "{\"programs\": []}\n";
    }
    BenchReport warn = run_benchmarks(dir.string(), (dir / "none.json").string(), {});
    REQUIRE(warn.warnings.size() == 1);
    CHECK(warn.warnings[0].find("throws.pw") != std::string::npos);
}

TEST_CASE("command-line driver exit codes") {
    std::string bin = std::string(PEVAL_BIN_DIR) + "/pevalyzer";
    if (!fs::exists(bin)) return;  // tool not built in this configuration
    auto run = [&](const std::string& args) {
        std::string cmd = bin + " " + args + " > /dev/null 2>&1";
        int rc = std::system(cmd.c_str());
        return WEXITSTATUS(rc);
    };
    CHECK(run("analyze " + bench_path("throws.pw")) == 0);
    CHECK(run("analyze /nonexistent.pw") == 1);
    CHECK(run("bench") == 3);           // missing required arguments
    CHECK(run("frobnicate") == 3);      // unknown subcommand
    CHECK(run("validate " + bench_path("throws.pw") + " --samples 2000") == 0);
    // json report lands on disk
    fs::path out = fs::path(PEVAL_BIN_DIR) / "throws_report.json";
    fs::remove(out);
    CHECK(run("analyze " + bench_path("throws.pw") + " --json " + out.string()) == 0);
    CHECK(fs::exists(out));
    std::string j = read_file(out.string());
    CHECK(j.find("\"status\": \"bounded\"") != std::string::npos);
    CHECK(j.find("\"bound\": \"5\"") != std::string::npos);
}
