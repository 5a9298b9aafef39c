// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver.
//
//   pevalyzer analyze <file> [--entry N] [--template auto] [--solver PATH]
//                            [--timeout SECS] [--smt-dump DIR] [--json OUT]
//                            [--measure return|zero] [--degree D]
//   pevalyzer bench <dir> --manifest FILE
//   pevalyzer validate <file> [--samples N] [--seed S] [...]
//
// Exit codes: 0 all passed, 1 analysis failure, 2 validation failure,
// 3 usage error.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pevalyzer/pevalyzer.hpp"

namespace {

using namespace peval;

driver::AnalyzeOptions make_options(const std::string& entry, const std::string& tmpl,
                                    const std::string& solver, int timeout,
                                    const std::string& dump, const std::string& measure,
                                    int degree, int logicals, uint64_t seed) {
    driver::AnalyzeOptions opt;
    opt.entry = entry;
    opt.template_kind = tmpl;
    opt.degree = degree;
    opt.logicals = logicals;
    opt.seed = seed;
    if (!solver.empty()) {
        opt.solver.path = solver;
    } else if (const char* env = std::getenv("PEVAL_SOLVER")) {
        opt.solver.path = env;
    }
    opt.solver.timeout_sec = timeout;
    opt.solver.dump_dir = dump;
    if (measure == "zero") opt.measure = templates::MeasureKind::Zero;
    return opt;
}

nlohmann::json term_json(const terms::Term& t) {
    nlohmann::json arr = nlohmann::json::array();
    for (auto& s : t.summands) {
        nlohmann::json j;
        j["coeff"] = s.coeff.to_string();
        j["guard"] = s.norm.guard.to_string();
        j["body"] = s.norm.body.to_string();
        arr.push_back(j);
    }
    return arr;
}

nlohmann::json report_json(const driver::AnalysisReport& rep) {
    nlohmann::json j;
    j["program"] = rep.program_id;
    j["entry"] = rep.entry;
    j["status"] = driver::status_name(rep.status);
    j["bound"] = rep.bound_text;
    j["bound_summands"] = term_json(rep.bound);
    j["template"] = rep.template_kind;
    j["degree"] = rep.degree;
    j["wall_ms"] = rep.wall_ms;
    j["solver"] = {{"backend", rep.solver_backend}, {"queries", rep.solver_queries}};
    if (!rep.message.empty()) j["message"] = rep.message;
    if (rep.check.ran)
        j["model_check"] = {{"passed", rep.check.passed},
                            {"trials", rep.check.trials},
                            {"skipped", rep.check.skipped}};
    return j;
}

int cmd_analyze(const std::string& file, const driver::AnalyzeOptions& opt,
                const std::string& json_out) {
    driver::AnalysisReport rep;
    try {
        rep = driver::analyze_source(driver::read_file(file), file, opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << rep.program_id << ": " << driver::status_name(rep.status);
    if (rep.status == driver::Status::Bounded) {
        std::cout << "\n  entry      " << rep.entry << "\n  bound      " << rep.bound_text
                  << "\n  template   " << rep.template_kind << " (degree " << rep.degree
                  << ")\n  solver     " << rep.solver_backend << ", " << rep.solver_queries
                  << " queries\n  checked    "
                  << (rep.check.passed ? "passed" : "FAILED") << " (" << rep.check.trials
                  << " trials)\n  time       " << rep.wall_ms << " ms\n";
    } else {
        std::cout << " (" << rep.message << ")\n";
    }
    if (!json_out.empty()) {
        std::ofstream f(json_out);
        f << report_json(rep).dump(2) << "\n";
    }
    return rep.status == driver::Status::Bounded ? 0 : 1;
}

int cmd_bench(const std::string& dir, const std::string& manifest,
              const driver::AnalyzeOptions& opt, const std::string& json_out) {
    driver::BenchReport rep = driver::run_benchmarks(dir, manifest, opt);
    for (auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "program                    status      time(ms)  result\n";
    for (auto& row : rep.rows) {
        char line[256];
        std::snprintf(line, sizeof line, "%-26s %-11s %8.1f  %s", row.program.c_str(),
                      driver::status_name(row.status).c_str(), row.wall_ms,
                      row.passed ? "pass" : ("FAIL: " + row.detail).c_str());
        std::cout << line << "\n";
        if (row.passed && !row.bound_text.empty())
            std::cout << "    bound: " << row.bound_text << "\n";
    }
    std::cout << rep.passed << " passed, " << rep.failed << " failed, total "
              << rep.total_ms << " ms\n";
    if (!json_out.empty()) {
        nlohmann::json j;
        j["rows"] = nlohmann::json::array();
        for (auto& row : rep.rows)
            j["rows"].push_back({{"program", row.program},
                                 {"status", driver::status_name(row.status)},
                                 {"bound", row.bound_text},
                                 {"passed", row.passed},
                                 {"detail", row.detail},
                                 {"wall_ms", row.wall_ms}});
        j["passed"] = rep.passed;
        j["failed"] = rep.failed;
        std::ofstream f(json_out);
        f << j.dump(2) << "\n";
    }
    return rep.failed == 0 ? 0 : 1;
}

int cmd_validate(const std::string& file, const driver::AnalyzeOptions& opt,
                 const driver::ValidateOptions& vo) {
    driver::AnalysisReport rep;
    try {
        rep = driver::analyze_source(driver::read_file(file), file, opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    if (rep.status != driver::Status::Bounded) {
        std::cout << file << ": " << driver::status_name(rep.status) << " (" << rep.message
                  << ")\n";
        return 1;
    }
    std::cout << file << ": bound " << rep.bound_text << "\n";
    driver::ValidateReport vr = driver::validate_report(rep, vo);
    if (vr.passed) {
        std::cout << "validate: pass (" << vr.points << " grid points, " << vo.samples
                  << " samples each)\n";
        return 0;
    }
    std::cout << "validate: FAIL: " << vr.detail << "\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"expected-value analyzer for probabilistic recursive programs"};
    app.require_subcommand(1);

    std::string file, dir, manifest, entry, tmpl = "auto", solver, dump, json_out;
    std::string measure = "return";
    int timeout = 10, degree = 0, logicals = 1;
    long long samples = 100000;
    uint64_t seed = 7;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--entry", entry, "entry procedure (default: last declared)");
        c->add_option("--template", tmpl, "linear | simple-mixed | auto")
            ->check(CLI::IsMember({"linear", "simple-mixed", "auto"}));
        c->add_option("--logicals", logicals, "free logical variables per procedure");
        c->add_option("--solver", solver, "external SMT solver binary (QF_NRA)");
        c->add_option("--timeout", timeout, "per-query solver timeout in seconds");
        c->add_option("--smt-dump", dump, "persist emitted SMT scripts to this directory");
        c->add_option("--measure", measure, "return | zero")
            ->check(CLI::IsMember({"return", "zero"}));
        c->add_option("--degree", degree, "fixed Handelman degree (default: auto)");
    };

    CLI::App* an = app.add_subcommand("analyze", "infer an upper bound for one program");
    an->add_option("file", file, "program file (.pw)")->required();
    add_common(an);
    an->add_option("--json", json_out, "write a machine-readable report");

    CLI::App* be = app.add_subcommand("bench", "run a benchmark corpus against a manifest");
    be->add_option("dir", dir, "directory of .pw files")->required();
    be->add_option("--manifest", manifest, "expectations manifest (JSON)")->required();
    add_common(be);
    be->add_option("--json", json_out, "write a machine-readable report");

    CLI::App* va = app.add_subcommand("validate", "check an inferred bound against the oracle");
    va->add_option("file", file, "program file (.pw)")->required();
    add_common(va);
    va->add_option("--samples", samples, "Monte-Carlo samples per grid point");
    va->add_option("--seed", seed, "PRNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    driver::AnalyzeOptions opt =
        make_options(entry, tmpl, solver, timeout, dump, measure, degree, logicals, seed);
    try {
        if (an->parsed()) return cmd_analyze(file, opt, json_out);
        if (be->parsed()) return cmd_bench(dir, manifest, opt, json_out);
        if (va->parsed()) {
            driver::ValidateOptions vo;
            vo.samples = samples;
            vo.seed = seed;
            return cmd_validate(file, opt, vo);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 3;
}
