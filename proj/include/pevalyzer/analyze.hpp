// SPDX-License-Identifier: Apache-2.0
//
// End-to-end analysis: parse, normalize, template, generate constraints,
// case-split, Handelman-linearize, solve (escalating the template kind and
// certificate degree on failure), re-check the model against the original
// side conditions by random evaluation, and report the inferred bound.

#pragma once

#include <chrono>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "frontend.hpp"
#include "normalize.hpp"
#include "oracle.hpp"
#include "solver.hpp"

namespace peval::driver {

struct AnalyzeOptions {
    std::string entry;  // empty: last declared procedure
    std::string template_kind = "auto";  // linear | simple-mixed | auto
    int degree = 0;                      // 0: auto ladder
    int logicals = 1;
    templates::MeasureKind measure = templates::MeasureKind::Return;
    constraints::SolverConfig solver;
    int check_trials = 2000;
    uint64_t seed = 1;
    size_t mixed_cap = 40;
};

enum class Status { Bounded, TemplateFailure, SolverTimeout, Unsupported };

inline std::string status_name(Status s) {
    switch (s) {
        case Status::Bounded: return "bounded";
        case Status::TemplateFailure: return "unbounded-template-failure";
        case Status::SolverTimeout: return "solver-timeout";
        case Status::Unsupported: return "unsupported";
    }
    return "?";
}

struct CheckReport {
    bool ran = false;
    bool passed = false;
    long long trials = 0, skipped = 0;
    std::string violated;  // description of the first violated condition
    std::string witness;
};

struct AnalysisReport {
    std::string program_id;
    std::string entry;
    Status status = Status::Unsupported;
    terms::Term bound;                    // over source parameter names
    std::string bound_text;
    std::vector<std::string> param_names;
    std::string template_kind;
    int degree = 0;
    double wall_ms = 0;
    int solver_queries = 0;
    std::string solver_backend;
    std::string message;
    CheckReport check;
    std::optional<Program> normalized;
    constraints::Model model;
    templates::MeasureKind measure = templates::MeasureKind::Return;
};

// ---------------------------------------------------------------------------
// model checking against the original side conditions

inline CheckReport check_model(const std::vector<transformer::SideCondition>& conds,
                               const constraints::Model& model, long long trials,
                               uint64_t seed) {
    CheckReport rep;
    rep.ran = true;
    rep.passed = true;
    std::mt19937_64 rng(seed);
    auto rnd_int = [&](long long lo, long long hi) {
        return lo + static_cast<long long>(rng() % static_cast<uint64_t>(hi - lo + 1));
    };
    for (auto& sc : conds) {
        std::set<std::string> vars;
        auto addside = [&](const terms::Term& t) {
            for (auto& v : t.variables())
                if (!sym::is_unknown(v)) vars.insert(v);
        };
        addside(sc.lhs);
        addside(sc.rhs);
        for (auto& a : sc.ctx.atoms)
            for (auto& [v, c] : a.lin.coeffs)
                if (!sym::is_unknown(v)) vars.insert(v);

        long long per = std::max<long long>(1, trials / std::max<size_t>(conds.size(), 1));
        for (long long i = 0; i < per; ++i) {
            std::map<std::string, Rat> env;
            for (auto& [u, val] : model) env[u] = val;
            bool ok = false;
            for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
                for (auto& v : vars) {
                    bool small = rng() % 4 != 0;
                    long long m = small ? 20 : 1000000;
                    long long x = rnd_int(sym::is_free_logical(v) ? 0 : -m, m);
                    env[v] = Rat(x);
                }
                ok = sc.ctx.eval(env);
            }
            if (!ok) {
                ++rep.skipped;
                continue;
            }
            auto st = constraints::check_at_point(sc, env);
            ++rep.trials;
            if (st == constraints::PointStatus::Undefined) {
                ++rep.skipped;
            } else if (st == constraints::PointStatus::Violated) {
                rep.passed = false;
                rep.violated = sc.rule + " at " + sc.loc.to_string();
                std::string w;
                for (auto& v : vars) w += v + "=" + env[v].to_string() + " ";
                rep.witness = w;
                return rep;
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------

namespace detail_an {

inline std::vector<constraints::LinearObjective> objectives(
    const templates::TemplatePair& tp) {
    std::vector<constraints::LinearObjective> stages;
    if (!tp.h_const_coeff.empty()) stages.push_back({{tp.h_const_coeff, Rat(1)}});
    // tightness at sample points: minimize the bound evaluated on a spread of
    // inputs (logicals at zero)
    constraints::LinearObjective spread;
    static const long long pts[] = {0, 1, 2, 5, 7, 10, 20, 100};
    for (auto& [coeff, norm] : tp.h_columns) {
        Rat w(0);
        for (long long v : pts) {
            std::map<std::string, Rat> env;
            for (auto& var : norm.body.variables()) env[var] = sym::is_free_logical(var) ? Rat(0) : Rat(v);
            for (auto& a : norm.guard.atoms)
                for (auto& [var, c] : a.lin.coeffs)
                    if (!env.count(var)) env[var] = sym::is_free_logical(var) ? Rat(0) : Rat(v);
            try {
                if (norm.guard.eval(env)) {
                    Rat bv = norm.body.eval(env);
                    if (bv > Rat(0)) w += bv;
                }
            } catch (...) {
            }
        }
        if (!w.is_zero()) spread[coeff] += w;
    }
    if (!spread.empty()) stages.push_back(spread);
    constraints::LinearObjective total;
    for (auto& c : tp.h_coeffs) total[c] = Rat(1);
    stages.push_back(total);
    return stages;
}

inline std::vector<templates::TemplateKind> kind_ladder(const AnalyzeOptions& opt) {
    if (opt.template_kind == "linear") return {templates::TemplateKind::Linear};
    if (opt.template_kind == "simple-mixed") return {templates::TemplateKind::SimpleMixed};
    return {templates::TemplateKind::Linear, templates::TemplateKind::SimpleMixed};
}

// Certificate degrees per template kind.  Degree 1 is complete for linear
// goals (Farkas); quadratic goals, which arise from dynamic probabilities
// and mixed bases, start at their own degree so that guard-scoped bases can
// compete with their unguarded shadows, and escalate once on failure.
inline std::vector<int> degree_ladder(const AnalyzeOptions& opt, templates::TemplateKind k,
                                      int max_goal_degree) {
    if (opt.degree > 0) return {opt.degree};
    int kind_min = k == templates::TemplateKind::Linear ? 1 : 2;
    int start = std::min(std::max(max_goal_degree, kind_min), 4);
    if (start + 1 <= 4) return {start, start + 1};
    return {start};
}

}  // namespace detail_an

// The concrete bound: h of the entry procedure under the model, logical
// variables at zero, logical parameters renamed back to the source names.
inline terms::Term concrete_bound(const templates::TemplatePair& tp,
                                  const ProcedureDecl& entry,
                                  const constraints::Model& model) {
    std::map<std::string, Poly> back;
    for (size_t i = 0; i < entry.params.size(); ++i)
        back[sym::logical_param(entry.name, i)] = Poly::var(entry.params[i]);
    std::map<std::string, Poly> zeros;
    for (auto& lv : tp.logicals) zeros[lv] = Poly::constant(Rat(0));
    terms::Term t = terms::substitute(terms::substitute(tp.h, zeros), back);
    // substitute model values into the coefficients
    std::map<std::string, Poly> mvals;
    for (auto& v : t.variables())
        if (sym::is_unknown(v)) {
            auto it = model.find(v);
            mvals[v] = Poly::constant(it == model.end() ? Rat(0) : it->second);
        }
    t = terms::substitute(t, mvals);
    t.canonicalize();
    return t;
}

inline AnalysisReport analyze_program(const Program& parsed, const std::string& program_id,
                                      const AnalyzeOptions& opt) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    AnalysisReport rep;
    rep.program_id = program_id;
    auto done = [&](AnalysisReport& r) -> AnalysisReport& {
        r.wall_ms =
            std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        return r;
    };

    Program prog = frontend::normalize(parsed);
    auto diags = frontend::check_well_formed(prog);
    if (!diags.empty()) {
        rep.status = Status::Unsupported;
        rep.message = diags[0].to_string();
        return done(rep);
    }
    if (prog.decls.empty()) {
        rep.status = Status::Unsupported;
        rep.message = "no procedures";
        return done(rep);
    }
    const ProcedureDecl* entry = opt.entry.empty() ? &prog.decls.back() : prog.find(opt.entry);
    if (!entry) {
        rep.status = Status::Unsupported;
        rep.message = "unknown entry procedure '" + opt.entry + "'";
        return done(rep);
    }
    rep.entry = entry->name;
    for (auto& p : parsed.find(entry->name)->params) rep.param_names.push_back(p);
    rep.normalized = prog;
    rep.measure = opt.measure;

    bool saw_timeout = false;
    std::string last_detail;
    for (auto kind : detail_an::kind_ladder(opt)) {
        transformer::AnalysisConfig cfg;
        cfg.kind = kind;
        cfg.measure = opt.measure;
        cfg.logicals = opt.logicals;
        cfg.mixed_cap = opt.mixed_cap;
        transformer::AnalysisState st(prog, cfg);
        std::vector<transformer::SideCondition> conds;
        std::vector<constraints::PolyInequality> cases;
        try {
            conds = transformer::generate_constraints(st);
            for (auto& sc : conds) {
                auto cs = constraints::case_split(sc);
                cases.insert(cases.end(), cs.begin(), cs.end());
            }
        } catch (const terms::UnsupportedError& e) {
            rep.status = Status::Unsupported;
            rep.message = e.what();
            return done(rep);
        } catch (const constraints::CaseSplitError& e) {
            rep.status = Status::Unsupported;
            rep.message = e.what();
            return done(rep);
        }
        int max_goal_degree = 1;
        for (auto& pi : cases)
            for (auto& [m, c] : pi.goal.terms()) {
                int d = 0;
                for (auto& [v, e] : m.factors)
                    if (!sym::is_unknown(v)) d += e;
                max_goal_degree = std::max(max_goal_degree, d);
            }
        for (int degree : detail_an::degree_ladder(opt, kind, max_goal_degree)) {
            constraints::CoeffSystem sys;
            try {
                sys = constraints::build_system(st.names, cases, degree);
            } catch (const constraints::HandelmanError& e) {
                last_detail = e.what();
                continue;
            }
            for (auto& [s, r] : st.names.inst_role) sys.inst_role[s] = r;
            const templates::TemplatePair& tp = st.tpl.at(entry->name);
            for (auto& c : tp.h_coeffs) sys.unknowns.insert(c);
            auto outcome =
                constraints::solve_system(sys, detail_an::objectives(tp), opt.solver);
            rep.solver_queries += outcome.queries;
            rep.solver_backend = outcome.backend.empty() ? "builtin" : outcome.backend;
            if (outcome.status == constraints::SolveStatus::Sat) {
                CheckReport chk =
                    check_model(conds, outcome.model, opt.check_trials, opt.seed);
                rep.check = chk;
                if (!chk.passed) {
                    rep.status = Status::Unsupported;
                    rep.message = "model failed re-checking: " + chk.violated +
                                  " witness " + chk.witness;
                    return done(rep);
                }
                rep.status = Status::Bounded;
                rep.template_kind = templates::kind_name(kind);
                rep.degree = degree;
                rep.model = outcome.model;
                rep.bound = concrete_bound(tp, *parsed.find(entry->name), outcome.model);
                rep.bound_text = rep.bound.to_string();
                return done(rep);
            }
            if (outcome.status == constraints::SolveStatus::Unknown) {
                if (!opt.solver.path.empty()) saw_timeout = true;
                last_detail = outcome.detail;
            }
        }
    }
    rep.status = saw_timeout ? Status::SolverTimeout : Status::TemplateFailure;
    rep.message = last_detail.empty() ? "no template admitted a bound" : last_detail;
    return done(rep);
}

inline AnalysisReport analyze_source(const std::string& source,
                                     const std::string& program_id,
                                     const AnalyzeOptions& opt) {
    try {
        Program parsed = frontend::parse_program(source);
        return analyze_program(parsed, program_id, opt);
    } catch (const FrontendError& e) {
        AnalysisReport rep;
        rep.program_id = program_id;
        rep.status = Status::Unsupported;
        rep.message = e.diag.to_string();
        return rep;
    }
}

// ---------------------------------------------------------------------------
// validation of an inferred bound against the oracle

struct ValidateOptions {
    long long samples = 100000;
    uint64_t seed = 7;
    int exact_depth = 12;
    int mc_maxdepth = 10000;
    std::vector<long long> grid = {0, 1, 2, 5, 10, 20};
};

struct ValidateReport {
    bool passed = false;
    std::string detail;
    long long points = 0;
};

inline ValidateReport validate_report(const AnalysisReport& rep, const ValidateOptions& vo) {
    ValidateReport out;
    if (rep.status != Status::Bounded || !rep.normalized) {
        out.detail = "no bound to validate";
        return out;
    }
    const Program& prog = *rep.normalized;
    const ProcedureDecl* entry = prog.find(rep.entry);
    size_t arity = entry->arity();
    std::vector<std::vector<long long>> inputs;
    if (arity == 0) {
        inputs.push_back({});
    } else if (arity == 1) {
        for (auto v : vo.grid) inputs.push_back({v});
    } else if (arity == 2) {
        for (auto a : vo.grid)
            for (auto b : vo.grid) inputs.push_back({a, b});
    } else {
        for (auto v : vo.grid) inputs.push_back(std::vector<long long>(arity, v));
    }
    oracle::Memory globals0;
    for (auto& g : prog.globals) globals0[g] = 0;
    bool zero_measure = rep.measure == templates::MeasureKind::Zero;

    for (auto& in : inputs) {
        std::map<std::string, Rat> env;
        for (size_t i = 0; i < arity; ++i) env[rep.param_names[i]] = Rat(in[i]);
        for (auto& g : prog.globals) env[g] = Rat(0);
        Rat bound;
        try {
            bound = terms::eval_term(rep.bound, env);
        } catch (const terms::EvalError& e) {
            out.detail = std::string("bound evaluation failed: ") + e.what();
            return out;
        }
        ++out.points;
        Rat exact;
        try {
            exact = oracle::exact_expectation(prog, rep.entry, in, globals0, vo.exact_depth,
                                              zero_measure ? oracle::measure_zero()
                                                           : oracle::measure_return());
        } catch (const oracle::OracleError& e) {
            out.detail = std::string("oracle failed: ") + e.what();
            return out;
        }
        if (exact > bound) {
            out.detail = "exact expectation exceeds the bound at (" +
                         [&] {
                             std::string s;
                             for (auto v : in) s += std::to_string(v) + " ";
                             return s;
                         }() +
                         "): " + exact.to_string() + " > " + bound.to_string();
            return out;
        }
        auto mc = oracle::monte_carlo(
            prog, rep.entry, in, globals0, vo.samples, vo.seed, vo.mc_maxdepth, 30000,
            zero_measure ? std::function<double(long long)>([](long long) { return 0.0; })
                         : std::function<double(long long)>(
                               [](long long v) { return v > 0 ? double(v) : 0.0; }));
        double bd = bound.to_double();
        if (mc.mean - 4 * mc.stderr_ > bd + 1e-9 * std::max(1.0, std::abs(bd))) {
            out.detail = "Monte-Carlo mean - 4*stderr exceeds the bound: mean=" +
                         std::to_string(mc.mean) + " stderr=" + std::to_string(mc.stderr_) +
                         " bound=" + bound.to_string();
            return out;
        }
    }
    out.passed = true;
    return out;
}

}  // namespace peval::driver
