// SPDX-License-Identifier: Apache-2.0
//
// Discharging the coefficient constraints.  Two backends share one facade:
//
//  * an external SMT solver speaking SMT-LIB2 / QF_NRA, invoked as a
//    separate process (configure with --solver or PEVAL_SOLVER), with
//    lexicographic minimization by iterated satisfiability queries; and
//
//  * a built-in exact backend: the only non-linear unknowns are products of
//    a template coefficient with an instantiation coefficient, so fixing the
//    instantiation coefficients (candidates proposed by an LP relaxation of
//    the products) leaves exact rational linear programs.
//
// The built-in backend keeps the analyzer self-contained; the SMT path is
// preferred when a solver is available.

#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "handelman.hpp"
#include "simplex.hpp"

namespace peval::constraints {

enum class SolveStatus { Sat, Unsat, Unknown };

using Model = std::map<std::string, Rat>;
using LinearObjective = std::map<std::string, Rat>;  // minimized, in stage order

struct SolverConfig {
    std::string path;  // empty: use the built-in backend
    int timeout_sec = 10;
    std::string dump_dir;
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::Unknown;
    Model model;
    int queries = 0;
    std::string backend;
    std::string detail;
};

// ---------------------------------------------------------------------------
// SMT-LIB2 emission and model parsing

inline std::string smt_rat(const Rat& r) {
    std::string num = BigInt::abs(r.num()).to_string();
    std::string body = r.is_integer() ? num : "(/ " + num + " " + r.den().to_string() + ")";
    if (r.sign() < 0) return "(- " + body + ")";
    return body;
}

// A textual QF_NRA script asserting non-negativity of every unknown, all
// matching equations, and any extra linear bounds (used by the minimization
// loop).  The objective is emitted as a comment header so the iterated
// queries stay solver-agnostic.
inline std::string emit_smt(const CoeffSystem& sys,
                            const std::vector<std::pair<LinearObjective, Rat>>& bounds = {},
                            const LinearObjective* objective = nullptr) {
    std::ostringstream os;
    os << "(set-logic QF_NRA)\n";
    if (objective && !objective->empty()) {
        os << "; objective (minimize): ";
        bool first = true;
        for (auto& [s, c] : *objective) {
            if (!first) os << " + ";
            first = false;
            os << c.to_string() << "*" << s;
        }
        os << "\n";
    }
    for (auto& u : sys.unknowns) {
        os << "(declare-const " << u << " Real)\n";
        os << "(assert (>= " << u << " 0))\n";
    }
    auto mono = [](const UnknownMono& m) {
        if (m.syms.empty()) return std::string("1");
        if (m.syms.size() == 1) return m.syms[0];
        std::string s = "(*";
        for (auto& v : m.syms) s += " " + v;
        return s + ")";
    };
    for (auto& eq : sys.equations) {
        std::ostringstream sum;
        sum << "(+ 0";
        for (auto& [m, c] : eq) sum << " (* " << smt_rat(c) << " " << mono(m) << ")";
        sum << ")";
        os << "(assert (= " << sum.str() << " 0))\n";
    }
    auto linear = [&](const LinearObjective& o) {
        std::ostringstream sum;
        sum << "(+ 0";
        for (auto& [s, c] : o) sum << " (* " << smt_rat(c) << " " << s << ")";
        sum << ")";
        return sum.str();
    };
    for (auto& [o, bound] : bounds)
        os << "(assert (<= " << linear(o) << " " << smt_rat(bound) << "))\n";
    os << "(check-sat)\n";
    if (!sys.unknowns.empty()) {
        os << "(get-value (";
        bool first = true;
        for (auto& u : sys.unknowns) {
            if (!first) os << " ";
            first = false;
            os << u;
        }
        os << "))\n";
    }
    return os.str();
}

// Parse solver output: first "sat" / "unsat" / "unknown", then an optional
// ((sym val) ...) value list with exact rational parsing of decimals and
// fraction forms.
struct ParsedModel {
    SolveStatus status = SolveStatus::Unknown;
    Model model;
};

namespace detail_smt {

struct SExpr {
    std::string atom;
    std::vector<SExpr> list;
    bool is_atom = false;
};

inline void skip_ws(const std::string& s, size_t& i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\n' || s[i] == '\t' || s[i] == '\r')) ++i;
}
inline SExpr parse_sexpr(const std::string& s, size_t& i) {
    skip_ws(s, i);
    SExpr e;
    if (i >= s.size()) return e;
    if (s[i] == '(') {
        ++i;
        for (;;) {
            skip_ws(s, i);
            if (i >= s.size()) break;
            if (s[i] == ')') {
                ++i;
                break;
            }
            e.list.push_back(parse_sexpr(s, i));
        }
        return e;
    }
    e.is_atom = true;
    size_t j = i;
    while (j < s.size() && s[j] != '(' && s[j] != ')' && s[j] != ' ' && s[j] != '\n' &&
           s[j] != '\t' && s[j] != '\r')
        ++j;
    e.atom = s.substr(i, j - i);
    i = j;
    return e;
}

inline std::optional<Rat> sexpr_value(const SExpr& e) {
    if (e.is_atom) {
        try {
            return Rat::from_string(e.atom);
        } catch (...) {
            return std::nullopt;
        }
    }
    if (e.list.empty()) return std::nullopt;
    if (e.list[0].is_atom && e.list[0].atom == "-" && e.list.size() == 2) {
        auto v = sexpr_value(e.list[1]);
        if (!v) return std::nullopt;
        return -*v;
    }
    if (e.list[0].is_atom && e.list[0].atom == "/" && e.list.size() == 3) {
        auto a = sexpr_value(e.list[1]);
        auto b = sexpr_value(e.list[2]);
        if (!a || !b || b->is_zero()) return std::nullopt;
        return *a / *b;
    }
    return std::nullopt;
}

}  // namespace detail_smt

inline ParsedModel parse_model(const std::string& output) {
    ParsedModel pm;
    std::istringstream is(output);
    std::string line;
    std::string rest;
    bool seen_status = false;
    while (std::getline(is, line)) {
        std::string trimmed;
        for (char c : line)
            if (!isspace(static_cast<unsigned char>(c))) trimmed += c;
        if (!seen_status) {
            if (trimmed == "sat") {
                pm.status = SolveStatus::Sat;
                seen_status = true;
                continue;
            }
            if (trimmed == "unsat") {
                pm.status = SolveStatus::Unsat;
                seen_status = true;
                continue;
            }
            if (trimmed == "unknown") {
                pm.status = SolveStatus::Unknown;
                seen_status = true;
                continue;
            }
        }
        rest += line + "\n";
    }
    if (pm.status != SolveStatus::Sat) return pm;
    size_t i = 0;
    detail_smt::SExpr top = detail_smt::parse_sexpr(rest, i);
    for (auto& pair : top.list) {
        if (pair.is_atom || pair.list.size() != 2 || !pair.list[0].is_atom) continue;
        auto v = detail_smt::sexpr_value(pair.list[1]);
        if (v) pm.model[pair.list[0].atom] = *v;
    }
    return pm;
}

// ---------------------------------------------------------------------------
// Linear subproblems (built-in backend)

namespace detail_lin {

struct LinEq {
    std::map<std::string, Rat> coeff;
    Rat constant;  // sum coeff*x + constant = 0
};

struct LinSys {
    std::vector<LinEq> eqs;
    Model fixed;
    bool infeasible = false;

    void fix(const std::string& v, const Rat& val) {
        if (val < Rat(0)) {
            infeasible = true;
            return;
        }
        fixed[v] = val;
    }
};

inline void presolve(LinSys& sys) {
    bool changed = true;
    while (changed && !sys.infeasible) {
        changed = false;
        std::vector<LinEq> next;
        for (auto& eq : sys.eqs) {
            LinEq e;
            e.constant = eq.constant;
            for (auto& [v, c] : eq.coeff) {
                auto it = sys.fixed.find(v);
                if (it != sys.fixed.end())
                    e.constant += c * it->second;
                else if (!c.is_zero())
                    e.coeff[v] = c;
            }
            if (e.coeff.empty()) {
                if (!e.constant.is_zero()) {
                    sys.infeasible = true;
                    return;
                }
                changed = true;
                continue;
            }
            if (e.coeff.size() == 1) {
                auto& [v, c] = *e.coeff.begin();
                sys.fix(v, -e.constant / c);
                if (sys.infeasible) return;
                changed = true;
                continue;
            }
            int sign = e.coeff.begin()->second.sign();
            bool same = true;
            for (auto& [v, c] : e.coeff)
                if (c.sign() != sign) same = false;
            if (same) {
                Rat k = e.constant * Rat(sign);
                if (k > Rat(0)) {  // sum of same-sign terms cannot cancel it
                    sys.infeasible = true;
                    return;
                }
                if (k.is_zero()) {
                    for (auto& [v, c] : e.coeff) sys.fix(v, Rat(0));
                    if (sys.infeasible) return;
                    changed = true;
                    continue;
                }
            }
            next.push_back(std::move(e));
        }
        sys.eqs = std::move(next);
    }
}

// Lexicographically minimize the given stages over the presolved system.
// Returns nullopt when infeasible.
inline std::optional<Model> lex_solve(LinSys sys, const std::vector<LinearObjective>& stages) {
    presolve(sys);
    if (sys.infeasible) return std::nullopt;

    std::set<std::string> varset;
    for (auto& eq : sys.eqs)
        for (auto& [v, c] : eq.coeff) varset.insert(v);
    std::vector<std::string> vars(varset.begin(), varset.end());
    std::map<std::string, size_t> vidx;
    for (size_t i = 0; i < vars.size(); ++i) vidx[vars[i]] = i;

    std::vector<std::vector<Rat>> A;
    std::vector<Rat> b;
    for (auto& eq : sys.eqs) {
        std::vector<Rat> row(vars.size(), Rat(0));
        for (auto& [v, c] : eq.coeff) row[vidx[v]] = c;
        A.push_back(std::move(row));
        b.push_back(-eq.constant);
    }

    std::vector<Rat> last_x(vars.size(), Rat(0));
    bool have_x = false;
    for (auto& stage : stages) {
        std::vector<Rat> c(vars.size(), Rat(0));
        bool relevant = false;
        for (auto& [v, w] : stage) {
            auto it = vidx.find(v);
            if (it != vidx.end() && !sys.fixed.count(v)) {
                c[it->second] = w;
                relevant = true;
            }
        }
        if (!relevant && have_x) continue;
        lp::LpResult res = lp::Simplex::solve(A, b, c);
        if (res.status == lp::LpResult::Status::Infeasible) return std::nullopt;
        if (res.status == lp::LpResult::Status::Unbounded) {
            // objectives are non-negative combinations; treat as zero stage
            continue;
        }
        last_x = res.x;
        have_x = true;
        // pin this stage's optimum and continue
        A.push_back(c);
        b.push_back(res.value);
    }
    if (!have_x) {
        lp::LpResult res = lp::Simplex::solve(A, b, std::vector<Rat>(vars.size(), Rat(0)));
        if (res.status != lp::LpResult::Status::Optimal) return std::nullopt;
        last_x = res.x;
    }
    Model m = sys.fixed;
    for (size_t i = 0; i < vars.size(); ++i) m[vars[i]] = last_x[i];
    return m;
}

}  // namespace detail_lin

// ---------------------------------------------------------------------------
// Built-in backend

namespace detail_builtin {

// Substitute fixed instantiation values, leaving a linear system.
inline std::optional<detail_lin::LinSys> linearize_with(const CoeffSystem& sys,
                                                        const Model& dvals) {
    detail_lin::LinSys out;
    for (auto& eq : sys.equations) {
        detail_lin::LinEq e;
        for (auto& [m, c] : eq) {
            Rat factor = c;
            std::vector<std::string> rest;
            for (auto& s : m.syms) {
                auto it = dvals.find(s);
                if (it != dvals.end())
                    factor *= it->second;
                else
                    rest.push_back(s);
            }
            if (rest.size() > 1) return std::nullopt;  // still non-linear
            if (rest.empty())
                e.constant += factor;
            else
                e.coeff[rest[0]] += factor;
        }
        for (auto it = e.coeff.begin(); it != e.coeff.end();) {
            if (it->second.is_zero())
                it = e.coeff.erase(it);
            else
                ++it;
        }
        out.eqs.push_back(std::move(e));
    }
    for (auto& [v, val] : dvals) out.fixed[v] = val;
    return out;
}

// LP relaxation: every product becomes a fresh non-negative variable.
inline detail_lin::LinSys relax(const CoeffSystem& sys,
                                std::map<UnknownMono, std::string>& prods,
                                const Model& forced) {
    detail_lin::LinSys out;
    int w = 0;
    for (auto& eq : sys.equations) {
        detail_lin::LinEq e;
        for (auto& [m, c] : eq) {
            if (m.syms.empty()) {
                e.constant += c;
            } else if (m.syms.size() == 1) {
                e.coeff[m.syms[0]] += c;
            } else {
                auto it = prods.find(m);
                if (it == prods.end())
                    it = prods.emplace(m, "w$" + std::to_string(w++)).first;
                e.coeff[it->second] += c;
            }
        }
        out.eqs.push_back(std::move(e));
    }
    for (auto& [v, val] : forced) {
        detail_lin::LinEq e;
        e.coeff[v] = Rat(1);
        e.constant = -val;
        out.eqs.push_back(std::move(e));
    }
    return out;
}

}  // namespace detail_builtin

inline SolveOutcome builtin_solve(const CoeffSystem& sys,
                                  const std::vector<LinearObjective>& stages) {
    SolveOutcome out;
    out.backend = "builtin";

    std::set<std::string> dsyms;
    bool bad_product = false;
    for (auto& eq : sys.equations)
        for (auto& [m, c] : eq) {
            if (m.syms.size() < 2) continue;
            bool has_d = false;
            for (auto& s : m.syms)
                if (sym::is_instantiation(s)) {
                    dsyms.insert(s);
                    has_d = true;
                }
            if (!has_d) bad_product = true;
        }
    if (bad_product) {
        out.status = SolveStatus::Unknown;
        out.detail = "product without an instantiation coefficient";
        return out;
    }

    if (dsyms.empty()) {
        auto lin = detail_builtin::linearize_with(sys, {});
        ++out.queries;
        auto m = detail_lin::lex_solve(*lin, stages);
        if (!m) {
            out.status = SolveStatus::Unsat;
            return out;
        }
        out.status = SolveStatus::Sat;
        out.model = *m;
        return out;
    }

    // relaxation provides both an unsat certificate and candidate values
    auto relax_candidate = [&](const Model& forced) -> std::optional<Model> {
        std::map<UnknownMono, std::string> prods;
        detail_lin::LinSys rsys = detail_builtin::relax(sys, prods, forced);
        LinearObjective obj;
        for (auto& d : dsyms)
            if (!forced.count(d)) obj[d] = Rat(1);
        for (auto& [m, w] : prods) obj[w] = Rat(1);
        ++out.queries;
        auto sol = detail_lin::lex_solve(rsys, {obj});
        if (!sol) return std::nullopt;
        Model cand;
        for (auto& d : dsyms) {
            auto it = sol->find(d);
            cand[d] = it == sol->end() ? Rat(0) : it->second;
        }
        return cand;
    };

    auto plain = relax_candidate({});
    if (!plain) {
        out.status = SolveStatus::Unsat;  // the relaxation is implied by the system
        out.detail = "relaxation infeasible";
        return out;
    }

    std::vector<Model> candidates;
    auto add_candidate = [&](const Model& m) {
        for (auto& c : candidates)
            if (c == m) return;
        candidates.push_back(m);
    };
    {
        // canonical shape first: per-logical coefficients 1, constants minimal
        Model forced;
        for (auto& d : dsyms) {
            auto it = sys.inst_role.find(d);
            if (it != sys.inst_role.end() && it->second == 1) forced[d] = Rat(1);
        }
        if (!forced.empty()) {
            if (auto c = relax_candidate(forced)) add_candidate(*c);
        }
        add_candidate(*plain);
        // scaled fallbacks
        if (!candidates.empty()) {
            Model scaled = candidates.front();
            for (auto& [d, v] : scaled) {
                auto it = sys.inst_role.find(d);
                if (it != sys.inst_role.end() && it->second == 1) continue;
                scaled[d] = v.is_zero() ? Rat(1) : v * Rat(2);
            }
            add_candidate(scaled);
        }
        Model ones;
        for (auto& d : dsyms) ones[d] = Rat(1);
        add_candidate(ones);
    }

    for (auto& cand : candidates) {
        auto lin = detail_builtin::linearize_with(sys, cand);
        if (!lin) continue;
        ++out.queries;
        auto m = detail_lin::lex_solve(*lin, stages);
        if (m) {
            out.status = SolveStatus::Sat;
            out.model = *m;
            return out;
        }
    }
    out.status = SolveStatus::Unknown;
    out.detail = "no instantiation candidate admitted a model";
    return out;
}

// ---------------------------------------------------------------------------
// External backend

namespace detail_ext {

inline std::string run_process(const std::string& cmd) {
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return out;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
    pclose(p);
    return out;
}

inline std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'')
            q += "'\\''";
        else
            q += c;
    }
    return q + "'";
}

// simplest rational in [lo, hi] (fewest continued-fraction terms)
inline Rat simplest_in(const Rat& lo, const Rat& hi) {
    if (lo > hi) return hi;
    if (lo.sign() <= 0 && hi.sign() >= 0) return Rat(0);
    if (hi.sign() < 0) return -simplest_in(-hi, -lo);
    // now 0 < lo <= hi
    BigInt ceil_lo = (-((-lo).floor()));
    if (Rat(ceil_lo) <= hi) return Rat(ceil_lo);
    BigInt i = lo.floor();
    Rat fl = lo - Rat(i), fh = hi - Rat(i);  // 0 < fl <= fh < 1
    return Rat(i) + Rat(1) / simplest_in(Rat(1) / fh, Rat(1) / fl);
}

}  // namespace detail_ext

inline SolveOutcome external_solve(const CoeffSystem& sys,
                                   const std::vector<LinearObjective>& stages,
                                   const SolverConfig& cfg) {
    namespace fs = std::filesystem;
    SolveOutcome out;
    out.backend = cfg.path;
    std::vector<std::pair<LinearObjective, Rat>> pinned;
    int dump_id = 0;

    auto query = [&](const std::vector<std::pair<LinearObjective, Rat>>& extra,
                     const LinearObjective* obj) -> ParsedModel {
        std::string script = emit_smt(sys, extra, obj);
        fs::path dir = cfg.dump_dir.empty() ? fs::temp_directory_path() : fs::path(cfg.dump_dir);
        std::error_code ec;
        fs::create_directories(dir, ec);
        fs::path file = dir / ("peval_query_" + std::to_string(::getpid()) + "_" +
                               std::to_string(dump_id++) + ".smt2");
        {
            std::ofstream f(file);
            f << script;
        }
        std::string cmd = "timeout " + std::to_string(cfg.timeout_sec) + "s " +
                          detail_ext::shell_quote(cfg.path) + " " +
                          detail_ext::shell_quote(file.string()) + " 2>&1";
        ++out.queries;
        std::string output = detail_ext::run_process(cmd);
        if (cfg.dump_dir.empty()) fs::remove(file, ec);
        return parse_model(output);
    };

    ParsedModel base = query(pinned, nullptr);
    if (base.status != SolveStatus::Sat) {
        out.status = base.status;
        return out;
    }
    Model best = base.model;

    auto objval = [](const LinearObjective& o, const Model& m) {
        Rat v(0);
        for (auto& [s, c] : o) {
            auto it = m.find(s);
            if (it != m.end()) v += c * it->second;
        }
        return v;
    };

    for (auto& stage : stages) {
        if (stage.empty()) continue;
        // cheap probe at zero
        {
            auto probe = pinned;
            probe.push_back({stage, Rat(0)});
            ParsedModel r = query(probe, &stage);
            if (r.status == SolveStatus::Sat) {
                best = r.model;
                pinned.push_back({stage, Rat(0)});
                continue;
            }
        }
        Rat v = objval(stage, best);
        for (int it = 0; it < 24; ++it) {
            // try halving, then a strict-improvement step via a shrunken bound
            auto probe = pinned;
            probe.push_back({stage, v * Rat(1, 2)});
            ParsedModel r = query(probe, &stage);
            if (r.status == SolveStatus::Sat) {
                best = r.model;
                v = objval(stage, best);
                continue;
            }
            probe = pinned;
            probe.push_back({stage, v * Rat(255, 256)});
            r = query(probe, &stage);
            if (r.status != SolveStatus::Sat) break;
            best = r.model;
            v = objval(stage, best);
        }
        // snap to the simplest rational nearby
        Rat lo = v * Rat(255, 256);
        Rat snap = detail_ext::simplest_in(lo, v);
        if (snap < v) {
            auto probe = pinned;
            probe.push_back({stage, snap});
            ParsedModel r = query(probe, &stage);
            if (r.status == SolveStatus::Sat) {
                best = r.model;
                v = snap;
            }
        }
        pinned.push_back({stage, v});
    }
    out.status = SolveStatus::Sat;
    out.model = best;
    return out;
}

inline SolveOutcome solve_system(const CoeffSystem& sys,
                                 const std::vector<LinearObjective>& stages,
                                 const SolverConfig& cfg) {
    if (!cfg.path.empty()) return external_solve(sys, stages, cfg);
    return builtin_solve(sys, stages);
}

}  // namespace peval::constraints
