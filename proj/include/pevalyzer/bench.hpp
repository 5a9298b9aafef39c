// SPDX-License-Identifier: Apache-2.0
//
// Benchmark corpus runner.  A manifest lists, per program, the expected
// bound as an expression over the entry parameters -- in the source
// expression grammar extended with max0(e) and Iverson brackets [b] -- and a
// comparison mode.  Bounds are compared by evaluation on a random integer
// grid, never syntactically.

#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "analyze.hpp"

#include "json.hpp"

namespace peval::driver {

// ---------------------------------------------------------------------------
// expected-bound expressions

class BoundExpr {
public:
    static BoundExpr parse(const std::string& text) {
        BoundExpr be;
        auto toks = frontend::lex(text);
        size_t pos = 0;
        be.root_ = parse_sum(toks, pos);
        if (toks[pos].kind != frontend::Token::Kind::End)
            throw FrontendError({"trailing input in bound expression", toks[pos].loc});
        return be;
    }

    Rat eval(const std::map<std::string, Rat>& env) const { return eval_node(root_, env); }

private:
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;
    struct Node {
        enum class K { Const, Var, Add, Sub, Mul, Div, Neg, Max0, Iverson } k;
        Rat value;
        std::string var;
        NodePtr a, b;
        BExprPtr guard;
    };
    NodePtr root_;

    static NodePtr mk(Node n) { return std::make_shared<Node>(std::move(n)); }

    static NodePtr parse_sum(const std::vector<frontend::Token>& t, size_t& i) {
        NodePtr l = parse_prod(t, i);
        while (t[i].kind == frontend::Token::Kind::Punct &&
               (t[i].text == "+" || t[i].text == "-")) {
            auto k = t[i].text == "+" ? Node::K::Add : Node::K::Sub;
            ++i;
            NodePtr r = parse_prod(t, i);
            l = mk({k, {}, {}, l, r, nullptr});
        }
        return l;
    }
    static NodePtr parse_prod(const std::vector<frontend::Token>& t, size_t& i) {
        NodePtr l = parse_atomic(t, i);
        while (t[i].kind == frontend::Token::Kind::Punct &&
               (t[i].text == "*" || t[i].text == "/")) {
            auto k = t[i].text == "*" ? Node::K::Mul : Node::K::Div;
            ++i;
            NodePtr r = parse_atomic(t, i);
            l = mk({k, {}, {}, l, r, nullptr});
        }
        return l;
    }
    static NodePtr parse_atomic(const std::vector<frontend::Token>& t, size_t& i) {
        using frontend::Token;
        if (t[i].kind == Token::Kind::Punct && t[i].text == "-") {
            ++i;
            return mk({Node::K::Neg, {}, {}, parse_atomic(t, i), nullptr, nullptr});
        }
        if (t[i].kind == Token::Kind::Punct && t[i].text == "(") {
            ++i;
            NodePtr e = parse_sum(t, i);
            expect(t, i, ")");
            return e;
        }
        if (t[i].kind == Token::Kind::Punct && t[i].text == "[") {
            // Iverson bracket over a boolean expression
            size_t depth = 1, j = i + 1;
            while (j < t.size() && depth > 0) {
                if (t[j].kind == Token::Kind::Punct && t[j].text == "[") ++depth;
                if (t[j].kind == Token::Kind::Punct && t[j].text == "]") --depth;
                ++j;
            }
            if (depth != 0) throw FrontendError({"unterminated '['", t[i].loc});
            std::ostringstream inner;
            for (size_t k = i + 1; k + 1 < j; ++k) inner << t[k].text << " ";
            // reuse the program parser for the guard by wrapping it in a
            // trivial conditional
            std::string wrapped = "def g(): if (" + inner.str() + ") { skip }; return 0";
            Program p = frontend::parse_program(patch_vars(wrapped, inner.str()));
            BExprPtr guard = find_guard(p.decls[0].body);
            i = j;
            return mk({Node::K::Iverson, {}, {}, nullptr, nullptr, guard});
        }
        if (t[i].kind == Token::Kind::Int) {
            Rat v = Rat::from_string(t[i].text);
            ++i;
            return mk({Node::K::Const, v, {}, nullptr, nullptr, nullptr});
        }
        if (t[i].kind == Token::Kind::Ident) {
            std::string name = t[i].text;
            ++i;
            if (name == "max0") {
                expect(t, i, "(");
                NodePtr e = parse_sum(t, i);
                expect(t, i, ")");
                return mk({Node::K::Max0, {}, {}, e, nullptr, nullptr});
            }
            return mk({Node::K::Var, {}, name, nullptr, nullptr, nullptr});
        }
        throw FrontendError({"expected bound expression", t[i].loc});
    }
    static void expect(const std::vector<frontend::Token>& t, size_t& i, const std::string& p) {
        if (t[i].kind != frontend::Token::Kind::Punct || t[i].text != p)
            throw FrontendError({"expected '" + p + "'", t[i].loc});
        ++i;
    }
    // declare every identifier of the guard as a parameter so scoping passes
    static std::string patch_vars(const std::string& wrapped, const std::string& guard) {
        std::set<std::string> ids;
        for (auto& tok : frontend::lex(guard))
            if (tok.kind == frontend::Token::Kind::Ident && tok.text != "true" &&
                tok.text != "false" && tok.text != "and" && tok.text != "or")
                ids.insert(tok.text);
        std::string params;
        for (auto& id : ids) {
            if (!params.empty()) params += ", ";
            params += id;
        }
        std::string s = wrapped;
        auto pos = s.find("g()");
        s.replace(pos, 3, "g(" + params + ")");
        return s;
    }
    static BExprPtr find_guard(const CommandPtr& c) {
        if (!c) return nullptr;
        if (c->kind == Command::Kind::If && c->guard) return c->guard;
        if (auto g = find_guard(c->c1)) return g;
        return find_guard(c->c2);
    }

    static Rat eval_node(const NodePtr& n, const std::map<std::string, Rat>& env) {
        switch (n->k) {
            case Node::K::Const: return n->value;
            case Node::K::Var: {
                auto it = env.find(n->var);
                if (it == env.end())
                    throw terms::EvalError("unbound variable '" + n->var + "' in bound");
                return it->second;
            }
            case Node::K::Add: return eval_node(n->a, env) + eval_node(n->b, env);
            case Node::K::Sub: return eval_node(n->a, env) - eval_node(n->b, env);
            case Node::K::Mul: return eval_node(n->a, env) * eval_node(n->b, env);
            case Node::K::Div: {
                Rat d = eval_node(n->b, env);
                if (d.is_zero()) throw terms::EvalError("division by zero in bound");
                return eval_node(n->a, env) / d;
            }
            case Node::K::Neg: return -eval_node(n->a, env);
            case Node::K::Max0: {
                Rat v = eval_node(n->a, env);
                return v > Rat(0) ? v : Rat(0);
            }
            case Node::K::Iverson: {
                oracle::Memory omem;
                for (auto& [k, v] : env)
                    if (v.is_integer() && v.num().fits_ll()) omem[k] = v.num().to_ll();
                return oracle::eval_bexpr(n->guard, omem) ? Rat(1) : Rat(0);
            }
        }
        return Rat(0);
    }
};

// ---------------------------------------------------------------------------
// comparisons on a random integer grid

struct CompareOptions {
    long long points = 10000;
    uint64_t seed = 17;
    long long lo = -30, hi = 120;
};

// evaluates |bound - expected| pointwise; returns an error description or
// empty on success
inline std::string compare_bounds(const terms::Term& bound,
                                  const std::vector<std::string>& params,
                                  const std::set<std::string>& globals,
                                  const BoundExpr& expected, const std::string& mode,
                                  const Rat& factor, const CompareOptions& co = {}) {
    std::mt19937_64 rng(co.seed);
    auto rnd = [&]() {
        return co.lo + static_cast<long long>(rng() % static_cast<uint64_t>(co.hi - co.lo + 1));
    };
    for (long long i = 0; i < co.points; ++i) {
        std::map<std::string, Rat> env;
        for (auto& p : params) env[p] = Rat(rnd());
        for (auto& g : globals) env[g] = Rat(rnd());
        Rat b, e;
        try {
            b = terms::eval_term(bound, env);
            e = expected.eval(env);
        } catch (const terms::EvalError& err) {
            return std::string("evaluation failed: ") + err.what();
        }
        auto at = [&]() {
            std::string s;
            for (auto& p : params) s += p + "=" + env[p].to_string() + " ";
            return s;
        };
        if (mode == "eval-equal") {
            if (b != e)
                return "bound " + b.to_string() + " != expected " + e.to_string() + " at " + at();
        } else if (mode == "at-most") {
            if (b > e)
                return "bound " + b.to_string() + " above cap " + e.to_string() + " at " + at();
        } else if (mode == "within-factor") {
            if (factor < Rat(1)) return "within-factor requires a factor of at least 1";
            if (b > e * factor || e > b * factor)
                return "bound " + b.to_string() + " not within factor " + factor.to_string() +
                       " of " + e.to_string() + " at " + at();
        } else {
            return "unknown comparison mode '" + mode + "'";
        }
    }
    return "";
}

// ---------------------------------------------------------------------------
// manifest and corpus

struct BenchEntry {
    std::string file;
    std::string entry;
    std::string expected;
    std::string mode = "eval-equal";
    Rat factor = Rat(1);
    std::string expect_status = "bounded";
    std::string template_kind;  // per-program override
    std::string measure = "return";
    std::string note;
};

struct BenchRow {
    std::string program;
    Status status = Status::Unsupported;
    std::string bound_text;
    bool passed = false;
    std::string detail;
    double wall_ms = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    std::vector<std::string> warnings;
    int passed = 0, failed = 0;
    double total_ms = 0;
};

inline std::vector<BenchEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest " + path);
    nlohmann::json j;
    f >> j;
    std::vector<BenchEntry> out;
    auto arr = j.is_array() ? j : j.at("programs");
    for (auto& e : arr) {
        BenchEntry be;
        be.file = e.at("file").get<std::string>();
        if (e.contains("entry")) be.entry = e["entry"].get<std::string>();
        if (e.contains("expected")) be.expected = e["expected"].get<std::string>();
        if (e.contains("mode")) be.mode = e["mode"].get<std::string>();
        if (e.contains("factor")) be.factor = Rat::from_string(e["factor"].get<std::string>());
        if (e.contains("status")) be.expect_status = e["status"].get<std::string>();
        if (e.contains("template")) be.template_kind = e["template"].get<std::string>();
        if (e.contains("measure")) be.measure = e["measure"].get<std::string>();
        if (e.contains("note")) be.note = e["note"].get<std::string>();
        out.push_back(std::move(be));
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline BenchRow run_bench_entry(const std::string& dir, const BenchEntry& be,
                                const AnalyzeOptions& base) {
    namespace fs = std::filesystem;
    BenchRow row;
    row.program = be.file;
    AnalyzeOptions opt = base;
    if (!be.entry.empty()) opt.entry = be.entry;
    if (!be.template_kind.empty()) opt.template_kind = be.template_kind;
    if (be.measure == "zero") opt.measure = templates::MeasureKind::Zero;
    std::string path = (fs::path(dir) / be.file).string();
    std::string src;
    try {
        src = read_file(path);
    } catch (const std::exception& e) {
        row.detail = e.what();
        return row;
    }
    AnalysisReport rep = analyze_source(src, be.file, opt);
    row.status = rep.status;
    row.bound_text = rep.bound_text;
    row.wall_ms = rep.wall_ms;
    if (status_name(rep.status) != be.expect_status) {
        row.detail = "status " + status_name(rep.status) + ", expected " + be.expect_status +
                     (rep.message.empty() ? "" : " (" + rep.message + ")");
        return row;
    }
    if (rep.status == Status::Bounded && !be.expected.empty()) {
        std::set<std::string> globals;
        if (rep.normalized) globals = rep.normalized->globals;
        std::string err;
        try {
            BoundExpr exp = BoundExpr::parse(be.expected);
            err = compare_bounds(rep.bound, rep.param_names, globals, exp, be.mode, be.factor);
        } catch (const FrontendError& e) {
            err = std::string("bad expected expression: ") + e.what();
        }
        if (!err.empty()) {
            row.detail = err;
            return row;
        }
    }
    row.passed = true;
    return row;
}

// Analyze every manifest entry and check it against its expectation;
// programs present in the directory but missing from the manifest are
// analyzed and reported as warnings.
inline BenchReport run_benchmarks(const std::string& dir, const std::string& manifest_path,
                                  const AnalyzeOptions& base) {
    namespace fs = std::filesystem;
    BenchReport report;
    std::vector<BenchEntry> entries;
    try {
        entries = read_manifest(manifest_path);
    } catch (const std::exception& e) {
        report.warnings.push_back(e.what());
        return report;
    }
    std::set<std::string> listed;
    for (auto& be : entries) {
        listed.insert(be.file);
        BenchRow row = run_bench_entry(dir, be, base);
        report.total_ms += row.wall_ms;
        row.passed ? ++report.passed : ++report.failed;
        report.rows.push_back(std::move(row));
    }
    std::error_code ec;
    for (auto& e : fs::directory_iterator(dir, ec)) {
        if (e.path().extension() == ".pw" && !listed.count(e.path().filename().string()))
            report.warnings.push_back("no manifest entry for " + e.path().filename().string());
    }
    return report;
}

}  // namespace peval::driver
