// SPDX-License-Identifier: Apache-2.0
//
// Ground-truth expected values.  exact_expectation computes the finite
// approximations et^(i): procedure calls beyond the depth budget contribute
// zero, loops unroll up to a cap, demonic choice takes the maximum.  The
// result is an exact rational lower bound, non-decreasing in the depth.
// monte_carlo estimates the same quantity operationally with a seeded PRNG.

#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "ast.hpp"
#include "rational.hpp"

namespace peval::oracle {

struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Memory = std::map<std::string, long long>;

inline long long checked_ll(const Rat& r, const char* what) {
    if (!r.is_integer()) throw OracleError(std::string(what) + ": non-integer value");
    if (!r.num().fits_ll()) throw OracleError(std::string(what) + ": value overflow");
    return r.num().to_ll();
}

inline Rat eval_expr(const ExprPtr& e, const Memory& m) {
    switch (e->kind) {
        case Expr::Kind::Var: {
            auto it = m.find(e->var);
            if (it == m.end()) throw OracleError("unbound variable '" + e->var + "'");
            return Rat(it->second);
        }
        case Expr::Kind::Const: return e->value;
        case Expr::Kind::Neg: return -eval_expr(e->lhs, m);
        case Expr::Kind::Add: return eval_expr(e->lhs, m) + eval_expr(e->rhs, m);
        case Expr::Kind::Sub: return eval_expr(e->lhs, m) - eval_expr(e->rhs, m);
        case Expr::Kind::Mul: return eval_expr(e->lhs, m) * eval_expr(e->rhs, m);
        case Expr::Kind::Div: {
            Rat d = eval_expr(e->rhs, m);
            if (d.is_zero()) throw OracleError("division by zero");
            return eval_expr(e->lhs, m) / d;
        }
    }
    throw OracleError("eval_expr");
}
inline long long eval_int(const ExprPtr& e, const Memory& m) {
    return checked_ll(eval_expr(e, m), "expression");
}

inline bool eval_bexpr(const BExprPtr& b, const Memory& m) {
    switch (b->kind) {
        case BExpr::Kind::Cmp: {
            Rat l = eval_expr(b->el, m), r = eval_expr(b->er, m);
            switch (b->op) {
                case CmpOp::Lt: return l < r;
                case CmpOp::Le: return l <= r;
                case CmpOp::Gt: return l > r;
                case CmpOp::Ge: return l >= r;
                case CmpOp::Eq: return l == r;
                case CmpOp::Ne: return l != r;
            }
            return false;
        }
        case BExpr::Kind::And: return eval_bexpr(b->bl, m) && eval_bexpr(b->br, m);
        case BExpr::Kind::Or: return eval_bexpr(b->bl, m) || eval_bexpr(b->br, m);
        case BExpr::Kind::Not: return !eval_bexpr(b->bl, m);
        case BExpr::Kind::Const: return b->value;
        case BExpr::Kind::Star: throw OracleError("'*' guard has no truth value");
    }
    return false;
}

// Finite support of a sampling instruction at a memory, with exact
// probabilities.  Probability well-formedness is checked here at runtime.
inline std::vector<std::pair<Rat, long long>> support(const SamplingExpr& d, const Memory& m) {
    auto check_p = [](const Rat& p) {
        if (p < Rat(0) || p > Rat(1)) throw OracleError("probability outside [0, 1]");
    };
    std::vector<std::pair<Rat, long long>> out;
    switch (d.kind) {
        case SamplingExpr::Kind::Bernoulli: {
            Rat p = eval_expr(d.e1, m);
            check_p(p);
            if (!p.is_zero()) out.push_back({p, 1});
            if (p != Rat(1)) out.push_back({Rat(1) - p, 0});
            break;
        }
        case SamplingExpr::Kind::Uniform: {
            long long lo = d.lo.num().to_ll(), hi = d.hi.num().to_ll();
            Rat w(1, hi - lo + 1);
            for (long long v = lo; v <= hi; ++v) out.push_back({w, v});
            break;
        }
        case SamplingExpr::Kind::Binomial: {
            long long n = checked_ll(eval_expr(d.e1, m), "Binomial count");
            if (n < 0 || n > 20000) throw OracleError("Binomial count out of range");
            Rat p = eval_expr(d.e2, m);
            check_p(p);
            Rat coeff(1);
            std::vector<Rat> pk(n + 1), qk(n + 1);
            pk[0] = Rat(1);
            qk[0] = Rat(1);
            for (long long i = 1; i <= n; ++i) {
                pk[i] = pk[i - 1] * p;
                qk[i] = qk[i - 1] * (Rat(1) - p);
            }
            for (long long k = 0; k <= n; ++k) {
                if (k > 0) coeff = coeff * Rat(n - k + 1) / Rat(k);
                Rat pr = coeff * pk[k] * qk[n - k];
                if (!pr.is_zero()) out.push_back({pr, k});
            }
            break;
        }
        case SamplingExpr::Kind::Hypergeometric: {
            long long N = checked_ll(eval_expr(d.e1, m), "population");
            long long K = checked_ll(eval_expr(d.e2, m), "successes");
            long long n = checked_ll(eval_expr(d.e3, m), "draws");
            if (!(N >= 0 && K >= 0 && K <= N && n >= 0 && n <= N))
                throw OracleError("Hypergeometric parameters out of range");
            auto binom = [](long long a, long long b) {
                BigInt r(1);
                if (b < 0 || b > a) return BigInt(0);
                for (long long i = 0; i < b; ++i) r = r * BigInt(a - i) / BigInt(i + 1);
                return r;
            };
            BigInt total = binom(N, n);
            for (long long k = std::max(0ll, n + K - N); k <= std::min(n, K); ++k) {
                Rat pr(binom(K, k) * binom(N - K, n - k), total);
                if (!pr.is_zero()) out.push_back({pr, k});
            }
            break;
        }
        case SamplingExpr::Kind::DiscreteTable: {
            Rat sum(0);
            for (auto& [pe, ve] : d.table) {
                Rat p = eval_expr(pe, m);
                check_p(p);
                sum += p;
                if (!p.is_zero())
                    out.push_back({p, checked_ll(eval_expr(ve, m), "Discrete value")});
            }
            if (sum != Rat(1)) throw OracleError("Discrete probabilities do not sum to 1");
            break;
        }
    }
    return out;
}

struct ExactConfig {
    int unroll_cap = 96;          // loop iterations explored per entry
    long long state_cap = 4000000;  // explored configurations
};

namespace detail {

struct ProcInfo {
    const ProcedureDecl* decl;
    bool nondet = false;  // itself or transitively through calls
};

inline std::map<std::string, ProcInfo> proc_infos(const Program& p) {
    std::map<std::string, ProcInfo> info;
    for (auto& d : p.decls) info[d.name] = {&d, ast::contains_nondet(d.body)};
    bool changed = true;
    while (changed) {
        changed = false;
        for (auto& d : p.decls) {
            if (info[d.name].nondet) continue;
            std::set<std::string> callees;
            ast::collect_called_procs(d.body, callees);
            for (auto& c : callees) {
                auto it = info.find(c);
                if (it != info.end() && it->second.nondet) {
                    info[d.name].nondet = true;
                    changed = true;
                    break;
                }
            }
        }
    }
    return info;
}

using RetKey = std::pair<long long, Memory>;  // (value, global memory)

struct ExactCtx {
    const Program& prog;
    std::map<std::string, ProcInfo> infos;
    ExactConfig cfg;
    long long states = 0;
    // memo: (proc, args, globals, depth) -> outcome distribution
    std::map<std::tuple<std::string, std::vector<long long>, Memory, int>,
             std::map<RetKey, Rat>>
        memo;

    explicit ExactCtx(const Program& p, ExactConfig c)
        : prog(p), infos(proc_infos(p)), cfg(c) {}

    void tick() {
        if (++states > cfg.state_cap) throw OracleError("state cap exceeded");
    }

    Memory globals_of(const Memory& m) const {
        Memory g;
        for (auto& gv : prog.globals) {
            auto it = m.find(gv);
            g[gv] = it == m.end() ? 0 : it->second;
        }
        return g;
    }

    struct CmdDist {
        std::map<Memory, Rat> cont;
        std::map<RetKey, Rat> rets;
    };

    std::map<RetKey, Rat> procdist(const std::string& name,
                                   const std::vector<long long>& args, const Memory& g,
                                   int depth) {
        if (depth <= 0) return {};
        auto key = std::make_tuple(name, args, g, depth);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        const ProcInfo& pi = infos.at(name);
        Memory m = g;
        for (size_t i = 0; i < pi.decl->params.size(); ++i)
            m[pi.decl->params[i]] = args[i];
        CmdDist d = statedist(pi.decl->body, m, depth - 1);
        std::map<RetKey, Rat> out = std::move(d.rets);
        // fallthrough supplies a default return value of zero
        for (auto& [mem, pr] : d.cont) {
            RetKey k{0, globals_of(mem)};
            out[k] += pr;
        }
        memo[key] = out;
        return out;
    }

    CmdDist statedist(const CommandPtr& c, const Memory& m, int depth) {
        tick();
        CmdDist d;
        switch (c->kind) {
            case Command::Kind::Skip: d.cont[m] = Rat(1); break;
            case Command::Kind::Sample: {
                for (auto& [p, v] : support(c->dist, m)) {
                    Memory m2 = m;
                    m2[c->var] = v;
                    d.cont[m2] += p;
                }
                break;
            }
            case Command::Kind::Call: {
                std::vector<long long> args;
                for (auto& a : c->args) args.push_back(eval_int(a, m));
                auto sub = procdist(c->proc, args, globals_of(m), depth);
                for (auto& [rk, p] : sub) {
                    Memory m2 = m;
                    for (auto& [gv, gvv] : rk.second) m2[gv] = gvv;
                    m2[c->var] = rk.first;
                    d.cont[m2] += p;
                }
                break;
            }
            case Command::Kind::Ret: {
                RetKey k{eval_int(c->expr, m), globals_of(m)};
                d.rets[k] = Rat(1);
                break;
            }
            case Command::Kind::Local: {
                Memory m2 = m;
                m2[c->var] = eval_int(c->expr, m);
                return statedist(c->c1, m2, depth);
            }
            case Command::Kind::Seq: {
                CmdDist d1 = statedist(c->c1, m, depth);
                d.rets = std::move(d1.rets);
                for (auto& [m1, p1] : d1.cont) {
                    CmdDist d2 = statedist(c->c2, m1, depth);
                    for (auto& [m2, p2] : d2.cont) d.cont[m2] += p1 * p2;
                    for (auto& [rk, p2] : d2.rets) d.rets[rk] += p1 * p2;
                }
                break;
            }
            case Command::Kind::If:
                return statedist(eval_bexpr(c->guard, m) ? c->c1 : c->c2, m, depth);
            case Command::Kind::While: {
                std::map<Memory, Rat> frontier{{m, Rat(1)}};
                for (int iter = 0; iter <= cfg.unroll_cap && !frontier.empty(); ++iter) {
                    std::map<Memory, Rat> next;
                    for (auto& [mem, p] : frontier) {
                        if (!eval_bexpr(c->guard, mem)) {
                            d.cont[mem] += p;
                            continue;
                        }
                        if (iter == cfg.unroll_cap) continue;  // truncated mass
                        CmdDist body = statedist(c->c1, mem, depth);
                        for (auto& [m2, p2] : body.cont) next[m2] += p * p2;
                        for (auto& [rk, p2] : body.rets) d.rets[rk] += p * p2;
                    }
                    frontier = std::move(next);
                }
                break;
            }
            case Command::Kind::NonDet:
                throw OracleError("internal: demonic choice in distribution mode");
        }
        return d;
    }

    // Continuation-passing evaluation, used whenever demonic choice is
    // reachable; exact but unmemoized.
    using Kont = std::function<Rat(const Memory&)>;
    using RetKont = std::function<Rat(long long, const Memory&)>;

    Rat eval_cmd(const CommandPtr& c, const Memory& m, const Kont& g, const RetKont& f,
                 int depth) {
        tick();
        switch (c->kind) {
            case Command::Kind::Skip: return g(m);
            case Command::Kind::Sample: {
                Rat total(0);
                for (auto& [p, v] : support(c->dist, m)) {
                    Memory m2 = m;
                    m2[c->var] = v;
                    total += p * g(m2);
                }
                return total;
            }
            case Command::Kind::Call: {
                if (depth <= 0) return Rat(0);
                std::vector<long long> args;
                for (auto& a : c->args) args.push_back(eval_int(a, m));
                const ProcInfo& pi = infos.at(c->proc);
                auto use = [&](long long v, const Memory& g2) {
                    Memory m2 = m;
                    for (auto& [gv, gvv] : g2) m2[gv] = gvv;
                    m2[c->var] = v;
                    return g(m2);
                };
                if (!pi.nondet) {
                    Rat total(0);
                    for (auto& [rk, p] : procdist(c->proc, args, globals_of(m), depth))
                        total += p * use(rk.first, rk.second);
                    return total;
                }
                Memory mc = globals_of(m);
                for (size_t i = 0; i < pi.decl->params.size(); ++i)
                    mc[pi.decl->params[i]] = args[i];
                RetKont f2 = [&](long long v, const Memory& mem2) {
                    return use(v, globals_of(mem2));
                };
                Kont g2 = [&](const Memory& mem2) { return f2(0, mem2); };
                return eval_cmd(pi.decl->body, mc, g2, f2, depth - 1);
            }
            case Command::Kind::Ret: return f(eval_int(c->expr, m), m);
            case Command::Kind::Local: {
                Memory m2 = m;
                m2[c->var] = eval_int(c->expr, m);
                return eval_cmd(c->c1, m2, g, f, depth);
            }
            case Command::Kind::Seq: {
                Kont mid = [&](const Memory& m1) { return eval_cmd(c->c2, m1, g, f, depth); };
                return eval_cmd(c->c1, m, mid, f, depth);
            }
            case Command::Kind::If:
                return eval_cmd(eval_bexpr(c->guard, m) ? c->c1 : c->c2, m, g, f, depth);
            case Command::Kind::While: {
                std::function<Rat(int, const Memory&)> w = [&](int k, const Memory& mem) -> Rat {
                    if (!eval_bexpr(c->guard, mem)) return g(mem);
                    if (k <= 0) return Rat(0);
                    Kont again = [&, k](const Memory& m2) { return w(k - 1, m2); };
                    return eval_cmd(c->c1, mem, again, f, depth);
                };
                return w(cfg.unroll_cap, m);
            }
            case Command::Kind::NonDet: {
                Rat a = eval_cmd(c->c1, m, g, f, depth);
                Rat b = eval_cmd(c->c2, m, g, f, depth);
                return a >= b ? a : b;
            }
        }
        return Rat(0);
    }
};

}  // namespace detail

// Measured continuation: expectation of f(return value, final globals).
using Measure = std::function<Rat(long long, const Memory&)>;

inline Measure measure_return() {
    return [](long long v, const Memory&) { return v > 0 ? Rat(v) : Rat(0); };
}
inline Measure measure_zero() {
    return [](long long, const Memory&) { return Rat(0); };
}

// et^(depth) of the entry procedure under the given measure; an exact lower
// bound on the true expectation, non-decreasing in depth.
inline Rat exact_expectation(const Program& p, const std::string& entry,
                             const std::vector<long long>& args, const Memory& globals,
                             int depth, const Measure& measure = measure_return(),
                             ExactConfig cfg = {}) {
    const ProcedureDecl* d = p.find(entry);
    if (!d) throw OracleError("unknown entry procedure '" + entry + "'");
    if (d->arity() != args.size()) throw OracleError("entry arity mismatch");
    detail::ExactCtx ctx(p, cfg);
    Memory g;
    for (auto& gv : p.globals) {
        auto it = globals.find(gv);
        g[gv] = it == globals.end() ? 0 : it->second;
    }
    if (!ctx.infos.at(entry).nondet) {
        Rat total(0);
        for (auto& [rk, pr] : ctx.procdist(entry, args, g, depth))
            total += pr * measure(rk.first, rk.second);
        return total;
    }
    if (depth <= 0) return Rat(0);
    Memory m = g;
    for (size_t i = 0; i < d->params.size(); ++i) m[d->params[i]] = args[i];
    detail::ExactCtx::RetKont f = [&](long long v, const Memory& mem) {
        return measure(v, ctx.globals_of(mem));
    };
    detail::ExactCtx::Kont gk = [&](const Memory& mem) { return f(0, mem); };
    return ctx.eval_cmd(d->body, m, gk, f, depth - 1);
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimation

struct McResult {
    double mean = 0;
    double stderr_ = 0;
    long long truncated = 0;
    long long samples = 0;
};

namespace detail_mc {

struct Trunc {};  // a sample ran over budget

struct McCtx {
    const Program& prog;
    std::mt19937_64 rng;
    int maxdepth;
    long long step_cap;
    long long steps = 0;
    bool truncated_flag = false;

    McCtx(const Program& p, uint64_t seed, int maxdepth_, long long step_cap_)
        : prog(p), rng(seed), maxdepth(maxdepth_), step_cap(step_cap_) {}

    uint64_t draw_below(uint64_t n) {  // uniform in [0, n), rejection-exact
        if (n == 0) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t r;
        do {
            r = rng();
        } while (r >= limit);
        return r % n;
    }

    long long sample_dist(const SamplingExpr& d, const Memory& m) {
        auto sup = support(d, m);
        // draw an integer below the common denominator and walk the CDF
        BigInt den(1);
        for (auto& [p, v] : sup) {
            BigInt pd = p.den();
            BigInt g = BigInt::gcd(den, pd);
            den = den / g * pd;
        }
        if (!den.fits_ll()) throw OracleError("probability denominator too large");
        uint64_t D = static_cast<uint64_t>(den.to_ll());
        uint64_t r = draw_below(D);
        BigInt acc(0);
        for (auto& [p, v] : sup) {
            acc = acc + p.num() * (den / p.den());
            if (BigInt::cmp(BigInt(static_cast<long long>(r)), acc) < 0) return v;
        }
        return sup.back().second;
    }

    void tick() {
        if (++steps > step_cap) {
            truncated_flag = true;
            throw Trunc{};
        }
    }

    Memory globals_of(const Memory& m) const {
        Memory g;
        for (auto& gv : prog.globals) {
            auto it = m.find(gv);
            g[gv] = it == m.end() ? 0 : it->second;
        }
        return g;
    }

    using Kont = std::function<double(const Memory&)>;
    using RetKont = std::function<double(long long, const Memory&)>;

    double run_cmd(const CommandPtr& c, const Memory& m, const Kont& g, const RetKont& f,
                   int depth) {
        tick();
        switch (c->kind) {
            case Command::Kind::Skip: return g(m);
            case Command::Kind::Sample: {
                Memory m2 = m;
                m2[c->var] = sample_dist(c->dist, m);
                return g(m2);
            }
            case Command::Kind::Call: {
                std::vector<long long> args;
                for (auto& a : c->args) args.push_back(eval_int(a, m));
                auto use = [&](long long v, const Memory& g2) {
                    Memory m2 = m;
                    for (auto& [gv, gvv] : g2) m2[gv] = gvv;
                    m2[c->var] = v;
                    return g(m2);
                };
                if (depth <= 0) {
                    // beyond budget: default value, partial run continues
                    truncated_flag = true;
                    return use(0, globals_of(m));
                }
                const ProcedureDecl* pd = prog.find(c->proc);
                Memory mc = globals_of(m);
                for (size_t i = 0; i < pd->params.size(); ++i)
                    mc[pd->params[i]] = args[i];
                RetKont f2 = [&](long long v, const Memory& mem2) {
                    return use(v, globals_of(mem2));
                };
                Kont g2 = [&](const Memory& mem2) { return f2(0, mem2); };
                return run_cmd(pd->body, mc, g2, f2, depth - 1);
            }
            case Command::Kind::Ret: return f(eval_int(c->expr, m), m);
            case Command::Kind::Local: {
                Memory m2 = m;
                m2[c->var] = eval_int(c->expr, m);
                return run_cmd(c->c1, m2, g, f, depth);
            }
            case Command::Kind::Seq: {
                Kont mid = [&](const Memory& m1) { return run_cmd(c->c2, m1, g, f, depth); };
                return run_cmd(c->c1, m, mid, f, depth);
            }
            case Command::Kind::If:
                return run_cmd(eval_bexpr(c->guard, m) ? c->c1 : c->c2, m, g, f, depth);
            case Command::Kind::While: {
                std::function<double(const Memory&)> w = [&](const Memory& mem) -> double {
                    tick();
                    if (!eval_bexpr(c->guard, mem)) return g(mem);
                    Kont again = [&](const Memory& m2) { return w(m2); };
                    return run_cmd(c->c1, mem, again, f, depth);
                };
                return w(m);
            }
            case Command::Kind::NonDet: {
                // demonic: independent sub-runs of both branches, keep the max
                double a, b;
                try {
                    a = run_cmd(c->c1, m, g, f, depth);
                } catch (const Trunc&) {
                    a = 0;
                }
                try {
                    b = run_cmd(c->c2, m, g, f, depth);
                } catch (const Trunc&) {
                    b = 0;
                }
                return std::max(a, b);
            }
        }
        return 0;
    }
};

}  // namespace detail_mc

// Sampling is split into a fixed number of chunks with derived seeds, so the
// estimate is reproducible regardless of how many worker threads run them.
inline McResult monte_carlo(const Program& p, const std::string& entry,
                            const std::vector<long long>& args, const Memory& globals,
                            long long samples, uint64_t seed, int maxdepth = 10000,
                            long long steps_per_sample = 30000,
                            const std::function<double(long long)>& value_of =
                                [](long long v) { return v > 0 ? double(v) : 0.0; }) {
    const ProcedureDecl* d = p.find(entry);
    if (!d) throw OracleError("unknown entry procedure '" + entry + "'");
    if (d->arity() != args.size()) throw OracleError("entry arity mismatch");
    Memory g0;
    for (auto& gv : p.globals) {
        auto it = globals.find(gv);
        g0[gv] = it == globals.end() ? 0 : it->second;
    }

    constexpr int kChunks = 16;
    struct ChunkStat {
        double sum = 0, sumsq = 0;
        long long truncated = 0;
    };
    std::vector<ChunkStat> stats(kChunks);
    std::vector<long long> counts(kChunks, samples / kChunks);
    counts[0] += samples % kChunks;

    auto run_chunk = [&](int ci) {
        detail_mc::McCtx ctx(p, seed * 0x9e3779b97f4a7c15ull + ci + 1, maxdepth,
                             steps_per_sample);
        ChunkStat st;
        for (long long s = 0; s < counts[ci]; ++s) {
            ctx.steps = 0;
            ctx.truncated_flag = false;
            Memory m = g0;
            for (size_t i = 0; i < d->params.size(); ++i) m[d->params[i]] = args[i];
            detail_mc::McCtx::RetKont f = [&](long long v, const Memory&) {
                return value_of(v);
            };
            detail_mc::McCtx::Kont gk = [&](const Memory&) { return value_of(0); };
            double v;
            try {
                v = ctx.run_cmd(d->body, m, gk, f, ctx.maxdepth);
            } catch (const detail_mc::Trunc&) {
                v = 0;
            }
            if (ctx.truncated_flag) ++st.truncated;
            st.sum += v;
            st.sumsq += v * v;
        }
        stats[ci] = st;
    };

    unsigned hw = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    if (hw == 1 || samples < 2048) {
        for (int ci = 0; ci < kChunks; ++ci) run_chunk(ci);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < hw; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    int ci = next.fetch_add(1);
                    if (ci >= kChunks) break;
                    run_chunk(ci);
                }
            });
        for (auto& t : pool) t.join();
    }

    McResult res;
    res.samples = samples;
    double sum = 0, sumsq = 0;
    for (auto& st : stats) {
        sum += st.sum;
        sumsq += st.sumsq;
        res.truncated += st.truncated;
    }
    res.mean = sum / double(samples);
    double var = samples > 1 ? (sumsq - sum * sum / double(samples)) / double(samples - 1)
                             : 0.0;
    res.stderr_ = var > 0 ? std::sqrt(var / double(samples)) : 0.0;
    return res;
}

}  // namespace peval::oracle
