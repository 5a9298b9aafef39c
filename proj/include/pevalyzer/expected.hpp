// SPDX-License-Identifier: Apache-2.0
//
// Symbolic expectation of a term under a sampling instruction: the term
// counterpart of E_{d(m)}[t[x -> v]].  Finite tables expand by summation;
// Binomial and Hypergeometric draws with non-constant parameters expand by
// moment rules when the term shape admits them.

#pragma once

#include <string>

#include "ast.hpp"
#include "term.hpp"

namespace peval::terms {

namespace detail_exp {

inline std::optional<Rat> const_of(const ExprPtr& e) {
    if (!e) return std::nullopt;
    try {
        Poly p = expr_to_poly(e);
        if (p.is_constant()) return p.constant_value();
    } catch (const UnsupportedError&) {
    }
    return std::nullopt;
}

inline BigInt binom(long long n, long long k) {
    if (k < 0 || k > n) return BigInt(0);
    BigInt r(1);
    for (long long i = 0; i < k; ++i) r = r * BigInt(n - i) / BigInt(i + 1);
    return r;
}

// t as  A + B*x + C*x^2  with A, B, C free of x; the summand guards must not
// mention x (except for the non-negativity atom x >= 0 when the support is
// known non-negative, which may be dropped).
struct MomentShape {
    Term a, b, c;
    bool ok = true;
};

inline MomentShape decompose(const std::string& x, const Term& t, bool support_nonneg,
                             int max_degree) {
    MomentShape sh;
    Atom xnn;
    xnn.lin.add(x, Rat(1));
    xnn.op = Atom::Op::Ge;
    xnn = xnn.normalized();
    for (auto& s : t.summands) {
        if (s.coeff.num.mentions(x)) {
            sh.ok = false;
            return sh;
        }
        for (auto& f : s.coeff.den)
            if (f.mentions(x)) {
                sh.ok = false;
                return sh;
            }
        Norm base = s.norm;
        Guard g = Guard::truth();
        for (auto& at : base.guard.atoms) {
            if (!at.lin.mentions(x)) {
                g.push(at);
            } else if (support_nonneg && at == xnn) {
                continue;  // entailed by the support
            } else {
                sh.ok = false;
                return sh;
            }
        }
        // split the body by powers of x
        Poly a, b, c;
        for (auto& [m, coef] : s.norm.body.terms()) {
            int deg = 0;
            Monomial rest;
            for (auto& [v, e] : m.factors) {
                if (v == x)
                    deg = e;
                else
                    rest.factors.push_back({v, e});
            }
            if (deg == 0)
                a.add_term(m, coef);
            else if (deg == 1)
                b.add_term(rest, coef);
            else if (deg == 2 && max_degree >= 2)
                c.add_term(rest, coef);
            else {
                sh.ok = false;
                return sh;
            }
        }
        if (!a.is_zero()) sh.a.push(s.coeff, Norm{g, a});
        if (!b.is_zero()) sh.b.push(s.coeff, Norm{g, b});
        if (!c.is_zero()) sh.c.push(s.coeff, Norm{g, c});
    }
    sh.a.canonicalize();
    sh.b.canonicalize();
    sh.c.canonicalize();
    return sh;
}

inline Term subst_value(const Term& t, const std::string& x, const Rat& v) {
    return substitute(t, {{x, Poly::constant(v)}});
}

}  // namespace detail_exp

// E[t[x -> d]] as a term; throws UnsupportedError when no symbolic expansion
// exists for the given distribution/term shape.
inline Term expected_term(const std::string& x, const SamplingExpr& d, const Term& t) {
    using detail_exp::const_of;
    using detail_exp::subst_value;
    if (!t.mentions(x)) return t;

    switch (d.kind) {
        case SamplingExpr::Kind::Bernoulli: {
            RatFn p = expr_to_ratfn(d.e1);
            RatFn q = RatFn(Rat(1)) - p;
            Term r = scale(p, subst_value(t, x, Rat(1)));
            r = add(r, scale(q, subst_value(t, x, Rat(0))));
            return r;
        }
        case SamplingExpr::Kind::Uniform: {
            long long lo = d.lo.num().to_ll(), hi = d.hi.num().to_ll();
            if (hi - lo > 100000)
                throw UnsupportedError("Uniform support too large for symbolic expansion");
            Rat w(1, hi - lo + 1);
            Term r;
            for (long long v = lo; v <= hi; ++v)
                r = add(r, scale(w, subst_value(t, x, Rat(v))));
            return r;
        }
        case SamplingExpr::Kind::DiscreteTable: {
            Term r;
            for (auto& [pe, ve] : d.table) {
                RatFn p = expr_to_ratfn(pe);
                Term ti = substitute(t, {{x, expr_to_poly(ve)}});
                r = add(r, scale(p, ti));
            }
            return r;
        }
        case SamplingExpr::Kind::Binomial: {
            auto nc = const_of(d.e1);
            auto pc = const_of(d.e2);
            if (nc && pc) {
                if (!nc->is_integer() || nc->sign() < 0)
                    throw UnsupportedError("Binomial count must be a non-negative integer");
                long long n = nc->num().to_ll();
                if (n > 2000) throw UnsupportedError("Binomial support too large");
                Term r;
                for (long long k = 0; k <= n; ++k) {
                    Rat pr = Rat(detail_exp::binom(n, k));
                    for (long long i = 0; i < k; ++i) pr *= *pc;
                    for (long long i = k; i < n; ++i) pr *= Rat(1) - *pc;
                    r = add(r, scale(pr, subst_value(t, x, Rat(k))));
                }
                return r;
            }
            // E[x] = n p,  E[x^2] = n p (1-p) + (n p)^2
            auto sh = detail_exp::decompose(x, t, /*support_nonneg=*/true, 2);
            if (!sh.ok)
                throw UnsupportedError(
                    "Binomial with dynamic parameters under an unsupported term shape");
            RatFn n = expr_to_ratfn(d.e1), p = expr_to_ratfn(d.e2);
            RatFn mean = n * p;
            RatFn m2 = mean * (RatFn(Rat(1)) - p) + mean * mean;
            Term r = sh.a;
            r = add(r, scale(mean, sh.b));
            r = add(r, scale(m2, sh.c));
            return r;
        }
        case SamplingExpr::Kind::Hypergeometric: {
            auto Nc = const_of(d.e1);
            auto Kc = const_of(d.e2);
            auto nc = const_of(d.e3);
            if (Nc && Kc && nc) {
                long long N = Nc->num().to_ll(), K = Kc->num().to_ll(), n = nc->num().to_ll();
                if (!(N >= 0 && K >= 0 && n >= 0 && K <= N && n <= N))
                    throw UnsupportedError("Hypergeometric parameters out of range");
                Term r;
                BigInt total = detail_exp::binom(N, n);
                for (long long k = std::max(0ll, n + K - N); k <= std::min(n, K); ++k) {
                    Rat pr(detail_exp::binom(K, k) * detail_exp::binom(N - K, n - k), total);
                    r = add(r, scale(pr, subst_value(t, x, Rat(k))));
                }
                return r;
            }
            auto sh = detail_exp::decompose(x, t, /*support_nonneg=*/true, 1);
            if (!sh.ok || !sh.c.is_zero())
                throw UnsupportedError(
                    "Hypergeometric with dynamic parameters under an unsupported term shape");
            RatFn N = expr_to_ratfn(d.e1), K = expr_to_ratfn(d.e2), n = expr_to_ratfn(d.e3);
            RatFn inv_N;  // 1/N
            inv_N.num = Poly::constant(Rat(1));
            for (auto& f : N.den) inv_N.num = inv_N.num * f;
            inv_N.den.push_back(N.num);
            inv_N.normalize();
            RatFn mean = n * K * inv_N;
            Term r = sh.a;
            r = add(r, scale(mean, sh.b));
            return r;
        }
    }
    throw UnsupportedError("expected_term: unknown distribution");
}

}  // namespace peval::terms
