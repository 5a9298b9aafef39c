// SPDX-License-Identifier: Apache-2.0
//
// Handelman linearization: a polynomial goal is certified non-negative over
// the polytope of its premises by writing it as a non-negative combination
// of products of premise polynomials.  Matching coefficients monomial-wise
// over the program/logical variables leaves constraints over the unknown
// template coefficients and the fresh multipliers only.

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "casesplit.hpp"

namespace peval::constraints {

// product of at most two unknown symbols (sorted); empty = constant slot
struct UnknownMono {
    std::vector<std::string> syms;

    bool operator<(const UnknownMono& o) const { return syms < o.syms; }
    bool operator==(const UnknownMono& o) const { return syms == o.syms; }
    std::string to_string() const {
        if (syms.empty()) return "1";
        std::string s;
        for (size_t i = 0; i < syms.size(); ++i) {
            if (i) s += "*";
            s += syms[i];
        }
        return s;
    }
};

using LinearForm = std::map<UnknownMono, Rat>;  // sum entries = 0

struct CoeffSystem {
    std::set<std::string> unknowns;            // all constrained >= 0
    std::vector<LinearForm> equations;
    std::vector<std::string> equation_notes;
    std::map<std::string, int> inst_role;      // instantiation symbols (see templates)

    void note_unknowns(const LinearForm& lf) {
        for (auto& [m, c] : lf)
            for (auto& s : m.syms) unknowns.insert(s);
    }
};

namespace detail_hm {

// split a mixed monomial into its variable part and its unknown part
inline void split_monomial(const Monomial& m, Monomial& vars, UnknownMono& unk) {
    for (auto& [v, e] : m.factors) {
        if (sym::is_unknown(v)) {
            for (int k = 0; k < e; ++k) unk.syms.push_back(v);
        } else {
            vars.factors.push_back({v, e});
        }
    }
}

}  // namespace detail_hm

struct HandelmanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Emit the coefficient-matching equations for one polynomial inequality at
// the given certificate degree.  Fresh multiplier symbols come from `actx`.
inline void handelman_linearize(templates::AnalysisContext& actx, const PolyInequality& pi,
                                int degree, CoeffSystem& sys) {
    // certificate products: multisets of premises of size <= degree
    std::vector<Poly> products{Poly::constant(Rat(1))};
    {
        std::vector<std::vector<int>> idx{{}};
        size_t round_begin = 0;
        for (int d = 1; d <= degree; ++d) {
            size_t round_end = products.size();
            for (size_t k = round_begin; k < round_end; ++k) {
                int lo = idx[k].empty() ? 0 : idx[k].back();
                for (int j = lo; j < int(pi.premises.size()); ++j) {
                    products.push_back(products[k] * pi.premises[j]);
                    auto v = idx[k];
                    v.push_back(j);
                    idx.push_back(v);
                }
            }
            round_begin = round_end;
        }
    }

    // goal split per variable-monomial
    std::map<Monomial, LinearForm> goal_by_mono;
    for (auto& [m, c] : pi.goal.terms()) {
        Monomial vars;
        UnknownMono unk;
        detail_hm::split_monomial(m, vars, unk);
        std::sort(unk.syms.begin(), unk.syms.end());
        if (unk.syms.size() > 2)
            throw HandelmanError("unknown-coefficient product of degree > 2");
        goal_by_mono[vars][unk] += c;
    }
    // product coefficients must be free of unknowns
    for (auto& p : products)
        for (auto& [m, c] : p.terms())
            for (auto& [v, e] : m.factors)
                if (sym::is_unknown(v))
                    throw HandelmanError("premise mentions an unknown coefficient");

    // support pruning: a product whose monomial support is not covered by the
    // goal or by other products would force its multiplier to zero anyway
    std::vector<std::string> lambdas(products.size());
    std::vector<bool> alive(products.size(), true);
    {
        bool changed = true;
        while (changed) {
            changed = false;
            std::map<Monomial, int> cover;
            for (size_t k = 0; k < products.size(); ++k) {
                if (!alive[k]) continue;
                for (auto& [m, c] : products[k].terms()) cover[m]++;
            }
            for (size_t k = 0; k < products.size(); ++k) {
                if (!alive[k]) continue;
                for (auto& [m, c] : products[k].terms()) {
                    bool goal_has = goal_by_mono.count(m) && !goal_by_mono[m].empty();
                    if (!goal_has && cover[m] == 1) {
                        alive[k] = false;
                        changed = true;
                        break;
                    }
                }
            }
        }
    }
    for (size_t k = 0; k < products.size(); ++k)
        if (alive[k]) lambdas[k] = actx.fresh_lambda();

    // per variable-monomial equation: goal coefficient = sum of multiplier
    // contributions
    std::set<Monomial> monos;
    for (auto& [m, lf] : goal_by_mono) monos.insert(m);
    for (size_t k = 0; k < products.size(); ++k)
        if (alive[k])
            for (auto& [m, c] : products[k].terms()) monos.insert(m);

    for (auto& m : monos) {
        LinearForm eq;
        auto git = goal_by_mono.find(m);
        if (git != goal_by_mono.end()) eq = git->second;
        for (size_t k = 0; k < products.size(); ++k) {
            if (!alive[k]) continue;
            auto it = products[k].terms().find(m);
            if (it == products[k].terms().end()) continue;
            eq[UnknownMono{{lambdas[k]}}] -= it->second;
        }
        for (auto it = eq.begin(); it != eq.end();) {
            if (it->second.is_zero())
                it = eq.erase(it);
            else
                ++it;
        }
        if (eq.empty()) continue;
        sys.note_unknowns(eq);
        sys.equations.push_back(eq);
        sys.equation_notes.push_back((pi.origin ? pi.origin->rule : std::string("?")) +
                                     " [" + pi.case_note + "] monomial " + m.to_string());
    }
    for (auto& [s, r] : actx.inst_role) sys.inst_role[s] = r;
}

// convenience: linearize a set of inequalities into one system
inline CoeffSystem build_system(templates::AnalysisContext& actx,
                                const std::vector<PolyInequality>& pis, int degree) {
    CoeffSystem sys;
    for (auto& pi : pis) handelman_linearize(actx, pi, degree, sys);
    // template coefficients may not appear in any equation but still exist
    return sys;
}

// Evaluate a linear form under a model (for certificate checking in tests).
inline Rat eval_form(const LinearForm& lf, const std::map<std::string, Rat>& model) {
    Rat r(0);
    for (auto& [m, c] : lf) {
        Rat t = c;
        for (auto& s : m.syms) {
            auto it = model.find(s);
            t *= it == model.end() ? Rat(0) : it->second;
        }
        r += t;
    }
    return r;
}

}  // namespace peval::constraints
