// SPDX-License-Identifier: Apache-2.0
//
// Multivariate polynomials, linear atoms and rational functions over a flat
// string symbol space.  Symbol kinds are distinguished by reserved markers
// that the surface language cannot produce:
//
//   plain name        program variable
//   l$k               free logical variable
//   la$f$i            logical parameter i of procedure f
//   lr$               logical return value
//   c$k, d$k, h$k     unknown coefficients (template / instantiation / multiplier)

#pragma once

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rational.hpp"

namespace peval {

namespace sym {

inline bool is_unknown(const std::string& s) {
    return s.size() > 2 && (s[0] == 'c' || s[0] == 'd' || s[0] == 'h') && s[1] == '$';
}
inline bool is_instantiation(const std::string& s) {
    return s.size() > 2 && s[0] == 'd' && s[1] == '$';
}
inline bool is_multiplier(const std::string& s) {
    return s.size() > 2 && s[0] == 'h' && s[1] == '$';
}
inline bool is_logical(const std::string& s) {
    return (s.size() >= 2 && s[0] == 'l' && s[1] == '$') ||
           (s.size() >= 3 && s[0] == 'l' && (s[1] == 'a' || s[1] == 'r') && s[2] == '$');
}
inline bool is_free_logical(const std::string& s) {
    return s.size() >= 2 && s[0] == 'l' && s[1] == '$';
}
inline bool is_logical_param(const std::string& s) {
    return s.size() >= 3 && s[0] == 'l' && s[1] == 'a' && s[2] == '$';
}
inline bool is_logical_ret(const std::string& s) { return s == "lr$"; }
inline bool is_program_var(const std::string& s) {
    return !is_unknown(s) && !is_logical(s);
}
// Integer-valued symbols: program variables, logical parameters and the
// logical return value.  Free logicals range over the non-negative reals.
inline bool is_integer_valued(const std::string& s) {
    return is_program_var(s) || is_logical_param(s) || is_logical_ret(s);
}

inline std::string logical_ret() { return "lr$"; }
inline std::string logical_param(const std::string& proc, size_t i) {
    return "la$" + proc + "$" + std::to_string(i);
}
inline std::string free_logical(size_t k) { return "l$" + std::to_string(k); }

// Display form used by pretty-printers and reports.
inline std::string display(const std::string& s) {
    if (is_logical_ret(s)) return "lr";
    if (is_logical_param(s)) {
        auto second = s.find('$', 3);
        return "la_" + s.substr(3, second - 3) +
               (s.substr(second + 1) == "0" ? "" : "_" + s.substr(second + 1));
    }
    if (is_free_logical(s)) {
        std::string k = s.substr(2);
        return k == "0" ? "l" : "l" + k;
    }
    if (is_unknown(s)) {
        std::string r = s;
        r.erase(1, 1);
        return r;
    }
    return s;
}

}  // namespace sym

// A monomial is a sorted exponent vector; the empty monomial is 1.
struct Monomial {
    std::vector<std::pair<std::string, int>> factors;  // sorted by symbol

    bool is_one() const { return factors.empty(); }
    int degree() const {
        int d = 0;
        for (auto& [_, e] : factors) d += e;
        return d;
    }
    bool operator<(const Monomial& o) const { return factors < o.factors; }
    bool operator==(const Monomial& o) const { return factors == o.factors; }

    static Monomial var(const std::string& v) { return Monomial{{{v, 1}}}; }
    static Monomial mul(const Monomial& a, const Monomial& b) {
        Monomial r;
        size_t i = 0, j = 0;
        while (i < a.factors.size() || j < b.factors.size()) {
            if (j >= b.factors.size() ||
                (i < a.factors.size() && a.factors[i].first < b.factors[j].first)) {
                r.factors.push_back(a.factors[i++]);
            } else if (i >= a.factors.size() || b.factors[j].first < a.factors[i].first) {
                r.factors.push_back(b.factors[j++]);
            } else {
                r.factors.push_back({a.factors[i].first,
                                     a.factors[i].second + b.factors[j].second});
                ++i;
                ++j;
            }
        }
        return r;
    }
    std::string to_string() const {
        if (factors.empty()) return "1";
        std::ostringstream os;
        bool first = true;
        for (auto& [v, e] : factors) {
            if (!first) os << "*";
            first = false;
            os << sym::display(v);
            if (e != 1) os << "^" << e;
        }
        return os.str();
    }
};

class Poly {
public:
    Poly() = default;
    explicit Poly(Rat c) {
        if (!c.is_zero()) terms_[Monomial{}] = std::move(c);
    }
    static Poly var(const std::string& v) {
        Poly p;
        p.terms_[Monomial::var(v)] = Rat(1);
        return p;
    }
    static Poly constant(Rat c) { return Poly(std::move(c)); }

    const std::map<Monomial, Rat>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const {
        return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.is_one());
    }
    Rat constant_value() const {
        auto it = terms_.find(Monomial{});
        return it == terms_.end() ? Rat(0) : it->second;
    }
    int degree() const {
        int d = 0;
        for (auto& [m, _] : terms_) d = std::max(d, m.degree());
        return d;
    }

    void add_term(const Monomial& m, const Rat& c) {
        if (c.is_zero()) return;
        auto it = terms_.find(m);
        if (it == terms_.end()) {
            terms_[m] = c;
        } else {
            it->second += c;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    friend Poly operator+(const Poly& a, const Poly& b) {
        Poly r = a;
        for (auto& [m, c] : b.terms_) r.add_term(m, c);
        return r;
    }
    friend Poly operator-(const Poly& a, const Poly& b) {
        Poly r = a;
        for (auto& [m, c] : b.terms_) r.add_term(m, -c);
        return r;
    }
    friend Poly operator-(const Poly& a) { return Poly() - a; }
    friend Poly operator*(const Poly& a, const Poly& b) {
        Poly r;
        for (auto& [ma, ca] : a.terms_)
            for (auto& [mb, cb] : b.terms_) r.add_term(Monomial::mul(ma, mb), ca * cb);
        return r;
    }
    friend Poly operator*(const Poly& a, const Rat& c) {
        Poly r;
        for (auto& [m, cc] : a.terms_) r.add_term(m, cc * c);
        return r;
    }
    friend bool operator==(const Poly& a, const Poly& b) { return a.terms_ == b.terms_; }
    friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }
    bool operator<(const Poly& o) const {
        return rep_less(terms_, o.terms_);
    }

    std::set<std::string> variables() const {
        std::set<std::string> vs;
        for (auto& [m, _] : terms_)
            for (auto& [v, e] : m.factors) vs.insert(v);
        return vs;
    }
    bool mentions(const std::string& v) const {
        for (auto& [m, _] : terms_)
            for (auto& [f, e] : m.factors)
                if (f == v) return true;
        return false;
    }

    // Substitute polynomials for variables (simultaneous).
    Poly substitute(const std::map<std::string, Poly>& su) const {
        Poly r;
        for (auto& [m, c] : terms_) {
            Poly t = Poly::constant(c);
            for (auto& [v, e] : m.factors) {
                auto it = su.find(v);
                Poly base = it == su.end() ? Poly::var(v) : it->second;
                for (int k = 0; k < e; ++k) t = t * base;
            }
            r = r + t;
        }
        return r;
    }

    Rat eval(const std::map<std::string, Rat>& env) const {
        Rat r(0);
        for (auto& [m, c] : terms_) {
            Rat t = c;
            for (auto& [v, e] : m.factors) {
                auto it = env.find(v);
                if (it == env.end()) throw std::runtime_error("Poly::eval: unbound symbol " + v);
                for (int k = 0; k < e; ++k) t *= it->second;
            }
            r += t;
        }
        return r;
    }

    // Attempt exact division; returns nullopt when not divisible.
    std::optional<Poly> divide_exact(const Poly& d) const {
        if (d.is_zero()) return std::nullopt;
        Poly rem = *this, quot;
        auto lead = [](const Poly& p) { return std::prev(p.terms_.end()); };
        auto divides = [](const Monomial& a, const Monomial& b) -> std::optional<Monomial> {
            // b / a if a | b
            Monomial q;
            size_t i = 0;
            for (auto& [v, e] : b.factors) {
                if (i < a.factors.size() && a.factors[i].first == v) {
                    if (a.factors[i].second > e) return std::nullopt;
                    if (e - a.factors[i].second > 0) q.factors.push_back({v, e - a.factors[i].second});
                    ++i;
                } else {
                    q.factors.push_back({v, e});
                }
            }
            if (i != a.factors.size()) return std::nullopt;
            return q;
        };
        int guard = 0;
        while (!rem.is_zero()) {
            if (++guard > 10000) return std::nullopt;
            auto lr = lead(rem);
            auto ld = lead(d);
            auto q = divides(ld->first, lr->first);
            if (!q) return std::nullopt;
            Rat qc = lr->second / ld->second;
            Poly qt;
            qt.add_term(*q, qc);
            quot = quot + qt;
            rem = rem - qt * d;
        }
        return quot;
    }

    std::string to_string() const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (auto& [m, c] : terms_) {
            Rat cc = c;
            if (first) {
                if (cc.sign() < 0) {
                    os << "-";
                    cc = -cc;
                }
            } else {
                os << (cc.sign() < 0 ? " - " : " + ");
                if (cc.sign() < 0) cc = -cc;
            }
            first = false;
            if (m.is_one()) {
                os << cc.to_string();
            } else if (cc == Rat(1)) {
                os << m.to_string();
            } else {
                os << cc.to_string() << "*" << m.to_string();
            }
        }
        return os.str();
    }

private:
    std::map<Monomial, Rat> terms_;

    static bool rep_less(const std::map<Monomial, Rat>& a, const std::map<Monomial, Rat>& b) {
        auto ia = a.begin();
        auto ib = b.begin();
        for (; ia != a.end() && ib != b.end(); ++ia, ++ib) {
            if (ia->first < ib->first) return true;
            if (ib->first < ia->first) return false;
            int c = Rat::cmp(ia->second, ib->second);
            if (c != 0) return c < 0;
        }
        return ia == a.end() && ib != b.end();
    }
};

// Linear expression  c + sum coeff_i * v_i  used for guard atoms.
struct LinExpr {
    std::map<std::string, Rat> coeffs;
    Rat constant;

    bool is_constant() const { return coeffs.empty(); }
    bool mentions(const std::string& v) const { return coeffs.count(v) > 0; }

    void add(const std::string& v, const Rat& c) {
        if (c.is_zero()) return;
        auto it = coeffs.find(v);
        if (it == coeffs.end()) {
            coeffs[v] = c;
        } else {
            it->second += c;
            if (it->second.is_zero()) coeffs.erase(it);
        }
    }
    friend LinExpr operator+(const LinExpr& a, const LinExpr& b) {
        LinExpr r = a;
        r.constant += b.constant;
        for (auto& [v, c] : b.coeffs) r.add(v, c);
        return r;
    }
    friend LinExpr operator-(const LinExpr& a, const LinExpr& b) {
        LinExpr r = a;
        r.constant -= b.constant;
        for (auto& [v, c] : b.coeffs) r.add(v, -c);
        return r;
    }
    friend LinExpr operator*(const LinExpr& a, const Rat& s) {
        LinExpr r;
        r.constant = a.constant * s;
        for (auto& [v, c] : a.coeffs) r.add(v, c * s);
        return r;
    }
    friend bool operator==(const LinExpr& a, const LinExpr& b) {
        return a.constant == b.constant && a.coeffs == b.coeffs;
    }
    bool operator<(const LinExpr& o) const {
        if (constant != o.constant) return Rat::cmp(constant, o.constant) < 0;
        auto ia = coeffs.begin();
        auto ib = o.coeffs.begin();
        for (; ia != coeffs.end() && ib != o.coeffs.end(); ++ia, ++ib) {
            if (ia->first != ib->first) return ia->first < ib->first;
            int c = Rat::cmp(ia->second, ib->second);
            if (c != 0) return c < 0;
        }
        return ia == coeffs.end() && ib != o.coeffs.end();
    }

    Poly to_poly() const {
        Poly p(constant);
        for (auto& [v, c] : coeffs) p.add_term(Monomial::var(v), c);
        return p;
    }
    Rat eval(const std::map<std::string, Rat>& env) const {
        Rat r = constant;
        for (auto& [v, c] : coeffs) {
            auto it = env.find(v);
            if (it == env.end()) throw std::runtime_error("LinExpr::eval: unbound " + v);
            r += c * it->second;
        }
        return r;
    }
    bool all_integer_symbols() const {
        for (auto& [v, _] : coeffs)
            if (!sym::is_integer_valued(v)) return false;
        return true;
    }
    // Smallest positive scale making every coefficient and the constant integral.
    LinExpr integer_scaled() const {
        BigInt lcm(1);
        auto fold = [&lcm](const Rat& r) {
            BigInt d = r.den();
            BigInt g = BigInt::gcd(BigInt::abs(lcm), d);
            lcm = lcm / g * d;
        };
        fold(constant);
        for (auto& [v, c] : coeffs) fold(c);
        return *this * Rat(lcm);
    }
    std::string to_string() const { return to_poly().to_string(); }
};

// Rational function with an explicit factor list denominator.  Denominator
// factors only ever come from dynamic sampling probabilities, so they range
// over program variables.
struct RatFn {
    Poly num;
    std::vector<Poly> den;  // each factor non-constant; constants folded into num

    RatFn() = default;
    explicit RatFn(Rat c) : num(Poly::constant(std::move(c))) {}
    explicit RatFn(Poly p) : num(std::move(p)) {}

    bool is_zero() const { return num.is_zero(); }
    bool is_polynomial() const { return den.empty(); }

    void normalize() {
        std::vector<Poly> kept;
        for (auto& f : den) {
            if (f.is_constant()) {
                Rat c = f.constant_value();
                if (c.is_zero()) throw std::domain_error("RatFn: zero denominator factor");
                num = num * (Rat(1) / c);
            } else if (auto q = num.divide_exact(f)) {
                num = *q;
            } else {
                kept.push_back(f);
            }
        }
        std::sort(kept.begin(), kept.end());
        den = std::move(kept);
        if (num.is_zero()) den.clear();
    }

    friend RatFn operator*(const RatFn& a, const RatFn& b) {
        RatFn r;
        r.num = a.num * b.num;
        r.den = a.den;
        r.den.insert(r.den.end(), b.den.begin(), b.den.end());
        r.normalize();
        return r;
    }
    friend RatFn operator*(const RatFn& a, const Rat& c) {
        RatFn r = a;
        r.num = r.num * c;
        if (r.num.is_zero()) r.den.clear();
        return r;
    }
    friend RatFn operator+(const RatFn& a, const RatFn& b) {
        // merge common factors (syntactic multiset intersection)
        std::vector<Poly> common, ra = a.den, rb = b.den;
        for (auto& f : ra) {
            auto it = std::find(rb.begin(), rb.end(), f);
            if (it != rb.end()) {
                common.push_back(f);
                rb.erase(it);
            }
        }
        std::vector<Poly> aonly;
        {
            std::vector<Poly> c2 = common;
            for (auto& f : ra) {
                auto it = std::find(c2.begin(), c2.end(), f);
                if (it != c2.end())
                    c2.erase(it);
                else
                    aonly.push_back(f);
            }
        }
        Poly pa = a.num, pb = b.num;
        for (auto& f : rb) pa = pa * f;
        for (auto& f : aonly) pb = pb * f;
        RatFn r;
        r.num = pa + pb;
        r.den = common;
        r.den.insert(r.den.end(), aonly.begin(), aonly.end());
        r.den.insert(r.den.end(), rb.begin(), rb.end());
        r.normalize();
        return r;
    }
    friend RatFn operator-(const RatFn& a, const RatFn& b) { return a + b * Rat(-1); }
    friend bool operator==(const RatFn& a, const RatFn& b) {
        return a.num == b.num && a.den == b.den;
    }
    bool operator<(const RatFn& o) const {
        if (num != o.num) return num < o.num;
        return den < o.den;
    }

    RatFn substitute(const std::map<std::string, Poly>& su) const {
        RatFn r;
        r.num = num.substitute(su);
        for (auto& f : den) r.den.push_back(f.substitute(su));
        r.normalize();
        return r;
    }

    std::optional<Rat> constant_value() const {
        if (!den.empty() || !num.is_constant()) return std::nullopt;
        return num.constant_value();
    }

    // Exact evaluation; nullopt when a denominator vanishes.
    std::optional<Rat> eval(const std::map<std::string, Rat>& env) const {
        Rat n = num.eval(env);
        for (auto& f : den) {
            Rat d = f.eval(env);
            if (d.is_zero()) return std::nullopt;
            n /= d;
        }
        return n;
    }

    std::set<std::string> variables() const {
        std::set<std::string> vs = num.variables();
        for (auto& f : den)
            for (auto& v : f.variables()) vs.insert(v);
        return vs;
    }

    std::string to_string() const {
        std::string s = num.to_string();
        if (den.empty()) return s;
        std::string d;
        for (auto& f : den) {
            if (!d.empty()) d += "*";
            d += "(" + f.to_string() + ")";
        }
        if (num.terms().size() > 1) s = "(" + s + ")";
        return s + "/" + d;
    }
};

}  // namespace peval
