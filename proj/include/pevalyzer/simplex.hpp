// SPDX-License-Identifier: Apache-2.0
//
// Exact rational linear programming: minimize c.x subject to A x = b, x >= 0.
// Two-phase dense simplex with Bland's rule, so termination is guaranteed.

#pragma once

#include <vector>

#include "rational.hpp"

namespace peval::lp {

struct LpResult {
    enum class Status { Optimal, Infeasible, Unbounded } status;
    std::vector<Rat> x;
    Rat value;
};

class Simplex {
public:
    // A: m rows of n entries; solves min c.x, A x = b, x >= 0.
    static LpResult solve(std::vector<std::vector<Rat>> A, std::vector<Rat> b,
                          const std::vector<Rat>& c) {
        size_t m = A.size(), n = c.size();
        for (size_t i = 0; i < m; ++i)
            if (b[i] < Rat(0)) {
                for (auto& v : A[i]) v = -v;
                b[i] = -b[i];
            }
        // tableau with artificial columns
        size_t cols = n + m;
        std::vector<std::vector<Rat>> T(m, std::vector<Rat>(cols + 1, Rat(0)));
        std::vector<size_t> basis(m);
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < n; ++j) T[i][j] = A[i][j];
            T[i][n + i] = Rat(1);
            T[i][cols] = b[i];
            basis[i] = n + i;
        }

        // phase 1: minimize the sum of artificials
        std::vector<Rat> cost1(cols, Rat(0));
        for (size_t j = n; j < cols; ++j) cost1[j] = Rat(1);
        Rat v1 = run(T, basis, cost1, cols, /*barred_from=*/cols);
        if (v1 > Rat(0)) return {LpResult::Status::Infeasible, {}, Rat(0)};
        // drive artificials out of the basis where possible
        for (size_t i = 0; i < m; ++i) {
            if (basis[i] < n) continue;
            size_t enter = cols;
            for (size_t j = 0; j < n; ++j)
                if (!T[i][j].is_zero()) {
                    enter = j;
                    break;
                }
            if (enter < cols) pivot(T, basis, i, enter);
            // otherwise the row is redundant; the artificial stays basic at 0
        }

        // phase 2: original objective, artificial columns barred
        std::vector<Rat> cost2(cols, Rat(0));
        for (size_t j = 0; j < n; ++j) cost2[j] = c[j];
        Rat v2;
        {
            bool bounded = run2(T, basis, cost2, cols, n, v2);
            if (!bounded) return {LpResult::Status::Unbounded, {}, Rat(0)};
        }
        std::vector<Rat> x(n, Rat(0));
        for (size_t i = 0; i < m; ++i)
            if (basis[i] < n) x[basis[i]] = T[i][cols];
        return {LpResult::Status::Optimal, std::move(x), v2};
    }

private:
    static void pivot(std::vector<std::vector<Rat>>& T, std::vector<size_t>& basis,
                      size_t row, size_t col) {
        size_t cols = T[0].size() - 1;
        Rat p = T[row][col];
        for (size_t j = 0; j <= cols; ++j) T[row][j] /= p;
        for (size_t i = 0; i < T.size(); ++i) {
            if (i == row || T[i][col].is_zero()) continue;
            Rat f = T[i][col];
            for (size_t j = 0; j <= cols; ++j) T[i][j] -= f * T[row][j];
        }
        basis[row] = col;
    }

    // optimize; returns the optimal value, all columns >= barred_from excluded
    static Rat run(std::vector<std::vector<Rat>>& T, std::vector<size_t>& basis,
                   const std::vector<Rat>& cost, size_t cols, size_t barred_from) {
        Rat v;
        run_impl(T, basis, cost, cols, barred_from, v);
        return v;
    }
    static bool run2(std::vector<std::vector<Rat>>& T, std::vector<size_t>& basis,
                     const std::vector<Rat>& cost, size_t cols, size_t barred_from,
                     Rat& value) {
        return run_impl(T, basis, cost, cols, barred_from, value);
    }

    static bool run_impl(std::vector<std::vector<Rat>>& T, std::vector<size_t>& basis,
                         const std::vector<Rat>& cost, size_t cols, size_t barred_from,
                         Rat& value) {
        size_t m = T.size();
        for (;;) {
            // reduced costs r_j = c_j - c_B . B^-1 A_j  (computed per column)
            size_t enter = cols;
            for (size_t j = 0; j < barred_from; ++j) {
                bool basic = false;
                for (size_t i = 0; i < m; ++i)
                    if (basis[i] == j) basic = true;
                if (basic) continue;
                Rat r = cost[j];
                for (size_t i = 0; i < m; ++i) {
                    if (cost[basis[i]].is_zero() || T[i][j].is_zero()) continue;
                    r -= cost[basis[i]] * T[i][j];
                }
                if (r < Rat(0)) {  // Bland: first improving column
                    enter = j;
                    break;
                }
            }
            if (enter == cols) break;
            // ratio test; Bland tie-break on the smallest basis index
            size_t leave = m;
            Rat best;
            for (size_t i = 0; i < m; ++i) {
                if (T[i][enter] <= Rat(0)) continue;
                Rat ratio = T[i][cols] / T[i][enter];
                if (leave == m || ratio < best ||
                    (ratio == best && basis[i] < basis[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
            if (leave == m) {
                value = Rat(0);
                return false;  // unbounded
            }
            pivot(T, basis, leave, enter);
        }
        Rat v(0);
        for (size_t i = 0; i < m; ++i)
            if (!cost[basis[i]].is_zero()) v += cost[basis[i]] * T[i][cols];
        value = v;
        return true;
    }
};

}  // namespace peval::lp
