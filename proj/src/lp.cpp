#include "cellsim/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <stdexcept>

#ifdef CELLSIM_HAVE_OPENMP
#include <omp.h>
#endif

namespace cellsim {

void LpProblem::dump(std::ostream& os) const {
    os << "vars " << num_vars << "\n";
    os << "min";
    for (int j = 0; j < num_vars; ++j)
        os << " " << (j < static_cast<int>(objective.size()) ? objective[j] : 0.0);
    os << "\n";
    auto dump_rows = [&](const std::vector<Row>& rows, const char* tag) {
        for (const auto& r : rows) {
            os << tag;
            for (const auto& [j, v] : r.coeffs) os << " " << j << ":" << v;
            os << " | " << r.rhs << "\n";
        }
    };
    dump_rows(less_equal, "le");
    dump_rows(equal, "eq");
    if (!lower.empty()) {
        os << "lb";
        for (double v : lower) os << " " << v;
        os << "\n";
    }
    for (std::size_t j = 0; j < upper.size(); ++j)
        if (upper[j]) os << "ub " << j << " " << *upper[j] << "\n";
}

namespace {

struct Tableau {
    std::size_t rows = 0;
    std::size_t cols = 0;  // structural + slack + artificial columns
    std::size_t width = 0; // cols + 1 (rhs)
    std::vector<double> a;
    std::vector<double> cost;   // reduced-cost row, size width
    std::vector<int> basis;     // basic column per row

    double& at(std::size_t r, std::size_t c) { return a[r * width + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * width + c]; }
    double& rhs(std::size_t r) { return a[r * width + cols]; }
};

void pivot_serial(Tableau& t, std::size_t pr, std::size_t pc) {
    double* prow = &t.a[pr * t.width];
    const double inv = 1.0 / prow[pc];
    for (std::size_t c = 0; c < t.width; ++c) prow[c] *= inv;
    prow[pc] = 1.0;
    for (std::size_t r = 0; r < t.rows; ++r) {
        if (r == pr) continue;
        double* row = &t.a[r * t.width];
        const double f = row[pc];
        if (f == 0.0) continue;
        for (std::size_t c = 0; c < t.width; ++c) row[c] -= f * prow[c];
        row[pc] = 0.0;
    }
    const double f = t.cost[pc];
    if (f != 0.0) {
        for (std::size_t c = 0; c < t.width; ++c) t.cost[c] -= f * prow[c];
        t.cost[pc] = 0.0;
    }
}

void pivot_parallel(Tableau& t, std::size_t pr, std::size_t pc) {
#ifdef CELLSIM_HAVE_OPENMP
    double* prow = &t.a[pr * t.width];
    const double inv = 1.0 / prow[pc];
    for (std::size_t c = 0; c < t.width; ++c) prow[c] *= inv;
    prow[pc] = 1.0;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(t.rows); ++r) {
        if (static_cast<std::size_t>(r) == pr) continue;
        double* row = &t.a[static_cast<std::size_t>(r) * t.width];
        const double f = row[pc];
        if (f == 0.0) continue;
        for (std::size_t c = 0; c < t.width; ++c) row[c] -= f * prow[c];
        row[pc] = 0.0;
    }
    const double f = t.cost[pc];
    if (f != 0.0) {
        for (std::size_t c = 0; c < t.width; ++c) t.cost[c] -= f * prow[c];
        t.cost[pc] = 0.0;
    }
#else
    pivot_serial(t, pr, pc);
#endif
}

enum class IterResult { optimal, unbounded, iteration_limit };

/// Minimizes the current cost row. banned columns never enter the basis.
IterResult run_simplex(Tableau& t, const std::vector<bool>& banned, long max_iter,
                       bool parallel) {
    static const bool stats = std::getenv("CELLSIM_LP_STATS") != nullptr;
    const bool use_parallel_rows = parallel && t.rows * t.width > 1u << 18;
    bool bland = false;
    long stall = 0;
    double last_obj = std::numeric_limits<double>::infinity();

    for (long iter = 0; iter < max_iter; ++iter) {
        // entering column
        std::size_t pc = t.cols;
        if (bland) {
            for (std::size_t c = 0; c < t.cols; ++c)
                if (!banned[c] && t.cost[c] < -kLpPivotTol) { pc = c; break; }
        } else {
            double best = -kLpPivotTol;
            for (std::size_t c = 0; c < t.cols; ++c)
                if (!banned[c] && t.cost[c] < best) { best = t.cost[c]; pc = c; }
        }
        if (pc == t.cols) {
            if (stats)
                std::fprintf(stderr, "[lp] rows=%zu cols=%zu iters=%ld bland=%d\n",
                             t.rows, t.cols, iter, bland ? 1 : 0);
            return IterResult::optimal;
        }

        // Harris-style two-pass ratio test. Pass 1 finds the loosest ratio
        // acceptable within a small feasibility shift; pass 2 picks the
        // numerically largest pivot element inside that bound. A near-zero
        // pivot element turns round-off in the rhs into a large infeasibility
        // that later pivots amplify, so stability beats the textbook minimum.
        constexpr double kFeasShift = 1e-9;
        std::size_t pr = t.rows;
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < t.rows; ++r) {
            const double arc = t.at(r, pc);
            if (arc <= kLpPivotTol) continue;
            // round-off can leave rhs slightly negative; clamp so the bound
            // stays non-negative
            theta = std::min(theta, (std::max(t.rhs(r), 0.0) + kFeasShift) / arc);
        }
        if (theta == std::numeric_limits<double>::infinity())
            return IterResult::unbounded;
        double best_arc = 0.0;
        for (std::size_t r = 0; r < t.rows; ++r) {
            const double arc = t.at(r, pc);
            if (arc <= kLpPivotTol) continue;
            if (std::max(t.rhs(r), 0.0) / arc > theta) continue;
            if (bland) {
                // anti-cycling: smallest basis index, but never a pivot element
                // small enough to wreck the tableau
                if (arc > 1e-4 && (pr == t.rows || t.basis[r] < t.basis[pr])) pr = r;
            } else if (arc > best_arc) {
                best_arc = arc;
                pr = r;
            }
        }
        if (pr == t.rows) {
            // every in-bound pivot element was tiny; fall back to the largest
            for (std::size_t r = 0; r < t.rows; ++r) {
                const double arc = t.at(r, pc);
                if (arc <= kLpPivotTol) continue;
                if (std::max(t.rhs(r), 0.0) / arc > theta) continue;
                if (arc > best_arc) {
                    best_arc = arc;
                    pr = r;
                }
            }
        }

        if (use_parallel_rows)
            pivot_parallel(t, pr, pc);
        else
            pivot_serial(t, pr, pc);
        t.basis[pr] = static_cast<int>(pc);

        // stalling is judged on relative progress; big-M objectives make
        // absolute thresholds meaningless
        const double obj = -t.cost[t.cols];
        if (obj < last_obj - 1e-9 * (1.0 + std::abs(last_obj))) {
            stall = 0;
            last_obj = obj;
        } else if (++stall > 10000) {
            // Bland's rule terminates on degenerate vertices; switching back to
            // Dantzig after partial progress reintroduces cycling, so stay put
            bland = true;
        }
    }
    return IterResult::iteration_limit;
}

}  // namespace

LpSolution solve_lp(const LpProblem& problem, const LpOptions& options) {
    const int n = problem.num_vars;
    std::vector<double> lb(problem.lower);
    lb.resize(static_cast<std::size_t>(n), 0.0);

    // collect all rows as a.x <= / = rhs with x shifted to y = x - lb >= 0
    struct NormRow {
        std::vector<std::pair<int, double>> coeffs;
        double rhs;
        bool is_eq;
    };
    std::vector<NormRow> rows;
    rows.reserve(problem.less_equal.size() + problem.equal.size() + problem.upper.size());
    auto shift_rhs = [&](const LpProblem::Row& r) {
        double rhs = r.rhs;
        for (const auto& [j, v] : r.coeffs) rhs -= v * lb[static_cast<std::size_t>(j)];
        return rhs;
    };
    for (const auto& r : problem.less_equal) rows.push_back({r.coeffs, shift_rhs(r), false});
    for (std::size_t j = 0; j < problem.upper.size(); ++j)
        if (problem.upper[j])
            rows.push_back({{{static_cast<int>(j), 1.0}}, *problem.upper[j] - lb[j], false});
    for (const auto& r : problem.equal) rows.push_back({r.coeffs, shift_rhs(r), true});

    const std::size_t m = rows.size();
    std::size_t n_slack = 0;
    for (const auto& r : rows)
        if (!r.is_eq) ++n_slack;
    std::size_t n_art = 0;
    for (const auto& r : rows)
        if (r.is_eq || r.rhs < 0.0) ++n_art;

    Tableau t;
    t.rows = m;
    t.cols = static_cast<std::size_t>(n) + n_slack + n_art;
    t.width = t.cols + 1;
    t.a.assign(t.rows * t.width, 0.0);
    t.cost.assign(t.width, 0.0);
    t.basis.assign(m, -1);

    std::vector<bool> is_artificial(t.cols, false);
    std::size_t slack_col = static_cast<std::size_t>(n);
    std::size_t art_col = static_cast<std::size_t>(n) + n_slack;

    for (std::size_t r = 0; r < m; ++r) {
        const double sign = rows[r].rhs < 0.0 ? -1.0 : 1.0;
        for (const auto& [j, v] : rows[r].coeffs)
            t.at(r, static_cast<std::size_t>(j)) += sign * v;
        t.rhs(r) = sign * rows[r].rhs;
        if (!rows[r].is_eq) {
            t.at(r, slack_col) = sign * 1.0;
            if (sign > 0.0) t.basis[r] = static_cast<int>(slack_col);
            ++slack_col;
        }
        if (t.basis[r] < 0) {
            t.at(r, art_col) = 1.0;
            t.basis[r] = static_cast<int>(art_col);
            is_artificial[art_col] = true;
            ++art_col;
        }
    }

    const long max_iter = options.max_iterations > 0
                              ? options.max_iterations
                              : 200 * static_cast<long>(t.rows + t.cols) + 20000;
    std::vector<bool> banned(t.cols, false);

    // phase 1: minimize the artificial sum
    if (n_art > 0) {
        for (std::size_t c = 0; c < t.cols; ++c)
            if (is_artificial[c]) t.cost[c] = 1.0;
        for (std::size_t r = 0; r < m; ++r) {
            if (!is_artificial[static_cast<std::size_t>(t.basis[r])]) continue;
            for (std::size_t c = 0; c < t.width; ++c) t.cost[c] -= t.at(r, c);
        }
        const IterResult res = run_simplex(t, banned, max_iter, options.parallel_pivot);
        if (res == IterResult::iteration_limit) {
            if (const char* path = std::getenv("CELLSIM_LP_DUMP")) {
                std::ofstream out(path);
                problem.dump(out);
            }
            throw std::runtime_error("solve_lp: phase-1 iteration limit");
        }
        if (-t.cost[t.cols] > kLpFeasTol) return {LpStatus::infeasible, {}, 0.0};

        // pivot leftover artificials out where possible, then ban them
        for (std::size_t r = 0; r < m; ++r) {
            const auto b = static_cast<std::size_t>(t.basis[r]);
            if (!is_artificial[b]) continue;
            // pivot on the largest-magnitude structural entry; a near-tolerance
            // element would blow the (tiny) residual rhs up across the tableau
            std::size_t best_c = t.cols;
            double best_abs = kLpPivotTol;
            for (std::size_t c = 0; c < t.cols; ++c) {
                if (is_artificial[c]) continue;
                if (std::abs(t.at(r, c)) > best_abs) {
                    best_abs = std::abs(t.at(r, c));
                    best_c = c;
                }
            }
            if (best_c < t.cols) {
                pivot_serial(t, r, best_c);
                t.basis[r] = static_cast<int>(best_c);
            }
        }
        for (std::size_t c = 0; c < t.cols; ++c)
            if (is_artificial[c]) banned[c] = true;
    }

    // phase 2: real objective, normalized so the pivot tolerance stays
    // meaningful for big-M-scale costs
    double obj_scale = 1.0;
    for (double v : problem.objective) obj_scale = std::max(obj_scale, std::abs(v));
    std::fill(t.cost.begin(), t.cost.end(), 0.0);
    for (int j = 0; j < n; ++j)
        if (j < static_cast<int>(problem.objective.size()))
            t.cost[static_cast<std::size_t>(j)] =
                problem.objective[static_cast<std::size_t>(j)] / obj_scale;
    for (std::size_t r = 0; r < m; ++r) {
        const auto b = static_cast<std::size_t>(t.basis[r]);
        const double cb = t.cost[b];
        if (cb == 0.0) continue;
        for (std::size_t c = 0; c < t.width; ++c) t.cost[c] -= cb * t.at(r, c);
        t.cost[b] = 0.0;
    }

    const IterResult res = run_simplex(t, banned, max_iter, options.parallel_pivot);
    if (res == IterResult::iteration_limit) {
        if (const char* path = std::getenv("CELLSIM_LP_DUMP")) {
            std::ofstream out(path);
            problem.dump(out);
        }
        throw std::runtime_error("solve_lp: phase-2 iteration limit");
    }
    if (res == IterResult::unbounded) return {LpStatus::unbounded, {}, 0.0};

    LpSolution sol;
    sol.status = LpStatus::optimal;
    sol.x.assign(static_cast<std::size_t>(n), 0.0);
    for (std::size_t r = 0; r < m; ++r)
        if (t.basis[r] < n) sol.x[static_cast<std::size_t>(t.basis[r])] = t.rhs(r);
    for (int j = 0; j < n; ++j) sol.x[static_cast<std::size_t>(j)] += lb[static_cast<std::size_t>(j)];

    sol.objective_value = 0.0;
    for (std::size_t j = 0; j < problem.objective.size(); ++j)
        sol.objective_value += problem.objective[j] * sol.x[j];

    // in-solver feasibility audit
    for (const auto& r : problem.less_equal) {
        double lhs = 0.0;
        for (const auto& [j, v] : r.coeffs) lhs += v * sol.x[static_cast<std::size_t>(j)];
        if (lhs > r.rhs + kLpFeasTol)
            throw std::logic_error("solve_lp: inequality residual exceeds tolerance");
    }
    for (const auto& r : problem.equal) {
        double lhs = 0.0;
        for (const auto& [j, v] : r.coeffs) lhs += v * sol.x[static_cast<std::size_t>(j)];
        if (std::abs(lhs - r.rhs) > kLpFeasTol)
            throw std::logic_error("solve_lp: equality residual exceeds tolerance");
    }
    return sol;
}

}  // namespace cellsim
