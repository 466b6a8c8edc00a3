#pragma once

#include <optional>
#include <ostream>
#include <utility>
#include <vector>

namespace cellsim {

/// min c.x  s.t.  A x <= b,  E x = f,  x >= lower (default 0), x <= upper.
/// Rows are stored sparsely as (column, coefficient) pairs.
struct LpProblem {
    struct Row {
        std::vector<std::pair<int, double>> coeffs;
        double rhs = 0.0;
    };

    int num_vars = 0;
    std::vector<double> objective;
    std::vector<Row> less_equal;
    std::vector<Row> equal;
    std::vector<double> lower;                 // empty -> all zero
    std::vector<std::optional<double>> upper;  // empty -> unbounded above

    /// Plain-text matrix dump for offline cross-checking.
    void dump(std::ostream& os) const;
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective_value = 0.0;
};

struct LpOptions {
    /// Use the OpenMP pivot kernel. The serial kernel is kept as the
    /// reference implementation; both produce bit-identical tableaus.
    bool parallel_pivot = true;
    long max_iterations = 0;  // 0 -> automatic bound
};

/// Deterministic two-phase simplex. Pivot tolerance 1e-9, feasibility
/// tolerance 1e-6 (residuals are re-checked on every optimal solution).
/// Infeasible/unbounded are ordinary results, not errors.
LpSolution solve_lp(const LpProblem& problem, const LpOptions& options = {});

constexpr double kLpPivotTol = 1e-9;
constexpr double kLpFeasTol = 1e-6;

}  // namespace cellsim
