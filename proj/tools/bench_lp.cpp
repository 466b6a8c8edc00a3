// Benchmark of the OpenMP pivot kernel against the serial reference kernel.
// Both must return bit-identical solutions; the run aborts otherwise.

#include <chrono>
#include <cstdio>
#include <random>

#include "cellsim/lp.hpp"

using namespace cellsim;

namespace {

// Random feasible LP: minimize c.x over A x <= b with b > 0, so x = 0 is
// feasible and phase 1 is trivial; bounded via per-variable upper bounds.
LpProblem random_lp(int vars, int rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0), rhs(1.0, 5.0);

    LpProblem lp;
    lp.num_vars = vars;
    lp.objective.resize(static_cast<std::size_t>(vars));
    for (auto& c : lp.objective) c = coef(rng);
    lp.upper.assign(static_cast<std::size_t>(vars), 10.0);
    for (int r = 0; r < rows; ++r) {
        LpProblem::Row row;
        for (int v = 0; v < vars; ++v) row.coeffs.emplace_back(v, coef(rng));
        row.rhs = rhs(rng);
        lp.less_equal.push_back(std::move(row));
    }
    return lp;
}

double time_solve(const LpProblem& lp, bool parallel, LpSolution& out) {
    LpOptions opts;
    opts.parallel_pivot = parallel;
    const auto t0 = std::chrono::steady_clock::now();
    out = solve_lp(lp, opts);
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

int main() {
    std::printf("%8s %8s %12s %12s %9s\n", "vars", "rows", "serial_ms", "openmp_ms",
                "speedup");
    for (const auto [vars, rows] :
         {std::pair{50, 80}, std::pair{150, 250}, std::pair{400, 600}}) {
        const LpProblem lp = random_lp(vars, rows, 42);
        LpSolution serial, parallel;
        const double ms_serial = time_solve(lp, false, serial);
        const double ms_parallel = time_solve(lp, true, parallel);

        if (serial.status != parallel.status || serial.x != parallel.x) {
            std::fprintf(stderr, "MISMATCH at %dx%d: kernels disagree\n", vars, rows);
            return 1;
        }
        std::printf("%8d %8d %12.2f %12.2f %8.2fx\n", vars, rows, ms_serial,
                    ms_parallel, ms_serial / ms_parallel);
    }
    return 0;
}
