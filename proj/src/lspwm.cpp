#include "cellsim/lspwm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace cellsim {

double DutyCyclePattern::total() const {
    return std::accumulate(duties.begin(), duties.end(), 0.0);
}

bool DutyCyclePattern::non_increasing() const {
    for (std::size_t i = 1; i < duties.size(); ++i)
        if (duties[i] > duties[i - 1] + 1e-15) return false;
    return true;
}

DutyCyclePattern sinusoidal_duties(double u_ter, double u_phase, int n_levels) {
    DutyCyclePattern p;
    p.duties.reserve(static_cast<std::size_t>(n_levels));
    for (int i = 1; i <= n_levels; ++i) {
        const double arg = std::min((2.0 * i - 1.0) * u_ter / (2.0 * u_phase), 1.0);
        p.duties.push_back(2.0 / std::numbers::pi * std::acos(arg));
    }
    return p;
}

DutyCyclePattern dc_duties(double u_ter, double u_phase, int n_levels) {
    DutyCyclePattern p;
    p.duties.reserve(static_cast<std::size_t>(n_levels));
    for (int i = 1; i <= n_levels; ++i) {
        double d;
        if ((i - 1) * u_ter > u_phase)
            d = 0.0;
        else if (i * u_ter < u_phase)
            d = 1.0;
        else
            d = (u_phase - (i - 1) * u_ter) / u_ter;
        p.duties.push_back(std::clamp(d, 0.0, 1.0));
    }
    return p;
}

bool is_achievable(std::span<const double> delta_q, const DutyCyclePattern& duties) {
    const std::size_t n = delta_q.size();
    if (duties.duties.size() != n)
        throw std::invalid_argument("is_achievable: size mismatch");

    std::vector<double> gains(delta_q.begin(), delta_q.end());
    std::sort(gains.begin(), gains.end(), std::greater<>());
    const double gain_total = std::accumulate(gains.begin(), gains.end(), 0.0);
    const double duty_total = duties.total();
    if (gain_total <= 0.0) return true;
    if (duty_total <= 0.0) return false;  // degenerate: demand with no throughput

    double gain_cum = 0.0, duty_cum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        gain_cum += gains[k];
        duty_cum += duties.duties[k];
        // relative tolerance keeps proportional allocations (equality) achievable
        if (gain_cum / gain_total > duty_cum / duty_total + 1e-12) return false;
    }
    return true;
}

namespace {

/// Sorts cells by key (descending or ascending, index-stable), then rotates
/// each group of tied keys cyclically by tie_rotation.
LevelAssignment assign_by_key(std::span<const double> key, bool descending,
                              std::uint64_t tie_rotation) {
    const std::size_t n = key.size();
    if (n == 0) throw std::invalid_argument("assignment: empty cell list");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (std::abs(key[a] - key[b]) <= kTieTolerance) return false;
        return descending ? key[a] > key[b] : key[a] < key[b];
    });

    // rotate tied groups
    std::size_t start = 0;
    while (start < n) {
        std::size_t end = start + 1;
        while (end < n &&
               std::abs(key[order[end]] - key[order[end - 1]]) <= kTieTolerance)
            ++end;
        const std::size_t len = end - start;
        if (len > 1) {
            const std::size_t shift = static_cast<std::size_t>(tie_rotation % len);
            std::rotate(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(start + shift),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
        }
        start = end;
    }

    LevelAssignment a;
    a.level_of_cell.resize(n);
    for (std::size_t level = 0; level < n; ++level)
        a.level_of_cell[order[level]] = static_cast<int>(level);
    return a;
}

}  // namespace

LevelAssignment assign_strategy1(std::span<const double> remaining_gain,
                                 std::uint64_t tie_rotation) {
    return assign_by_key(remaining_gain, /*descending=*/true, tie_rotation);
}

LevelAssignment assign_strategy2(std::span<const double> remaining_capacity,
                                 FlowDirection direction, std::uint64_t tie_rotation) {
    return assign_by_key(remaining_capacity,
                         direction == FlowDirection::discharge, tie_rotation);
}

LevelAssignment assign_strategy3(std::span<const double> soc, FlowDirection direction,
                                 std::uint64_t tie_rotation) {
    return assign_by_key(soc, direction == FlowDirection::discharge, tie_rotation);
}

std::vector<double> step_period(const LevelAssignment& assignment,
                                const DutyCyclePattern& duties, double line_current_a,
                                double period_h, FlowDirection direction) {
    if (period_h <= 0.0) throw std::invalid_argument("step_period: period must be > 0");
    const double sign = direction == FlowDirection::charge ? 1.0 : -1.0;
    std::vector<double> deltas(assignment.level_of_cell.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const auto level = static_cast<std::size_t>(assignment.level_of_cell[i]);
        deltas[i] = sign * line_current_a * duties.duties[level] * period_h;
    }
    return deltas;
}

}  // namespace cellsim
