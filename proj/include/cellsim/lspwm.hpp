#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cellsim {

/// Duty cycles of the voltage levels for one operating condition, ordered
/// from level 1 (highest duty) downward. Always non-increasing.
struct DutyCyclePattern {
    std::vector<double> duties;

    double total() const;
    bool non_increasing() const;
};

/// Level assignment for one modulation period: level_of_cell[i] is the
/// 0-based voltage level of cell i (0 = highest duty). Always a permutation.
struct LevelAssignment {
    std::vector<int> level_of_cell;
};

enum class FlowDirection { charge, discharge };

/// Sinusoidal-reference duty cycles: d_i = (2/pi) acos(min((2i-1)u_ter/(2u_phase), 1)).
DutyCyclePattern sinusoidal_duties(double u_ter, double u_phase, int n_levels);

/// DC-reference duty cycles: at most one level has a non-binary duty.
DutyCyclePattern dc_duties(double u_ter, double u_phase, int n_levels);

/// Achievability test for a constant duty pattern: the target gains delta_q
/// are reachable iff every sorted top-k gain share is bounded by the top-k
/// duty share. Zero total duty with positive demand is unachievable.
bool is_achievable(std::span<const double> delta_q, const DutyCyclePattern& duties);

/// Strategy 1: the cell with the j-th largest remaining gain takes level j.
/// Tied cells (within 1e-9) rotate cyclically by tie_rotation.
LevelAssignment assign_strategy1(std::span<const double> remaining_gain,
                                 std::uint64_t tie_rotation);

/// Strategy 2: discharge drains the cells with the largest remaining charge
/// first; charge fills the cells with the smallest remaining charge first.
LevelAssignment assign_strategy2(std::span<const double> remaining_capacity,
                                 FlowDirection direction, std::uint64_t tie_rotation);

/// Strategy 3: same structure as Strategy 2 with SOC as the sort key.
LevelAssignment assign_strategy3(std::span<const double> soc, FlowDirection direction,
                                 std::uint64_t tie_rotation);

/// Per-cell Ah deltas over one modulation period: cell c moves
/// line_current * d_{level(c)} * period, signed by direction.
std::vector<double> step_period(const LevelAssignment& assignment,
                                const DutyCyclePattern& duties, double line_current_a,
                                double period_h,
                                FlowDirection direction = FlowDirection::charge);

constexpr double kTieTolerance = 1e-9;

}  // namespace cellsim
