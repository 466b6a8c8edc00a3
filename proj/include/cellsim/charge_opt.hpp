#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cellsim/aging.hpp"
#include "cellsim/core_model.hpp"
#include "cellsim/lp.hpp"
#include "cellsim/lspwm.hpp"

namespace cellsim {

/// Stage discretization of a CCCV profile: stage 0 is CC, stages 1..m are CV
/// sub-stages uniformly partitioning [soc_max[0], 1].
struct StageGrid {
    int m = 0;
    std::vector<double> soc_max;    // size m+1, strictly increasing, last = 1
    std::vector<double> crate_avg;  // size m+1, positive (1/h)
};

StageGrid build_stage_grid(double i_cc_a, double q_no_ah, int m);

/// Representative per-cell terminal voltage of one stage: OCV at the pack
/// midpoint SOC plus the average ohmic drop.
double stage_terminal_voltage(const StageGrid& grid, int stage, double q_initial_sum,
                              double q_final_sum, double q_max_sum, double r0,
                              double q_no, const OcvCurve& curve);

struct OptimizerConfig {
    int m = 4;
    double kappa = 0.1;
    double epsilon = 1e-3;
    double big_m = 1e6;
    double u_phase_max = 0.0;   // 0 -> n_active * 3.0 V
    double u_phase_step = 0.0;  // 0 -> 3.0 V
    std::vector<double> i_cc_grid_a;  // empty -> 8 log-spaced in [0.2 C, g(0)]
    double discharge_avg_crate = 0.3;
    bool conservative_discharge = false;  // use the full envelope C-rate instead
    // Phase-voltage magnitude of the representative discharge pattern, as a
    // multiple of n_active * u_dis_ter. 1.0 is the synthesizable magnitude;
    // values above 1 flatten the duty tails, which raises the floor under
    // every cell's final charge so the pack re-equalizes remaining capacity
    // early in the next discharge (at the cost of smaller SOH-driven tilts).
    double u_dis_phase_scale = 1.0;
    bool fast_charge = false;             // skip the I_cc search, use max current
    bool lazy_achievability = true;       // grow epigraph rows on demand
};

/// One charging request: per-cell initial charge (full pack indexing), the
/// target total final charge over active cells, the time limit, and the SOH
/// estimates the controller acts on (empty -> true SOH).
struct ChargeSession {
    std::vector<double> q_initial_ah;
    double q_final_sum_ah = 0.0;
    double t_total_h = 0.0;
    std::vector<double> soh_estimates;
};

/// Charge allocation matrix plus everything needed to execute and audit it.
struct ChargePlan {
    bool feasible = false;
    std::vector<std::vector<double>> q;  // [cell][stage], full pack indexing
    double u_phase = 0.0;
    double i_cc = 0.0;
    std::vector<double> stage_durations_h;
    double objective_value = 0.0;
    StageGrid grid;
    std::vector<DutyCyclePattern> stage_duties;  // over active cells
    std::vector<std::size_t> active;             // pack indices of LP cells

    std::string to_json_string() const;
};

std::vector<std::vector<double>> build_weights(const std::vector<double>& soh,
                                               const StageGrid& grid, double soh_eol,
                                               const OptimizerConfig& cfg);

/// Full LP encoding of constraints 1-7 (all achievability rows included).
LpProblem assemble_lp(const PackState& pack, const ChargeSession& session,
                      const StageGrid& grid, double u_phase,
                      const OptimizerConfig& cfg);

/// Outer search: decrease u_phase from the maximum until the LP is feasible,
/// then grid-search I_cc and return the objective-minimizing plan. Returns
/// feasible = false when no (u_phase, I_cc) works.
ChargePlan optimize_charge_plan(const PackState& pack, const ChargeSession& session,
                                const OptimizerConfig& cfg);

/// Independent post-hoc validator (sorting-based, no epigraph). Checks all
/// seven constraint families at tolerance 1e-6.
struct PlanValidation {
    bool ok = true;
    std::string detail;
};
PlanValidation validate_plan(const ChargePlan& plan, const PackState& pack,
                             const ChargeSession& session, const OptimizerConfig& cfg);

/// Online execution of a plan with per-period Strategy 1 stepping. Mutates
/// the pack's charges and returns applied Ah plus per-cell aging events.
struct ExecutionResult {
    std::vector<double> applied_ah;
    std::vector<std::vector<AgingEvent>> events;  // [cell]
    int stalls = 0;
    std::vector<double> stage_time_h;
};
ExecutionResult execute_charge_plan(const ChargePlan& plan, PackState& pack,
                                    double period_h = 1.0 / 3600.0,
                                    const std::function<void(double)>& on_period = {});

constexpr double kNominalCellVoltage = 3.0;

}  // namespace cellsim
