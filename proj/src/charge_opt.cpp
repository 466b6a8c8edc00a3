#include "cellsim/charge_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cellsim {

StageGrid build_stage_grid(double i_cc_a, double q_no_ah, int m) {
    if (i_cc_a <= 0.0 || m < 1)
        throw std::invalid_argument("build_stage_grid: i_cc > 0 and m >= 1 required");
    StageGrid grid;
    grid.m = m;
    grid.soc_max.resize(static_cast<std::size_t>(m) + 1);
    grid.crate_avg.resize(static_cast<std::size_t>(m) + 1);

    const double cc_crate = i_cc_a / q_no_ah;
    // commanded C-rate above the envelope -> pure CV run from SOC 0
    grid.soc_max[0] = cc_crate >= max_charge_crate(0.0) ? 0.0
                                                        : inverse_crate_envelope(cc_crate);
    grid.crate_avg[0] = cc_crate;
    for (int j = 1; j <= m; ++j) {
        const auto js = static_cast<std::size_t>(j);
        grid.soc_max[js] = grid.soc_max[0] + (1.0 - grid.soc_max[0]) * j / m;
        grid.crate_avg[js] = 0.5 * (max_charge_crate(grid.soc_max[js - 1]) +
                                    max_charge_crate(grid.soc_max[js]));
    }
    grid.soc_max[static_cast<std::size_t>(m)] = 1.0;
    return grid;
}

double stage_terminal_voltage(const StageGrid& grid, int stage, double q_initial_sum,
                              double q_final_sum, double q_max_sum, double r0,
                              double q_no, const OcvCurve& curve) {
    if (q_max_sum <= 0.0)
        throw std::invalid_argument("stage_terminal_voltage: q_max_sum must be > 0");
    const double mid_soc =
        std::clamp((q_final_sum + q_initial_sum) / (2.0 * q_max_sum), 0.0, 1.0);
    return curve(mid_soc) + q_no * grid.crate_avg[static_cast<std::size_t>(stage)] * r0;
}

std::vector<std::vector<double>> build_weights(const std::vector<double>& soh,
                                               const StageGrid& grid, double soh_eol,
                                               const OptimizerConfig& cfg) {
    std::vector<std::vector<double>> w(soh.size());
    for (std::size_t i = 0; i < soh.size(); ++i) {
        w[i].resize(grid.crate_avg.size());
        for (std::size_t j = 0; j < grid.crate_avg.size(); ++j) {
            const double rate_term = 1.0 + cfg.kappa * grid.crate_avg[j];
            if (soh[i] > soh_eol + cfg.epsilon) {
                const double gap = soh[i] - soh_eol;
                w[i][j] = rate_term / (gap * gap);
            } else {
                w[i][j] = rate_term * cfg.big_m;
            }
        }
    }
    return w;
}

namespace {

std::vector<double> default_icc_grid(double q_no) {
    std::vector<double> grid;
    const double lo = 0.2, hi = max_charge_crate(0.0);
    for (int k = 0; k < 8; ++k)
        grid.push_back(q_no * lo * std::pow(hi / lo, k / 7.0));
    return grid;
}

std::vector<double> cumulative_shares(const DutyCyclePattern& d) {
    std::vector<double> shares(d.duties.size(), 1.0);
    const double total = d.total();
    if (total <= 0.0) return shares;
    double cum = 0.0;
    for (std::size_t k = 0; k < d.duties.size(); ++k) {
        cum += d.duties[k];
        shares[k] = cum / total;
    }
    return shares;
}

/// Everything derived from (pack state, session, grid, u_phase) that the LP
/// assembly, the plan extraction and the validator all agree on.
struct Context {
    std::vector<std::size_t> active;
    int na = 0, S = 0;
    double q_no = 0.0, r0 = 0.0;
    OcvCurve curve;
    std::vector<double> q_init, q_max, soh_est;
    double q_init_sum = 0.0, q_max_sum = 0.0, demand = 0.0;
    StageGrid grid;
    double u_phase = 0.0;
    std::vector<DutyCyclePattern> duties;           // per stage
    std::vector<double> duty_total;                 // per stage
    std::vector<std::vector<double>> duty_share;    // per stage, cumulative
    DutyCyclePattern dis_duties;
    std::vector<double> dis_share;
    std::vector<std::vector<double>> weights;       // [active][stage]
    std::vector<std::size_t> soh_order;             // positions, SOH-estimate desc
};

Context make_context(const PackState& pack, const ChargeSession& session,
                     const StageGrid& grid, double u_phase,
                     const OptimizerConfig& cfg) {
    Context ctx;
    ctx.active = pack.active_cells();
    ctx.na = static_cast<int>(ctx.active.size());
    if (ctx.na == 0) throw std::invalid_argument("optimizer: no active cells");
    ctx.S = grid.m + 1;
    ctx.q_no = pack.params[ctx.active[0]].nominal_capacity_ah;
    ctx.r0 = pack.params[ctx.active[0]].internal_resistance_ohm;
    ctx.curve.chemistry = pack.params[ctx.active[0]].chemistry;
    ctx.grid = grid;
    ctx.u_phase = u_phase;

    for (std::size_t i : ctx.active) {
        ctx.q_init.push_back(session.q_initial_ah[i]);
        ctx.q_max.push_back(pack.cells[i].max_capacity_ah);
        ctx.soh_est.push_back(session.soh_estimates.empty() ? pack.cells[i].soh
                                                            : session.soh_estimates[i]);
    }
    ctx.q_init_sum = std::accumulate(ctx.q_init.begin(), ctx.q_init.end(), 0.0);
    ctx.q_max_sum = std::accumulate(ctx.q_max.begin(), ctx.q_max.end(), 0.0);
    ctx.demand = session.q_final_sum_ah - ctx.q_init_sum;

    for (int j = 0; j < ctx.S; ++j) {
        const double u_ter =
            stage_terminal_voltage(grid, j, ctx.q_init_sum, session.q_final_sum_ah,
                                   ctx.q_max_sum, ctx.r0, ctx.q_no, ctx.curve);
        ctx.duties.push_back(sinusoidal_duties(u_ter, u_phase, ctx.na));
        ctx.duty_total.push_back(ctx.duties.back().total());
        ctx.duty_share.push_back(cumulative_shares(ctx.duties.back()));
    }

    const double dis_crate = cfg.conservative_discharge
                                 ? max_charge_crate(0.0)
                                 : cfg.discharge_avg_crate;
    const double dis_soc =
        std::clamp(session.q_final_sum_ah / (2.0 * ctx.q_max_sum), 0.0, 1.0);
    const double u_dis = ctx.curve(dis_soc) - ctx.q_no * dis_crate * ctx.r0;
    // Representative discharge pattern, independent of the charging phase
    // voltage. Scaling the phase magnitude above n * u_dis flattens the duty
    // tails, which keeps a floor under every cell's final charge: the pack can
    // then re-equalize remaining capacity early in the next discharge instead
    // of stranding the lightly charged cells until the very end.
    const double u_dis_phase =
        cfg.u_dis_phase_scale * static_cast<double>(ctx.na) * std::max(u_dis, 1e-6);
    ctx.dis_duties = sinusoidal_duties(std::max(u_dis, 1e-6), u_dis_phase, ctx.na);
    ctx.dis_share = cumulative_shares(ctx.dis_duties);

    ctx.weights = build_weights(ctx.soh_est, grid, pack.soh_eol, cfg);

    ctx.soh_order.resize(static_cast<std::size_t>(ctx.na));
    std::iota(ctx.soh_order.begin(), ctx.soh_order.end(), std::size_t{0});
    std::stable_sort(ctx.soh_order.begin(), ctx.soh_order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return ctx.soh_est[a] > ctx.soh_est[b];
                     });
    return ctx;
}

/// A single linear achievability cut: for a fixed index subset of size k,
/// sum_{i in subset} Q_{i,j} <= duty_share[k-1] * sum_i Q_{i,j}.
struct SubsetCut {
    std::vector<int> subset;  // active-cell indices, sorted ascending
    int k = 0;
};

/// Builds the LP with the achievability epigraph restricted to the listed
/// (stage, k) pairs; the full set reproduces assemble_lp exactly. Subset
/// cuts, when given, add one plain row each (no auxiliary variables).
LpProblem assemble_internal(const Context& ctx, double t_total,
                            const std::vector<std::vector<int>>& ks_per_stage,
                            const std::vector<std::vector<SubsetCut>>* cuts = nullptr) {
    const int na = ctx.na, S = ctx.S;
    const auto q_var = [S](int i, int j) { return i * S + j; };

    LpProblem lp;
    lp.num_vars = na * S;
    lp.objective.assign(static_cast<std::size_t>(na * S), 0.0);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < S; ++j)
            lp.objective[static_cast<std::size_t>(q_var(i, j))] =
                ctx.weights[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

    // constraint 2: fixed total added charge
    {
        LpProblem::Row row;
        for (int i = 0; i < na; ++i)
            for (int j = 0; j < S; ++j) row.coeffs.emplace_back(q_var(i, j), 1.0);
        row.rhs = ctx.demand;
        lp.equal.push_back(std::move(row));
    }

    // constraint 3: charging-time limit (stages with no throughput are closed)
    {
        LpProblem::Row row;
        for (int j = 0; j < S; ++j) {
            const auto js = static_cast<std::size_t>(j);
            if (ctx.duty_total[js] <= 1e-12) {
                LpProblem::Row closed;
                for (int i = 0; i < na; ++i) closed.coeffs.emplace_back(q_var(i, j), 1.0);
                closed.rhs = 0.0;
                lp.less_equal.push_back(std::move(closed));
                continue;
            }
            const double coef = 1.0 / (ctx.q_no * ctx.grid.crate_avg[js] * ctx.duty_total[js]);
            for (int i = 0; i < na; ++i) row.coeffs.emplace_back(q_var(i, j), coef);
        }
        row.rhs = t_total;
        lp.less_equal.push_back(std::move(row));
    }

    // constraint 4: cumulative per-cell SOC caps
    for (int i = 0; i < na; ++i) {
        const auto is = static_cast<std::size_t>(i);
        for (int k = 0; k < S; ++k) {
            LpProblem::Row row;
            for (int j = 0; j <= k; ++j) row.coeffs.emplace_back(q_var(i, j), 1.0);
            row.rhs = std::max(
                0.0, ctx.q_max[is] * ctx.grid.soc_max[static_cast<std::size_t>(k)] -
                         ctx.q_init[is]);
            lp.less_equal.push_back(std::move(row));
        }
    }

    // constraint 5: stage-wise achievability, epigraph form
    for (int j = 0; j < S; ++j) {
        const auto js = static_cast<std::size_t>(j);
        for (int k : ks_per_stage[js]) {
            const double share = ctx.duty_share[js][static_cast<std::size_t>(k - 1)];
            if (share >= 1.0 - 1e-12) continue;  // vacuous
            const int t_var = lp.num_vars++;
            const int s_base = lp.num_vars;
            lp.num_vars += na;
            lp.objective.resize(static_cast<std::size_t>(lp.num_vars), 0.0);
            for (int i = 0; i < na; ++i) {
                LpProblem::Row row;  // Q_{i,j} - t - s_i <= 0
                row.coeffs.emplace_back(q_var(i, j), 1.0);
                row.coeffs.emplace_back(t_var, -1.0);
                row.coeffs.emplace_back(s_base + i, -1.0);
                lp.less_equal.push_back(std::move(row));
            }
            LpProblem::Row cap;  // k t + sum s <= share * sum_i Q_{i,j}
            cap.coeffs.emplace_back(t_var, static_cast<double>(k));
            for (int i = 0; i < na; ++i) cap.coeffs.emplace_back(s_base + i, 1.0);
            for (int i = 0; i < na; ++i) cap.coeffs.emplace_back(q_var(i, j), -share);
            cap.rhs = 0.0;
            lp.less_equal.push_back(std::move(cap));
        }
    }

    // constraint 5 (lazy form): subset cuts implied by the sorted bound
    if (cuts)
        for (int j = 0; j < S; ++j)
            for (const SubsetCut& cut : (*cuts)[static_cast<std::size_t>(j)]) {
                const double share =
                    ctx.duty_share[static_cast<std::size_t>(j)]
                                  [static_cast<std::size_t>(cut.k - 1)];
                if (share >= 1.0 - 1e-12) continue;
                LpProblem::Row row;
                for (int i : cut.subset) row.coeffs.emplace_back(q_var(i, j), 1.0);
                for (int i = 0; i < na; ++i)
                    row.coeffs.emplace_back(q_var(i, j), -share);
                row.rhs = 0.0;
                lp.less_equal.push_back(std::move(row));
            }

    // constraint 6: SOH-consistent ordering of final stored charge
    for (int p = 0; p + 1 < na; ++p) {
        const std::size_t hi = ctx.soh_order[static_cast<std::size_t>(p)];
        const std::size_t lo = ctx.soh_order[static_cast<std::size_t>(p) + 1];
        LpProblem::Row row;
        for (int j = 0; j < S; ++j) {
            row.coeffs.emplace_back(q_var(static_cast<int>(lo), j), 1.0);
            row.coeffs.emplace_back(q_var(static_cast<int>(hi), j), -1.0);
        }
        row.rhs = ctx.q_init[hi] - ctx.q_init[lo];
        lp.less_equal.push_back(std::move(row));
    }

    // constraint 7: discharge full-utilization, enforced on the SOH order
    for (int k = 1; k < na; ++k) {
        const double share = ctx.dis_share[static_cast<std::size_t>(k - 1)];
        if (share >= 1.0 - 1e-12) continue;
        LpProblem::Row row;
        double init_top = 0.0;
        for (int p = 0; p < k; ++p) {
            const auto cell = static_cast<int>(ctx.soh_order[static_cast<std::size_t>(p)]);
            for (int j = 0; j < S; ++j) row.coeffs.emplace_back(q_var(cell, j), 1.0);
            init_top += ctx.q_init[static_cast<std::size_t>(cell)];
        }
        for (int i = 0; i < na; ++i)
            for (int j = 0; j < S; ++j) row.coeffs.emplace_back(q_var(i, j), -share);
        row.rhs = share * ctx.q_init_sum - init_top;
        lp.less_equal.push_back(std::move(row));
    }
    return lp;
}

std::vector<std::vector<int>> full_k_sets(const Context& ctx) {
    std::vector<std::vector<int>> ks(static_cast<std::size_t>(ctx.S));
    for (auto& v : ks)
        for (int k = 1; k < ctx.na; ++k) v.push_back(k);
    return ks;
}

struct SolveAttempt {
    bool feasible = false;
    std::vector<std::vector<double>> q_active;  // [active][stage]
    double objective = 0.0;
};

/// Solves the stage LP, lazily adding one-row achievability cuts until the
/// sorted check passes. Each round appends the cuts for the current
/// solution's own top-k subsets, so round cost stays near the base LP; if
/// cut generation ever stalls, the full epigraph LP settles the question.
SolveAttempt solve_session_lp(const Context& ctx, double t_total,
                              const OptimizerConfig& cfg) {
    SolveAttempt out;

    const auto extract = [&](const LpSolution& sol) {
        std::vector<std::vector<double>> q(
            static_cast<std::size_t>(ctx.na),
            std::vector<double>(static_cast<std::size_t>(ctx.S), 0.0));
        for (int i = 0; i < ctx.na; ++i)
            for (int j = 0; j < ctx.S; ++j)
                q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    std::max(sol.x[static_cast<std::size_t>(i * ctx.S + j)], 0.0);
        return q;
    };
    const auto solve_full = [&]() {
        const LpProblem lp = assemble_internal(ctx, t_total, full_k_sets(ctx));
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::optimal) return;
        out.feasible = true;
        out.q_active = extract(sol);
        out.objective = sol.objective_value;
    };
    if (!cfg.lazy_achievability) {
        solve_full();
        return out;
    }

    const std::vector<std::vector<int>> no_ks(static_cast<std::size_t>(ctx.S));
    std::vector<std::vector<SubsetCut>> cuts(static_cast<std::size_t>(ctx.S));
    std::vector<std::size_t> order(static_cast<std::size_t>(ctx.na));

    // seed the nested top-k cuts along each stage's weight order: the optimum
    // allocates most to the cheapest cells, so these are the cuts that bind
    for (int j = 0; j < ctx.S; ++j) {
        const auto js = static_cast<std::size_t>(j);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return ctx.weights[a][js] < ctx.weights[b][js];
        });
        SubsetCut cut;
        for (int k = 1; k < ctx.na; ++k) {
            cut.k = k;
            cut.subset.push_back(static_cast<int>(order[static_cast<std::size_t>(k - 1)]));
            std::sort(cut.subset.begin(), cut.subset.end());
            if (ctx.duty_share[js][static_cast<std::size_t>(k - 1)] < 1.0 - 1e-12)
                cuts[js].push_back(cut);
        }
    }

    const int max_rounds = ctx.na * ctx.S + 2;
    for (int round = 0; round < max_rounds; ++round) {
        const LpProblem lp = assemble_internal(ctx, t_total, no_ks, &cuts);
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::optimal) return out;
        std::vector<std::vector<double>> q = extract(sol);

        bool added = false, violated = false;
        for (int j = 0; j < ctx.S; ++j) {
            const auto js = static_cast<std::size_t>(j);
            double total = 0.0;
            for (int i = 0; i < ctx.na; ++i)
                total += q[static_cast<std::size_t>(i)][js];
            if (total <= 1e-12) continue;
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return q[a][js] > q[b][js];
            });
            double cum = 0.0;
            for (int k = 1; k < ctx.na; ++k) {
                cum += q[order[static_cast<std::size_t>(k - 1)]][js];
                const double share = ctx.duty_share[js][static_cast<std::size_t>(k - 1)];
                if (cum <= share * total + 1e-9) continue;
                violated = true;
                SubsetCut cut;
                cut.k = k;
                for (int p = 0; p < k; ++p)
                    cut.subset.push_back(
                        static_cast<int>(order[static_cast<std::size_t>(p)]));
                std::sort(cut.subset.begin(), cut.subset.end());
                const bool dup = std::any_of(
                    cuts[js].begin(), cuts[js].end(), [&](const SubsetCut& c) {
                        return c.k == cut.k && c.subset == cut.subset;
                    });
                if (!dup) {
                    cuts[js].push_back(std::move(cut));
                    added = true;
                }
            }
        }
        if (!violated) {
            out.feasible = true;
            out.q_active = std::move(q);
            out.objective = sol.objective_value;
            return out;
        }
        if (!added) break;  // tolerance stalemate: settle with the full LP
    }
    solve_full();
    return out;
}

ChargePlan make_plan(const PackState& pack, const Context& ctx, double i_cc,
                     const SolveAttempt& attempt) {
    ChargePlan plan;
    plan.feasible = true;
    plan.u_phase = ctx.u_phase;
    plan.i_cc = i_cc;
    plan.grid = ctx.grid;
    plan.stage_duties = ctx.duties;
    plan.active = ctx.active;
    plan.objective_value = attempt.objective;
    plan.q.assign(pack.size(), std::vector<double>(static_cast<std::size_t>(ctx.S), 0.0));
    for (int i = 0; i < ctx.na; ++i)
        plan.q[ctx.active[static_cast<std::size_t>(i)]] =
            attempt.q_active[static_cast<std::size_t>(i)];

    plan.stage_durations_h.assign(static_cast<std::size_t>(ctx.S), 0.0);
    for (int j = 0; j < ctx.S; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (ctx.duty_total[js] <= 1e-12) continue;
        double stage_sum = 0.0;
        for (int i = 0; i < ctx.na; ++i)
            stage_sum += attempt.q_active[static_cast<std::size_t>(i)][js];
        plan.stage_durations_h[js] =
            stage_sum / (ctx.q_no * ctx.grid.crate_avg[js] * ctx.duty_total[js]);
    }
    return plan;
}

}  // namespace

LpProblem assemble_lp(const PackState& pack, const ChargeSession& session,
                      const StageGrid& grid, double u_phase,
                      const OptimizerConfig& cfg) {
    const Context ctx = make_context(pack, session, grid, u_phase, cfg);
    return assemble_internal(ctx, session.t_total_h, full_k_sets(ctx));
}

namespace {

/// Aggregate upper bound on the charge deliverable within the window: walk
/// the stages in order, each at its pack-level rate, honouring only the
/// aggregate per-stage SOC caps. A valid relaxation of the session LP, so a
/// miss here proves the LP infeasible without solving it.
bool window_can_fit(const Context& ctx, double t_total) {
    double cum = ctx.q_init_sum, t_left = t_total;
    for (int j = 0; j < ctx.S && t_left > 1e-15; ++j) {
        const auto js = static_cast<std::size_t>(j);
        const double rate = ctx.q_no * ctx.grid.crate_avg[js] * ctx.duty_total[js];
        if (rate <= 1e-12) break;
        const double room = ctx.grid.soc_max[js] * ctx.q_max_sum - cum;
        if (room <= 0.0) continue;
        const double add = std::min(room, rate * t_left);
        cum += add;
        t_left -= add / rate;
    }
    return cum + 1e-9 >= ctx.q_init_sum + ctx.demand;
}

}  // namespace

ChargePlan optimize_charge_plan(const PackState& pack, const ChargeSession& session,
                                const OptimizerConfig& cfg) {
    ChargePlan no_plan;
    const auto active = pack.active_cells();
    if (active.empty()) return no_plan;
    const double q_no = pack.params[active[0]].nominal_capacity_ah;

    double q_init_sum = 0.0, headroom = 0.0;
    for (std::size_t i : active) {
        q_init_sum += session.q_initial_ah[i];
        headroom += pack.cells[i].max_capacity_ah - session.q_initial_ah[i];
    }
    const double demand = session.q_final_sum_ah - q_init_sum;
    if (demand < -1e-9 || demand > headroom + 1e-9) return no_plan;

    std::vector<double> icc_grid =
        cfg.i_cc_grid_a.empty() ? default_icc_grid(q_no) : cfg.i_cc_grid_a;
    std::sort(icc_grid.begin(), icc_grid.end());
    icc_grid.erase(std::unique(icc_grid.begin(), icc_grid.end()), icc_grid.end());
    const double icc_max = icc_grid.back();

    const double u_max = cfg.u_phase_max > 0.0
                             ? cfg.u_phase_max
                             : kNominalCellVoltage * static_cast<double>(active.size());
    const double u_step = cfg.u_phase_step > 0.0 ? cfg.u_phase_step : kNominalCellVoltage;

    // Higher phase voltages activate more levels and charge faster; lower
    // ones allow more imbalance. Start from the maximum permissible voltage
    // and only descend while the session is infeasible.
    const StageGrid grid_max = build_stage_grid(icc_max, q_no, cfg.m);
    for (double u_phase = u_max; u_phase > 1e-9; u_phase -= u_step) {
        const Context ctx_max = make_context(pack, session, grid_max, u_phase, cfg);
        if (!window_can_fit(ctx_max, session.t_total_h)) continue;
        const SolveAttempt at_max = solve_session_lp(ctx_max, session.t_total_h, cfg);
        if (!at_max.feasible) continue;

        ChargePlan best = make_plan(pack, ctx_max, icc_max, at_max);
        if (cfg.fast_charge) return best;

        for (auto it = icc_grid.rbegin(); it != icc_grid.rend(); ++it) {
            const double icc = *it;
            if (icc == icc_max) continue;
            const StageGrid grid = build_stage_grid(icc, q_no, cfg.m);
            const Context ctx = make_context(pack, session, grid, u_phase, cfg);
            const SolveAttempt at = solve_session_lp(ctx, session.t_total_h, cfg);
            if (at.feasible && at.objective < best.objective_value - 1e-12)
                best = make_plan(pack, ctx, icc, at);
        }
        return best;
    }
    return no_plan;
}

PlanValidation validate_plan(const ChargePlan& plan, const PackState& pack,
                             const ChargeSession& session, const OptimizerConfig& cfg) {
    PlanValidation v;
    auto fail = [&](const std::string& msg) {
        v.ok = false;
        v.detail = msg;
        return v;
    };
    if (!plan.feasible) return fail("plan not feasible");

    const StageGrid grid = build_stage_grid(plan.i_cc,
                                            pack.params[plan.active[0]].nominal_capacity_ah,
                                            plan.grid.m);
    const Context ctx = make_context(pack, session, grid, plan.u_phase, cfg);
    const double tol = 1e-6;
    const int na = ctx.na, S = ctx.S;

    // family 1: nonnegativity, and zero allocation off the active set
    for (std::size_t i = 0; i < pack.size(); ++i)
        for (double qij : plan.q[i]) {
            if (qij < -tol) return fail("constraint 1: negative allocation");
            if (pack.bypassed(i) && std::abs(qij) > tol)
                return fail("constraint 1: allocation to bypassed cell");
        }

    // family 2: total added charge
    double total = 0.0;
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < S; ++j)
            total += plan.q[ctx.active[static_cast<std::size_t>(i)]]
                           [static_cast<std::size_t>(j)];
    if (std::abs(total - ctx.demand) > tol) return fail("constraint 2: charge total");

    // family 3: charging time
    double time = 0.0;
    for (int j = 0; j < S; ++j) {
        const auto js = static_cast<std::size_t>(j);
        double stage_sum = 0.0;
        for (int i = 0; i < na; ++i)
            stage_sum += plan.q[ctx.active[static_cast<std::size_t>(i)]][js];
        if (ctx.duty_total[js] <= 1e-12) {
            if (stage_sum > tol) return fail("constraint 3: allocation to dead stage");
            continue;
        }
        time += stage_sum / (ctx.q_no * ctx.grid.crate_avg[js] * ctx.duty_total[js]);
    }
    if (time > session.t_total_h + tol) return fail("constraint 3: time limit");

    // family 4: cumulative SOC caps on the *added* charge. A cell that
    // already sits above a stage cap cannot be discharged by a charge plan;
    // it just gets nothing in that stage, so its headroom clamps at zero.
    for (int i = 0; i < na; ++i) {
        const auto is = static_cast<std::size_t>(i);
        double cum = 0.0;
        for (int k = 0; k < S; ++k) {
            cum += plan.q[ctx.active[is]][static_cast<std::size_t>(k)];
            const double headroom = std::max(
                0.0, ctx.q_max[is] * ctx.grid.soc_max[static_cast<std::size_t>(k)] -
                         ctx.q_init[is]);
            if (cum > headroom + tol) return fail("constraint 4: SOC cap");
        }
    }

    // family 5: stage-wise achievability (sorting route)
    for (int j = 0; j < S; ++j) {
        const auto js = static_cast<std::size_t>(j);
        std::vector<double> col;
        double stage_sum = 0.0;
        for (int i = 0; i < na; ++i) {
            col.push_back(plan.q[ctx.active[static_cast<std::size_t>(i)]][js]);
            stage_sum += col.back();
        }
        if (stage_sum <= tol) continue;
        std::sort(col.begin(), col.end(), std::greater<>());
        double cum = 0.0;
        for (int k = 1; k <= na; ++k) {
            cum += col[static_cast<std::size_t>(k - 1)];
            const double share = ctx.duty_share[js][static_cast<std::size_t>(k - 1)];
            if (cum > share * stage_sum + tol)
                return fail("constraint 5: stage achievability");
        }
    }

    // family 6: SOH-consistent ordering of final stored charge
    std::vector<double> q_final(static_cast<std::size_t>(na));
    for (int i = 0; i < na; ++i) {
        const auto is = static_cast<std::size_t>(i);
        q_final[is] = ctx.q_init[is];
        for (int j = 0; j < S; ++j)
            q_final[is] += plan.q[ctx.active[is]][static_cast<std::size_t>(j)];
    }
    for (int p = 0; p + 1 < na; ++p) {
        const std::size_t hi = ctx.soh_order[static_cast<std::size_t>(p)];
        const std::size_t lo = ctx.soh_order[static_cast<std::size_t>(p) + 1];
        if (q_final[lo] > q_final[hi] + tol) return fail("constraint 6: SOH ordering");
    }

    // family 7: discharge full-utilization
    const double final_sum = std::accumulate(q_final.begin(), q_final.end(), 0.0);
    if (final_sum > tol) {
        double cum = 0.0;
        for (int k = 1; k <= na; ++k) {
            cum += q_final[ctx.soh_order[static_cast<std::size_t>(k - 1)]];
            const double share = ctx.dis_share[static_cast<std::size_t>(k - 1)];
            if (cum > share * final_sum + tol)
                return fail("constraint 7: discharge feasibility");
        }
    }
    return v;
}

ExecutionResult execute_charge_plan(const ChargePlan& plan, PackState& pack,
                                    double period_h,
                                    const std::function<void(double)>& on_period) {
    const int na = static_cast<int>(plan.active.size());
    const int S = plan.grid.m + 1;
    const double q_no = pack.params[plan.active[0]].nominal_capacity_ah;

    ExecutionResult result;
    result.applied_ah.assign(pack.size(), 0.0);
    result.events.resize(pack.size());
    result.stage_time_h.assign(static_cast<std::size_t>(S), 0.0);

    std::vector<double> residual(static_cast<std::size_t>(na), 0.0);
    std::uint64_t rotation = 0;
    double elapsed_h = 0.0;

    for (int j = 0; j < S; ++j) {
        const auto js = static_cast<std::size_t>(j);
        for (int i = 0; i < na; ++i)
            residual[static_cast<std::size_t>(i)] +=
                plan.q[plan.active[static_cast<std::size_t>(i)]][js];

        const DutyCyclePattern& duties = plan.stage_duties[js];
        const double current_a = q_no * plan.grid.crate_avg[js];
        const double quantum = current_a * (duties.duties.empty() ? 0.0 : duties.duties[0]) *
                               period_h;
        if (quantum <= 0.0) continue;

        std::vector<double> soc_start(static_cast<std::size_t>(na));
        for (int i = 0; i < na; ++i)
            soc_start[static_cast<std::size_t>(i)] =
                pack.cells[plan.active[static_cast<std::size_t>(i)]].soc;

        const long max_periods =
            static_cast<long>(plan.stage_durations_h[js] / period_h * 10.0) + 100000;
        long periods = 0;
        while (periods < max_periods) {
            double max_res = 0.0;
            for (double r : residual) max_res = std::max(max_res, r);
            // Intermediate stages roll sub-quantum residuals into the next
            // stage; the last stage finishes exactly (deliveries are capped
            // at the residual, so every cell snaps onto its target).
            if (max_res <= (j + 1 < S ? quantum : 0.0)) break;

            const LevelAssignment a = assign_strategy1(residual, rotation++);
            const auto deltas = step_period(a, duties, current_a, period_h);
            double delivered = 0.0;
            for (int i = 0; i < na; ++i) {
                const auto is = static_cast<std::size_t>(i);
                const double apply = std::min(deltas[is], residual[is]);
                if (apply <= 0.0) continue;
                CellState& cell = pack.cells[plan.active[is]];
                cell.set_charge(cell.remaining_charge_ah + apply);
                residual[is] -= apply;
                result.applied_ah[plan.active[is]] += apply;
                delivered += apply;
            }
            ++periods;
            elapsed_h += period_h;
            if (on_period) on_period(elapsed_h);
            if (delivered <= 1e-15) {  // duty starvation: roll into next stage
                ++result.stalls;
                break;
            }
        }
        result.stage_time_h[js] = static_cast<double>(periods) * period_h;

        for (std::size_t c = 0; c < pack.size(); ++c) {
            const bool is_active =
                std::find(plan.active.begin(), plan.active.end(), c) != plan.active.end();
            AgingEvent ev;
            ev.duration_h = result.stage_time_h[js];
            ev.temperature_k = celsius_to_kelvin(pack.params[c].temperature_active_c);
            if (is_active) {
                const auto pos = static_cast<std::size_t>(
                    std::find(plan.active.begin(), plan.active.end(), c) -
                    plan.active.begin());
                ev.delta_soc = pack.cells[c].soc - soc_start[pos];
                ev.mean_soc = 0.5 * (pack.cells[c].soc + soc_start[pos]);
                ev.crate = plan.grid.crate_avg[js];
            } else {
                ev.delta_soc = 0.0;
                ev.mean_soc = pack.cells[c].soc;
                ev.crate = 0.0;
            }
            if (ev.duration_h > 0.0) result.events[c].push_back(ev);
        }
    }
    return result;
}

std::string ChargePlan::to_json_string() const {
    nlohmann::json j;
    j["feasible"] = feasible;
    j["u_phase_v"] = u_phase;
    j["i_cc_a"] = i_cc;
    j["objective_value"] = objective_value;
    j["stage_durations_h"] = stage_durations_h;
    j["soc_max"] = grid.soc_max;
    j["crate_avg"] = grid.crate_avg;
    j["q_ah"] = q;
    return j.dump(2);
}

}  // namespace cellsim
