#include "cellsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#ifdef CELLSIM_HAVE_OPENMP
#include <omp.h>
#endif

namespace cellsim {

namespace {

// Per-purpose RNG streams so the strategy choice cannot perturb any random
// sequence (paired-seed discipline). Purpose ids: 1 gamma, 2 temperature,
// 4 SOH-estimate noise; 3 is reserved by generate_records.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
    std::seed_seq seq{purpose, seed};
    return std::mt19937_64(seq);
}

enum class FillMode { equal_soc, equal_charge };

// Water-filling allocation: adds `demand` Ah across cells, lifting the lowest
// cells (by SOC or absolute charge) to a common level first. Returns per-cell
// additions; total is min(demand, headroom).
std::vector<double> water_fill(const std::vector<double>& q,
                               const std::vector<double>& cap, double demand,
                               FillMode mode) {
    const std::size_t n = q.size();
    std::vector<double> added(n, 0.0);
    if (demand <= 0.0) return added;

    const auto target = [&](double tau, std::size_t i) {
        const double level = mode == FillMode::equal_soc ? tau * cap[i] : tau;
        return std::min(std::max(q[i], level), cap[i]);
    };
    const auto total_added = [&](double tau) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += target(tau, i) - q[i];
        return s;
    };

    double lo = 0.0;
    double hi = mode == FillMode::equal_soc
                    ? 1.0
                    : *std::max_element(cap.begin(), cap.end());
    if (total_added(hi) <= demand) {
        for (std::size_t i = 0; i < n; ++i) added[i] = cap[i] - q[i];
        return added;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (total_added(mid) < demand ? lo : hi) = mid;
    }
    for (std::size_t i = 0; i < n; ++i) added[i] = target(hi, i) - q[i];
    return added;
}

// Mirror image of water_fill: removes `demand` Ah, draining the highest cells
// down to a common level first.
std::vector<double> water_drain(const std::vector<double>& q,
                                const std::vector<double>& cap, double demand,
                                FillMode mode) {
    const std::size_t n = q.size();
    std::vector<double> removed(n, 0.0);
    if (demand <= 0.0) return removed;

    const auto target = [&](double tau, std::size_t i) {
        const double level = mode == FillMode::equal_soc ? tau * cap[i] : tau;
        return std::max(std::min(q[i], level), 0.0);
    };
    const auto total_removed = [&](double tau) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += q[i] - target(tau, i);
        return s;
    };

    double lo = 0.0;
    double hi = mode == FillMode::equal_soc
                    ? 1.0
                    : *std::max_element(q.begin(), q.end());
    if (total_removed(0.0) <= demand) {
        for (std::size_t i = 0; i < n; ++i) removed[i] = q[i];
        return removed;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (total_removed(mid) > demand ? lo : hi) = mid;
    }
    for (std::size_t i = 0; i < n; ++i) removed[i] = q[i] - target(hi, i);
    return removed;
}

PackState build_pack(const ScenarioConfig& sc, double initial_soc) {
    std::mt19937_64 gamma_rng = stream(sc.seed, 1);
    std::mt19937_64 temp_rng = stream(sc.seed, 2);
    std::normal_distribution<double> gamma_dist(1.0, sc.sigma_gamma);
    std::normal_distribution<double> temp_dist(sc.temp_mean_c, sc.temp_std_c);

    PackState pack;
    pack.soh_eol = sc.soh_eol;
    for (int i = 0; i < sc.n_cells; ++i) {
        CellParams p;
        p.nominal_capacity_ah = sc.q_no_ah;
        p.internal_resistance_ohm = sc.r0_ohm;
        p.chemistry = sc.chemistry;
        p.gamma = std::max(gamma_dist(gamma_rng), 0.5);
        p.temperature_active_c = temp_dist(temp_rng);
        p.temperature_rest_c = sc.rest_temp_c;
        pack.params.push_back(p);
        pack.cells.push_back(CellState::fresh(p, initial_soc));
    }
    return pack;
}

void apply_calendar_event(PackState& pack, std::size_t i, double duration_h,
                          double temp_c, const AgingModel& model) {
    if (duration_h <= 0.0) return;
    AgingEvent ev;
    ev.delta_soc = 0.0;
    ev.mean_soc = pack.cells[i].soc;
    ev.crate = 0.0;
    ev.temperature_k = celsius_to_kelvin(temp_c);
    ev.duration_h = duration_h;
    apply_event(pack.params[i], pack.cells[i], ev, model);
}

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SimResult run_longterm(const ScenarioConfig& sc,
                       const std::vector<ChargingRecord>* records_in) {
    const std::vector<ChargingRecord> records =
        records_in ? *records_in
                   : generate_records(sc.seed, sc.n_records, sc.dc_fast_fraction);
    if (records.empty()) throw std::invalid_argument("run_longterm: no records");

    AgingModel model;
    model.knee_soh = sc.knee_soh;
    model.lfp.calendar_scale = model.lmo.calendar_scale = sc.calendar_scale;
    model.lfp.cyclic_scale = model.lmo.cyclic_scale = sc.cyclic_scale;

    PackState pack = build_pack(sc, records.front().start_soc);
    std::mt19937_64 noise_rng = stream(sc.seed, 4);
    std::normal_distribution<double> noise(0.0, 1.0);

    OptimizerConfig cfg;
    cfg.discharge_avg_crate = sc.discharge_avg_crate;

    SimResult result;
    double t_days = 0.0, charged_ah = 0.0;
    std::size_t rec_idx = 0;
    const double guard_days = 30.0 * 365.0;
    const double icc_max_a = max_charge_crate(0.0) * sc.q_no_ah;

    while (pack_soh(pack) > sc.soh_eol) {
        const ChargingRecord& rec = records[rec_idx % records.size()];
        const ChargingRecord& next = records[(rec_idx + 1) % records.size()];
        if (rec_idx % 10 == 0) {
            result.soh_time_days.push_back(t_days);
            std::vector<double> sample;
            for (const auto& c : pack.cells) sample.push_back(c.soh);
            result.soh_samples.push_back(std::move(sample));
        }
        ++rec_idx;

        // drawn every session regardless of strategy (paired-seed discipline)
        std::vector<double> soh_noise(pack.size());
        for (auto& v : soh_noise) v = noise(noise_rng) * sc.soh_noise_std;

        auto active = pack.active_cells();
        if (active.empty()) break;

        // --- charge leg ---
        double cap_sum = 0.0, q_sum = 0.0;
        for (std::size_t i : active) {
            cap_sum += pack.cells[i].max_capacity_ah;
            q_sum += pack.cells[i].remaining_charge_ah;
        }
        const double demand = rec.end_soc * cap_sum - q_sum;
        double charge_time_h = 0.0;

        if (demand > 1e-9) {
            bool planned = false;
            if (sc.strategy == Strategy::soc_soh_aware && rec.mode == ChargeMode::AC) {
                ChargeSession session;
                for (std::size_t i = 0; i < pack.size(); ++i)
                    session.q_initial_ah.push_back(pack.cells[i].remaining_charge_ah);
                session.q_final_sum_ah = rec.end_soc * cap_sum;
                session.t_total_h = rec.duration_h;
                for (std::size_t i = 0; i < pack.size(); ++i)
                    session.soh_estimates.push_back(
                        std::clamp(pack.cells[i].soh + soh_noise[i], 0.01, 1.2));

                const double icc_low =
                    std::clamp(1.5 * rec.implied_crate(), 0.2, max_charge_crate(0.0)) *
                    sc.q_no_ah;
                cfg.i_cc_grid_a = {icc_low, icc_max_a};
                const ChargePlan plan = optimize_charge_plan(pack, session, cfg);

                if (plan.feasible) {
                    const int stages = plan.grid.m + 1;
                    for (int j = 0; j < stages; ++j) {
                        const auto js = static_cast<std::size_t>(j);
                        if (plan.stage_durations_h[js] <= 0.0) continue;
                        for (std::size_t i : plan.active) {
                            const double dq = plan.q[i][js];
                            CellState& cell = pack.cells[i];
                            const double soc0 = cell.soc;
                            cell.set_charge(cell.remaining_charge_ah + dq);
                            AgingEvent ev;
                            ev.delta_soc = cell.soc - soc0;
                            ev.mean_soc = 0.5 * (cell.soc + soc0);
                            ev.crate = plan.grid.crate_avg[js];
                            ev.temperature_k =
                                celsius_to_kelvin(pack.params[i].temperature_active_c);
                            ev.duration_h = plan.stage_durations_h[js];
                            apply_event(pack.params[i], cell, ev, model);
                            charged_ah += dq;
                        }
                        charge_time_h += plan.stage_durations_h[js];
                    }
                    for (std::size_t i = 0; i < pack.size(); ++i)
                        if (pack.bypassed(i) &&
                            std::find(plan.active.begin(), plan.active.end(), i) ==
                                plan.active.end())
                            apply_calendar_event(pack, i, charge_time_h,
                                                 pack.params[i].temperature_active_c,
                                                 model);
                    planned = true;
                } else {
                    ++result.sessions_unoptimized;
                }
            }
            if (!planned) {
                std::vector<double> q, cap;
                for (std::size_t i : active) {
                    q.push_back(pack.cells[i].remaining_charge_ah);
                    cap.push_back(pack.cells[i].max_capacity_ah);
                }
                const FillMode fm = sc.strategy == Strategy::soc_balance
                                        ? FillMode::equal_soc
                                        : FillMode::equal_charge;
                const std::vector<double> added = water_fill(q, cap, demand, fm);
                charge_time_h = rec.duration_h;
                for (std::size_t p = 0; p < active.size(); ++p) {
                    CellState& cell = pack.cells[active[p]];
                    const double soc0 = cell.soc;
                    cell.set_charge(cell.remaining_charge_ah + added[p]);
                    AgingEvent ev;
                    ev.delta_soc = cell.soc - soc0;
                    ev.mean_soc = 0.5 * (cell.soc + soc0);
                    ev.crate = std::abs(ev.delta_soc) / charge_time_h;
                    ev.temperature_k = celsius_to_kelvin(
                        pack.params[active[p]].temperature_active_c);
                    ev.duration_h = charge_time_h;
                    apply_event(pack.params[active[p]], cell, ev, model);
                    charged_ah += added[p];
                }
                for (std::size_t i = 0; i < pack.size(); ++i)
                    if (pack.bypassed(i) &&
                        std::find(active.begin(), active.end(), i) == active.end())
                        apply_calendar_event(pack, i, charge_time_h,
                                             pack.params[i].temperature_active_c, model);
            }
        }
        t_days += charge_time_h / 24.0;

        // --- discharge to the next session's start SOC, then rest ---
        active = pack.active_cells();
        if (active.empty()) break;
        cap_sum = q_sum = 0.0;
        for (std::size_t i : active) {
            cap_sum += pack.cells[i].max_capacity_ah;
            q_sum += pack.cells[i].remaining_charge_ah;
        }
        const double dis_demand = q_sum - next.start_soc * cap_sum;
        double dis_time_h = 0.0;
        if (dis_demand > 1e-9) {
            std::vector<double> q, cap;
            for (std::size_t i : active) {
                q.push_back(pack.cells[i].remaining_charge_ah);
                cap.push_back(pack.cells[i].max_capacity_ah);
            }
            const FillMode fm = sc.strategy == Strategy::soc_balance
                                    ? FillMode::equal_soc
                                    : FillMode::equal_charge;
            const std::vector<double> removed = water_drain(q, cap, dis_demand, fm);
            dis_time_h = (dis_demand / cap_sum) / sc.discharge_avg_crate;
            for (std::size_t p = 0; p < active.size(); ++p) {
                CellState& cell = pack.cells[active[p]];
                const double soc0 = cell.soc;
                cell.set_charge(cell.remaining_charge_ah - removed[p]);
                AgingEvent ev;
                ev.delta_soc = cell.soc - soc0;  // negative
                ev.mean_soc = 0.5 * (cell.soc + soc0);
                ev.crate = std::abs(ev.delta_soc) / dis_time_h;
                ev.temperature_k =
                    celsius_to_kelvin(pack.params[active[p]].temperature_active_c);
                ev.duration_h = dis_time_h;
                apply_event(pack.params[active[p]], cell, ev, model);
            }
            for (std::size_t i = 0; i < pack.size(); ++i)
                if (pack.bypassed(i) &&
                    std::find(active.begin(), active.end(), i) == active.end())
                    apply_calendar_event(pack, i, dis_time_h,
                                         pack.params[i].temperature_active_c, model);
        }
        const double rest_h = std::max(rec.gap_to_next_h - dis_time_h, 0.0);
        for (std::size_t i = 0; i < pack.size(); ++i)
            apply_calendar_event(pack, i, rest_h, pack.params[i].temperature_rest_c,
                                 model);
        t_days += rec.gap_to_next_h / 24.0;

        if (t_days > guard_days)
            throw GuardError("run_longterm: 30-simulated-year guard tripped (scenario '" +
                             sc.name + "')");
    }

    result.lifetime_days = t_days;
    result.lifetime_efc = charged_ah / (sc.n_cells * sc.q_no_ah);
    double lo = 1.0, hi = 0.0;
    for (const auto& c : pack.cells) {
        lo = std::min(lo, c.soh);
        hi = std::max(hi, c.soh);
    }
    result.final_soh_spread = hi - lo;
    result.soh_time_days.push_back(t_days);
    std::vector<double> sample;
    for (const auto& c : pack.cells) sample.push_back(c.soh);
    result.soh_samples.push_back(std::move(sample));
    return result;
}

DriveCycleResult run_drive_cycle(double charge_window_h) {
    constexpr int n = 10;
    constexpr double q_no = 2.3;
    PackState pack;
    for (int i = 0; i < n; ++i) {
        CellParams p;
        p.nominal_capacity_ah = q_no;
        p.chemistry = Chemistry::LFP;
        pack.params.push_back(p);
        CellState c = CellState::fresh(p, 0.0);
        c.set_capacity((0.95 - 0.018 * i) * q_no, q_no);  // SOH-ranked pack
        pack.cells.push_back(c);
    }

    double cap_sum = 0.0;
    for (const auto& c : pack.cells) cap_sum += c.max_capacity_ah;

    ChargeSession session;
    session.q_initial_ah.assign(n, 0.0);
    session.q_final_sum_ah = 0.7 * cap_sum;
    session.t_total_h = charge_window_h;
    OptimizerConfig cfg;
    // Vehicle demo: use the conservative discharge pattern so the plan leaves
    // every cell drainable and remaining capacity re-equalizes within the
    // first quarter of the drive instead of stranding the weak cells' share.
    cfg.u_dis_phase_scale = 1.8;
    // The demo charger has a fixed current rating (about 1.3 C).
    cfg.i_cc_grid_a = {1.3 * pack.params[0].nominal_capacity_ah};
    const ChargePlan plan = optimize_charge_plan(pack, session, cfg);
    if (!plan.feasible)
        throw std::runtime_error("run_drive_cycle: charge plan infeasible");

    DriveCycleResult out;
    const auto sample = [&] {
        std::vector<double> socs;
        for (const auto& c : pack.cells) socs.push_back(c.soc);
        out.soc.push_back(std::move(socs));
        out.discharged_ah.push_back(out.discharged_ah.empty()
                                        ? 0.0
                                        : out.discharged_ah.back());
    };
    sample();

    const double period_h = 1.0 / 3600.0;
    execute_charge_plan(plan, pack, period_h, [&](double) { sample(); });
    out.charge_end_index = out.soc.size() - 1;

    {
        const auto& eoc = out.soc.back();
        const double mean = std::accumulate(eoc.begin(), eoc.end(), 0.0) / n;
        double var = 0.0;
        for (double s : eoc) var += (s - mean) * (s - mean);
        out.end_of_charge_soc_variance = var / n;
    }

    for (int s = 0; s < 6 * 3600; ++s) sample();  // 6 h rest
    out.rest_end_index = out.soc.size() - 1;

    // full discharge under Strategy 2; the phase reference leaves headroom
    // for imbalance (u_phase = 0.7 n u_ter)
    const double line_current_a = 1.0 * q_no;
    const OcvCurve curve{Chemistry::LFP};
    std::uint64_t rotation = 0;
    std::vector<double> charges(n);
    for (long step = 0; step < 24L * 3600L; ++step) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            charges[static_cast<std::size_t>(i)] =
                pack.cells[static_cast<std::size_t>(i)].remaining_charge_ah;
            total += charges[static_cast<std::size_t>(i)];
        }
        if (total <= 1e-4 * cap_sum) break;
        const double u_ter = curve(std::max(pack_soc(pack), OcvCurve::kSocFloor));
        const DutyCyclePattern duties = sinusoidal_duties(u_ter, 0.7 * n * u_ter, n);
        const LevelAssignment a =
            assign_strategy2(charges, FlowDirection::discharge, rotation++);
        const auto deltas =
            step_period(a, duties, line_current_a, period_h, FlowDirection::discharge);
        double removed = 0.0;
        for (int i = 0; i < n; ++i) {
            CellState& cell = pack.cells[static_cast<std::size_t>(i)];
            const double take =
                std::min(-deltas[static_cast<std::size_t>(i)], cell.remaining_charge_ah);
            if (take <= 0.0) continue;
            cell.set_charge(cell.remaining_charge_ah - take);
            removed += take;
        }
        sample();
        out.discharged_ah.back() += removed;
        if (removed <= 1e-12) break;  // stranded charge: no duty reaches it
    }

    double residual = 0.0;
    for (const auto& c : pack.cells) residual += c.remaining_charge_ah;
    out.stranded_fraction = residual / cap_sum;
    return out;
}

void DriveCycleResult::write_csv(const std::string& path,
                                 const std::string& preamble) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("drive cycle: cannot write " + path);
    if (!preamble.empty()) out << "# " << preamble << '\n';
    out << "t_s";
    for (std::size_t i = 0; i < (soc.empty() ? 0 : soc[0].size()); ++i)
        out << ",soc_cell" << i;
    out << ",discharged_ah,phase\n";
    out.precision(8);
    for (std::size_t t = 0; t < soc.size(); ++t) {
        out << t;
        for (double s : soc[t]) out << ',' << s;
        const char* phase = t <= charge_end_index ? "charge"
                            : t <= rest_end_index ? "rest"
                                                  : "discharge";
        out << ',' << discharged_ah[t] << ',' << phase << '\n';
    }
}

namespace {

// Runs tasks over OpenMP (when available), collecting the first exception.
template <typename F>
void parallel_tasks(std::size_t count, int threads, F&& task) {
    std::vector<std::exception_ptr> errors(count);
#ifdef CELLSIM_HAVE_OPENMP
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
    for (long i = 0; i < static_cast<long>(count); ++i) {
        try {
            task(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
#else
    (void)threads;
    for (std::size_t i = 0; i < count; ++i) {
        try {
            task(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
#endif
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

ImprovementRow run_paired(const ScenarioConfig& base,
                          const std::vector<std::uint64_t>& seeds, int threads) {
    ImprovementRow row;
    row.name = base.name;
    row.lifetime_soc_days.assign(seeds.size(), 0.0);
    row.lifetime_soh_days.assign(seeds.size(), 0.0);

    parallel_tasks(seeds.size() * 2, threads, [&](std::size_t t) {
        ScenarioConfig sc = base;
        sc.seed = seeds[t / 2];
        sc.strategy = t % 2 == 0 ? Strategy::soc_balance : Strategy::soc_soh_aware;
        const SimResult r = run_longterm(sc);
        (t % 2 == 0 ? row.lifetime_soc_days : row.lifetime_soh_days)[t / 2] =
            r.lifetime_days;
    });

    for (std::size_t s = 0; s < seeds.size(); ++s)
        row.improvement_pct.push_back(100.0 *
                                      (row.lifetime_soh_days[s] - row.lifetime_soc_days[s]) /
                                      row.lifetime_soc_days[s]);
    row.median_improvement_pct = median(row.improvement_pct);
    return row;
}

std::vector<ScenarioConfig> default_sensitivity_suite(const ScenarioConfig& base) {
    std::vector<ScenarioConfig> suite;
    const auto add = [&](const std::string& name, auto&& mutate) {
        ScenarioConfig sc = base;
        sc.name = name;
        mutate(sc);
        suite.push_back(sc);
    };
    add("default", [](ScenarioConfig&) {});
    add("doubled-calendar", [](ScenarioConfig& s) { s.calendar_scale = 2.0; });
    add("doubled-cyclic", [](ScenarioConfig& s) { s.cyclic_scale = 2.0; });
    add("knee-85", [](ScenarioConfig& s) { s.knee_soh = 0.85; });
    add("no-knee", [](ScenarioConfig& s) { s.knee_soh = 0.0; });
    add("cells-40", [](ScenarioConfig& s) { s.n_cells = 40; });
    add("sigma-gamma-015", [](ScenarioConfig& s) { s.sigma_gamma = 0.15; });
    add("r0-01", [](ScenarioConfig& s) { s.r0_ohm = 0.1; });
    add("fast-50", [](ScenarioConfig& s) { s.dc_fast_fraction = 0.5; });
    add("temp-45", [](ScenarioConfig& s) { s.temp_mean_c = 45.0; });
    add("temp-std-4", [](ScenarioConfig& s) { s.temp_std_c = 4.0; });
    add("eol-80", [](ScenarioConfig& s) { s.soh_eol = 0.80; });
    add("eol-75", [](ScenarioConfig& s) { s.soh_eol = 0.75; });
    add("eol-65", [](ScenarioConfig& s) { s.soh_eol = 0.65; });
    return suite;
}

std::vector<ImprovementRow> run_sensitivity(const std::vector<ScenarioConfig>& suite,
                                            const std::vector<std::uint64_t>& seeds,
                                            int threads) {
    std::vector<ImprovementRow> rows(suite.size());
    for (std::size_t r = 0; r < suite.size(); ++r) {
        rows[r].name = suite[r].name;
        rows[r].lifetime_soc_days.assign(seeds.size(), 0.0);
        rows[r].lifetime_soh_days.assign(seeds.size(), 0.0);
    }
    // flatten (row, seed, strategy) so small rows don't serialize the suite
    parallel_tasks(suite.size() * seeds.size() * 2, threads, [&](std::size_t t) {
        const std::size_t r = t / (seeds.size() * 2);
        const std::size_t s = (t / 2) % seeds.size();
        ScenarioConfig sc = suite[r];
        sc.seed = seeds[s];
        sc.strategy = t % 2 == 0 ? Strategy::soc_balance : Strategy::soc_soh_aware;
        const SimResult res = run_longterm(sc);
        (t % 2 == 0 ? rows[r].lifetime_soc_days : rows[r].lifetime_soh_days)[s] =
            res.lifetime_days;
    });
    for (auto& row : rows) {
        for (std::size_t s = 0; s < seeds.size(); ++s)
            row.improvement_pct.push_back(
                100.0 * (row.lifetime_soh_days[s] - row.lifetime_soc_days[s]) /
                row.lifetime_soc_days[s]);
        row.median_improvement_pct = median(row.improvement_pct);
    }
    return rows;
}

std::string ScenarioConfig::to_json_string() const {
    nlohmann::json j;
    j["name"] = name;
    j["chemistry"] = chemistry == Chemistry::LFP ? "lfp" : "lmo";
    j["n_cells"] = n_cells;
    j["q_no_ah"] = q_no_ah;
    j["r0_ohm"] = r0_ohm;
    j["soh_eol"] = soh_eol;
    j["knee_soh"] = knee_soh;
    j["sigma_gamma"] = sigma_gamma;
    j["temp_mean_c"] = temp_mean_c;
    j["temp_std_c"] = temp_std_c;
    j["rest_temp_c"] = rest_temp_c;
    j["soh_noise_std"] = soh_noise_std;
    j["strategy"] = strategy == Strategy::soc_balance ? "soc_balance" : "soc_soh_aware";
    j["n_records"] = n_records;
    j["dc_fast_fraction"] = dc_fast_fraction;
    j["calendar_scale"] = calendar_scale;
    j["cyclic_scale"] = cyclic_scale;
    j["discharge_avg_crate"] = discharge_avg_crate;
    j["seed"] = seed;
    return j.dump(2);
}

ScenarioConfig ScenarioConfig::from_json_string(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ScenarioConfig sc;
    if (j.contains("name")) sc.name = j.at("name").get<std::string>();
    if (j.contains("chemistry")) {
        const std::string c = j.at("chemistry").get<std::string>();
        if (c == "lfp")
            sc.chemistry = Chemistry::LFP;
        else if (c == "lmo")
            sc.chemistry = Chemistry::LMO;
        else
            throw std::runtime_error("scenario: unknown chemistry '" + c + "'");
    }
    const auto num = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    num("n_cells", sc.n_cells);
    num("q_no_ah", sc.q_no_ah);
    num("r0_ohm", sc.r0_ohm);
    num("soh_eol", sc.soh_eol);
    num("knee_soh", sc.knee_soh);
    num("sigma_gamma", sc.sigma_gamma);
    num("temp_mean_c", sc.temp_mean_c);
    num("temp_std_c", sc.temp_std_c);
    num("rest_temp_c", sc.rest_temp_c);
    num("soh_noise_std", sc.soh_noise_std);
    num("n_records", sc.n_records);
    num("dc_fast_fraction", sc.dc_fast_fraction);
    num("calendar_scale", sc.calendar_scale);
    num("cyclic_scale", sc.cyclic_scale);
    num("discharge_avg_crate", sc.discharge_avg_crate);
    num("seed", sc.seed);
    if (j.contains("strategy")) {
        const std::string s = j.at("strategy").get<std::string>();
        if (s == "soc_balance" || s == "soc")
            sc.strategy = Strategy::soc_balance;
        else if (s == "soc_soh_aware" || s == "soh")
            sc.strategy = Strategy::soc_soh_aware;
        else
            throw std::runtime_error("scenario: unknown strategy '" + s + "'");
    }
    if (sc.n_cells < 1 || sc.q_no_ah <= 0.0 || sc.soh_eol <= 0.0 || sc.soh_eol >= 1.0)
        throw std::runtime_error("scenario: invalid field values");
    return sc;
}

ScenarioConfig ScenarioConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scenario: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_string(buf.str());
}

std::string SimResult::to_json_string() const {
    nlohmann::json j;
    j["lifetime_days"] = lifetime_days;
    j["lifetime_efc"] = lifetime_efc;
    j["sessions_unoptimized"] = sessions_unoptimized;
    j["final_soh_spread"] = final_soh_spread;
    j["soh_time_days"] = soh_time_days;
    j["soh_samples"] = soh_samples;
    return j.dump(2);
}

}  // namespace cellsim
