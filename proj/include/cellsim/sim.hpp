#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cellsim/charge_opt.hpp"
#include "cellsim/core_model.hpp"
#include "cellsim/records.hpp"

namespace cellsim {

enum class Strategy { soc_balance, soc_soh_aware };

/// Thrown when a long-term run exceeds the 30-simulated-year guard.
struct GuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Every knob of one long-term run. Defaults are the baseline scenario; the
/// sensitivity suite perturbs exactly one knob per row.
struct ScenarioConfig {
    std::string name = "default";
    Chemistry chemistry = Chemistry::LFP;
    int n_cells = 20;
    double q_no_ah = 2.3;
    double r0_ohm = 0.01;
    double soh_eol = 0.70;
    double knee_soh = 0.75;
    double sigma_gamma = 0.10;
    double temp_mean_c = 35.0;
    double temp_std_c = 2.0;
    double rest_temp_c = 25.0;
    double soh_noise_std = 0.0;
    Strategy strategy = Strategy::soc_soh_aware;
    int n_records = 255;
    double dc_fast_fraction = 81.0 / 255.0;
    double calendar_scale = 1.0;
    double cyclic_scale = 1.0;
    double discharge_avg_crate = 0.3;
    std::uint64_t seed = 1;

    std::string to_json_string() const;
    static ScenarioConfig from_json_string(const std::string& text);
    static ScenarioConfig from_json_file(const std::string& path);
};

struct SimResult {
    double lifetime_days = 0.0;
    double lifetime_efc = 0.0;
    int sessions_unoptimized = 0;
    double final_soh_spread = 0.0;
    std::vector<double> soh_time_days;              // downsampled sample times
    std::vector<std::vector<double>> soh_samples;   // [sample][cell]

    std::string to_json_string() const;
};

/// Runs the record stream to pack EOL under the scenario's strategy. Optional
/// external records override the synthetic stream (they are looped either
/// way). Throws std::runtime_error if the 30-simulated-year guard trips.
SimResult run_longterm(const ScenarioConfig& scenario,
                       const std::vector<ChargingRecord>* records = nullptr);

/// Per-second demonstration: 10 SOH-ranked LFP cells from 0% SOC, optimizer
/// charge to 70% pack SOC within the window, 6 h rest, full discharge.
struct DriveCycleResult {
    std::vector<std::vector<double>> soc;    // [second][cell]
    std::vector<double> discharged_ah;       // cumulative, aligned with soc
    std::size_t charge_end_index = 0;
    std::size_t rest_end_index = 0;
    double end_of_charge_soc_variance = 0.0;
    double stranded_fraction = 0.0;          // residual charge at depletion / capacity

    /// Writes one row per simulated second; a non-empty preamble is emitted
    /// first as a '#' comment line (used to embed the run configuration).
    void write_csv(const std::string& path, const std::string& preamble = "") const;
};
DriveCycleResult run_drive_cycle(double charge_window_h);

/// One sensitivity row: paired lifetimes and the per-seed relative
/// improvement of the SOC-SOH-aware strategy over SOC balancing, in percent.
struct ImprovementRow {
    std::string name;
    std::vector<double> improvement_pct;  // one entry per seed
    std::vector<double> lifetime_soc_days;
    std::vector<double> lifetime_soh_days;
    double median_improvement_pct = 0.0;
};

/// Paired run for one scenario: same seed, both strategies.
ImprovementRow run_paired(const ScenarioConfig& base,
                          const std::vector<std::uint64_t>& seeds, int threads = 0);

/// The baseline plus the twelve single-knob perturbation rows.
std::vector<ScenarioConfig> default_sensitivity_suite(const ScenarioConfig& base);

/// Runs every row over the seed list; rows and seeds fan out over OpenMP.
std::vector<ImprovementRow> run_sensitivity(const std::vector<ScenarioConfig>& suite,
                                            const std::vector<std::uint64_t>& seeds,
                                            int threads = 0);

double median(std::vector<double> values);

}  // namespace cellsim
