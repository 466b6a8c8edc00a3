#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cellsim {

enum class Chemistry { LFP, LMO };

/// Static per-cell parameters. Charge/capacity are in Ah, temperatures in
/// degrees Celsius, resistance in Ohm. gamma is the cell-specific aging-rate
/// multiplier (dimensionless, > 0).
struct CellParams {
    double nominal_capacity_ah = 2.3;
    double internal_resistance_ohm = 0.01;
    Chemistry chemistry = Chemistry::LFP;
    double gamma = 1.0;
    double temperature_active_c = 35.0;
    double temperature_rest_c = 25.0;
};

/// LMO degradation state: half-cycle bookkeeping for the SEI-weighted model.
/// fc_sum/ft_sum are maintained incrementally; the half-cycle log is kept for
/// diagnostics only and capped at kMaxHalfCycleLog entries.
struct AgingAccumulator {
    double calendar_time_h = 0.0;
    double fc_sum = 0.0;
    double ft_sum = 0.0;
    std::vector<std::pair<double, double>> half_cycles;  // (delta_soc, mean_soc)

    static constexpr std::size_t kMaxHalfCycleLog = 10000;
};

/// Mutable per-cell state. remaining_charge_ah and max_capacity_ah are
/// authoritative; soc and soh are derived views kept consistent on mutation.
struct CellState {
    double remaining_charge_ah = 0.0;
    double max_capacity_ah = 0.0;
    double soh = 1.0;
    double soc = 0.0;
    AgingAccumulator aging;

    static CellState fresh(const CellParams& p, double initial_soc);

    void set_charge(double q_ah);
    /// Updates max capacity (and soh against the given nominal capacity);
    /// clamps remaining charge into the new capacity.
    void set_capacity(double q_max_ah, double nominal_capacity_ah);
};

struct PackState {
    std::vector<CellParams> params;
    std::vector<CellState> cells;
    double soh_eol = 0.70;
    int phase_count = 1;

    std::size_t size() const { return cells.size(); }
    /// A cell at or below the EOL threshold is bypassed: it is excluded from
    /// throughput and from pack voltage/SOC accounting.
    bool bypassed(std::size_t i) const { return cells[i].soh <= soh_eol; }
    std::vector<std::size_t> active_cells() const;
};

/// Usable pack capacity over nominal pack capacity. Bypassed cells are
/// excluded from the numerator but stay in the denominator permanently.
double pack_soh(const PackState& pack);

/// Remaining usable charge over usable capacity, non-bypassed cells only.
/// Returns 0 for a pack with no usable cells.
double pack_soc(const PackState& pack);

/// Closed-form OCV-SOC curves for the two chemistries.
struct OcvCurve {
    Chemistry chemistry = Chemistry::LFP;

    /// Valid for soc in [0, 1]; throws std::domain_error outside. Inputs
    /// below kSocFloor evaluate at the floor (the LMO curve diverges at 0).
    double operator()(double soc) const;

    static constexpr double kSocFloor = 1e-4;
};

/// Maximum admissible charging C-rate as a function of SOC (1/h), clamped
/// below at kMinCrate so CV-stage currents stay positive.
double max_charge_crate(double soc);

/// Inverse of the C-rate envelope, clamped to [0, 1].
double inverse_crate_envelope(double crate);

constexpr double kMinCrate = 0.05;
constexpr double kCrateIntercept = 2.6963;
constexpr double kCrateSlope = 2.5795;

}  // namespace cellsim
