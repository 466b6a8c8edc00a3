#pragma once

#include <string>

#include "cellsim/core_model.hpp"

namespace cellsim {

/// Short-term LFP degradation coefficients. calendar_scale / cyclic_scale
/// multiply the respective terms for sensitivity scenarios.
struct LfpAgingParams {
    double a = 2.0916e-8;
    double b = -1.2179e-5;
    double c = 0.0018;
    double d = -1.7082e-6;
    double e = 0.0556;
    double f = 5.9808e6;
    double g = 0.6898;
    double h = -6.4647e3;
    double calendar_scale = 1.0;
    double cyclic_scale = 1.0;
};

/// SEI-weighted LMO degradation coefficients.
struct LmoAgingParams {
    double alpha_sei = 5.75e-2;
    double beta_sei = 121.0;
    double k_delta1 = 1.40e5;
    double k_delta2 = -5.01e-1;
    double k_delta3 = -1.23e5;
    double k_sigma = 1.04;
    double sigma_ref = 0.50;
    double k_temp = 6.93e-2;
    double t_ref_k = 298.15;
    double k_t_per_s = 4.14e-10;
    double calendar_scale = 1.0;
    double cyclic_scale = 1.0;
};

/// One charge/discharge/rest segment as seen by the aging models.
/// delta_soc is signed (negative on discharge); duration_h >= 0.
struct AgingEvent {
    double delta_soc = 0.0;
    double mean_soc = 0.0;
    double crate = 0.0;
    double temperature_k = 298.15;
    double duration_h = 0.0;
};

struct AgingModel {
    LfpAgingParams lfp;
    LmoAgingParams lmo;
    double knee_soh = 0.75;

    /// Loads parameter overrides from a JSON document (any subset of keys).
    static AgingModel from_json_file(const std::string& path);
};

/// SOH decrement of one LFP event. The calendar term uses the exact integral
/// form coeff*(sqrt(t+dt)-sqrt(t)), which telescopes over any partition and
/// is finite at t = 0.
double lfp_delta_soh(const AgingEvent& event, const AgingAccumulator& acc,
                     const LfpAgingParams& p);

/// SOH decrement of one LMO event: SEI-weighted prefactor at the accumulated
/// stress, times the new half-cycle kernel plus the calendar increment.
/// Zero-swing events contribute through the calendar term only.
double lmo_delta_soh(const AgingEvent& event, const AgingAccumulator& acc,
                     const LmoAgingParams& p);

/// Internal increments used by apply_event to keep the accumulator in sync.
struct LmoIncrement {
    double delta_soh = 0.0;
    double fc = 0.0;
    double ft = 0.0;
};
LmoIncrement lmo_increment(const AgingEvent& event, const AgingAccumulator& acc,
                           const LmoAgingParams& p);

/// Heterogeneity and knee-point augmentation: gamma * (1 + 50 max(knee - soh, 0)).
double augment(double delta_soh, double gamma, double cell_soh, double knee_soh);

/// Applies one event to a cell: chemistry delta, augmentation, SOH/capacity
/// decrement (floored at 0) and accumulator bookkeeping.
void apply_event(const CellParams& params, CellState& cell, const AgingEvent& event,
                 const AgingModel& model);

inline double celsius_to_kelvin(double c) { return c + 273.15; }

}  // namespace cellsim
