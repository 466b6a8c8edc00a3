#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cellsim {

enum class ChargeMode { AC, DC_fast };

/// One charging session of the synthetic usage profile, plus the rest/driving
/// interval until the next session begins.
struct ChargingRecord {
    double start_soc = 0.0;
    double end_soc = 0.0;
    double duration_h = 0.0;
    ChargeMode mode = ChargeMode::AC;
    double gap_to_next_h = 0.0;

    /// Average pack C-rate implied by the session bounds.
    double implied_crate() const { return (end_soc - start_soc) / duration_h; }
};

/// Deterministic synthetic record stream. DC-fast sessions get the faster
/// SOC windows and C-rates; the count of DC sessions is round(dc_fraction * n).
std::vector<ChargingRecord> generate_records(std::uint64_t seed, int n_records = 255,
                                             double dc_fraction = 81.0 / 255.0);

/// CSV I/O with header start_soc,end_soc,duration_h,mode,gap_to_next_h.
void write_records_csv(const std::string& path, const std::vector<ChargingRecord>& records);
std::vector<ChargingRecord> read_records_csv(const std::string& path);

}  // namespace cellsim
