#include "cellsim/core_model.hpp"

#include <algorithm>
#include <cmath>

namespace cellsim {

CellState CellState::fresh(const CellParams& p, double initial_soc) {
    CellState s;
    s.max_capacity_ah = p.nominal_capacity_ah;
    s.soh = 1.0;
    s.remaining_charge_ah = initial_soc * s.max_capacity_ah;
    s.soc = initial_soc;
    return s;
}

void CellState::set_charge(double q_ah) {
    remaining_charge_ah = std::clamp(q_ah, 0.0, max_capacity_ah);
    soc = max_capacity_ah > 0.0 ? remaining_charge_ah / max_capacity_ah : 0.0;
}

void CellState::set_capacity(double q_max_ah, double nominal_capacity_ah) {
    max_capacity_ah = std::max(q_max_ah, 0.0);
    soh = nominal_capacity_ah > 0.0 ? max_capacity_ah / nominal_capacity_ah : 0.0;
    set_charge(remaining_charge_ah);
}

std::vector<std::size_t> PackState::active_cells() const {
    std::vector<std::size_t> idx;
    idx.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (!bypassed(i)) idx.push_back(i);
    return idx;
}

double pack_soh(const PackState& pack) {
    double usable = 0.0, nominal = 0.0;
    for (std::size_t i = 0; i < pack.size(); ++i) {
        nominal += pack.params[i].nominal_capacity_ah;
        if (!pack.bypassed(i)) usable += pack.cells[i].max_capacity_ah;
    }
    return nominal > 0.0 ? usable / nominal : 0.0;
}

double pack_soc(const PackState& pack) {
    double remaining = 0.0, capacity = 0.0;
    for (std::size_t i = 0; i < pack.size(); ++i) {
        if (pack.bypassed(i)) continue;
        remaining += pack.cells[i].remaining_charge_ah;
        capacity += pack.cells[i].max_capacity_ah;
    }
    return capacity > 0.0 ? remaining / capacity : 0.0;
}

double OcvCurve::operator()(double soc) const {
    if (soc < 0.0 || soc > 1.0)
        throw std::domain_error("OcvCurve: soc outside [0, 1]");
    const double s = std::max(soc, kSocFloor);
    if (chemistry == Chemistry::LFP) {
        // exp(-0.008/(1-s)) -> 0 as s -> 1
        const double tail = s < 1.0 ? std::exp(-0.008 / (1.0 - s)) : 0.0;
        return -0.5863 * std::exp(-21.9 * s) + 3.414 + 0.1102 * s - 0.1718 * tail;
    }
    const double logterm = s < 1.0 ? std::pow(-std::log(s), 0.653) : 0.0;
    return 3.875 - 0.335 * logterm - 0.5332 * s + 0.8315 * std::exp(0.6 * (s - 1.0));
}

double max_charge_crate(double soc) {
    return std::max(kCrateIntercept - kCrateSlope * soc, kMinCrate);
}

double inverse_crate_envelope(double crate) {
    return std::clamp((kCrateIntercept - crate) / kCrateSlope, 0.0, 1.0);
}

}  // namespace cellsim
