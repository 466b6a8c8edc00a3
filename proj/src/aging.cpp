#include "cellsim/aging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cellsim {

AgingModel AgingModel::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("aging params: cannot open " + path);
    nlohmann::json j;
    in >> j;

    AgingModel m;
    auto get = [](const nlohmann::json& obj, const char* key, double& field) {
        if (obj.contains(key)) field = obj.at(key).get<double>();
    };
    if (j.contains("knee_soh")) m.knee_soh = j.at("knee_soh").get<double>();
    if (j.contains("lfp")) {
        const auto& o = j.at("lfp");
        get(o, "a", m.lfp.a); get(o, "b", m.lfp.b); get(o, "c", m.lfp.c);
        get(o, "d", m.lfp.d); get(o, "e", m.lfp.e); get(o, "f", m.lfp.f);
        get(o, "g", m.lfp.g); get(o, "h", m.lfp.h);
        get(o, "calendar_scale", m.lfp.calendar_scale);
        get(o, "cyclic_scale", m.lfp.cyclic_scale);
    }
    if (j.contains("lmo")) {
        const auto& o = j.at("lmo");
        get(o, "alpha_sei", m.lmo.alpha_sei); get(o, "beta_sei", m.lmo.beta_sei);
        get(o, "k_delta1", m.lmo.k_delta1); get(o, "k_delta2", m.lmo.k_delta2);
        get(o, "k_delta3", m.lmo.k_delta3); get(o, "k_sigma", m.lmo.k_sigma);
        get(o, "sigma_ref", m.lmo.sigma_ref); get(o, "k_temp", m.lmo.k_temp);
        get(o, "t_ref_k", m.lmo.t_ref_k); get(o, "k_t_per_s", m.lmo.k_t_per_s);
        get(o, "calendar_scale", m.lmo.calendar_scale);
        get(o, "cyclic_scale", m.lmo.cyclic_scale);
    }
    return m;
}

double lfp_delta_soh(const AgingEvent& event, const AgingAccumulator& acc,
                     const LfpAgingParams& p) {
    const double T = event.temperature_k;
    const double cyc = (p.a * T * T + p.b * T + p.c) *
                       std::exp((p.d * T + p.e) * event.crate) *
                       std::abs(event.delta_soc) / 4.6;
    const double t0 = acc.calendar_time_h;
    const double cal = p.f / 2.3 * std::exp(p.g * event.mean_soc + p.h / T) *
                       (std::sqrt(t0 + event.duration_h) - std::sqrt(t0));
    return std::max(p.cyclic_scale * cyc + p.calendar_scale * cal, 0.0);
}

LmoIncrement lmo_increment(const AgingEvent& event, const AgingAccumulator& acc,
                           const LmoAgingParams& p) {
    const double T = event.temperature_k;
    const double stress = std::exp(p.k_sigma * (event.mean_soc - p.sigma_ref) +
                                   p.k_temp * p.t_ref_k * (T - p.t_ref_k) / T);

    LmoIncrement inc;
    const double dsoc = std::abs(event.delta_soc);
    if (dsoc > 0.0) {
        const double denom = p.k_delta1 * std::pow(dsoc, p.k_delta2) + p.k_delta3;
        if (denom <= 0.0)
            throw std::domain_error("lmo aging: half-cycle kernel outside validity region");
        inc.fc = p.cyclic_scale * 0.5 / denom * stress;
    }
    // f_t * dt / t collapses to k_t * dt * stress, finite at t = 0
    inc.ft = p.calendar_scale * p.k_t_per_s * (event.duration_h * 3600.0) * stress;

    const double accumulated = acc.ft_sum + acc.fc_sum;
    const double prefactor =
        p.alpha_sei * p.beta_sei * std::exp(-p.beta_sei * accumulated) +
        (1.0 - p.alpha_sei) * std::exp(-accumulated);
    inc.delta_soh = std::max(prefactor * (inc.fc + inc.ft), 0.0);
    return inc;
}

double lmo_delta_soh(const AgingEvent& event, const AgingAccumulator& acc,
                     const LmoAgingParams& p) {
    return lmo_increment(event, acc, p).delta_soh;
}

double augment(double delta_soh, double gamma, double cell_soh, double knee_soh) {
    return gamma * (1.0 + 50.0 * std::max(knee_soh - cell_soh, 0.0)) * delta_soh;
}

void apply_event(const CellParams& params, CellState& cell, const AgingEvent& event,
                 const AgingModel& model) {
    double delta;
    if (params.chemistry == Chemistry::LFP) {
        delta = lfp_delta_soh(event, cell.aging, model.lfp);
    } else {
        const LmoIncrement inc = lmo_increment(event, cell.aging, model.lmo);
        delta = inc.delta_soh;
        cell.aging.fc_sum += inc.fc;
        cell.aging.ft_sum += inc.ft;
        if (std::abs(event.delta_soc) > 0.0 &&
            cell.aging.half_cycles.size() < AgingAccumulator::kMaxHalfCycleLog)
            cell.aging.half_cycles.emplace_back(event.delta_soc, event.mean_soc);
    }
    cell.aging.calendar_time_h += event.duration_h;

    const double augmented = augment(delta, params.gamma, cell.soh, model.knee_soh);
    const double new_soh = std::max(cell.soh - augmented, 0.0);
    cell.set_capacity(new_soh * params.nominal_capacity_ah, params.nominal_capacity_ah);
}

}  // namespace cellsim
