#include "cellsim/records.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cellsim {

std::vector<ChargingRecord> generate_records(std::uint64_t seed, int n_records,
                                             double dc_fraction) {
    if (n_records < 1) throw std::invalid_argument("generate_records: n_records >= 1");
    std::seed_seq seq{static_cast<std::uint64_t>(3), seed};
    std::mt19937_64 rng(seq);

    const int n_dc = static_cast<int>(std::lround(dc_fraction * n_records));
    std::vector<ChargeMode> modes(static_cast<std::size_t>(n_records), ChargeMode::AC);
    std::fill_n(modes.begin(), n_dc, ChargeMode::DC_fast);
    std::shuffle(modes.begin(), modes.end(), rng);

    std::uniform_real_distribution<double> ac_start(0.1, 0.5), ac_end(0.7, 0.95),
        ac_crate(0.05, 0.3), dc_start(0.1, 0.4), dc_end(0.6, 0.9), dc_crate(0.3, 1.5),
        gap(42.0, 126.0);

    std::vector<ChargingRecord> out;
    out.reserve(static_cast<std::size_t>(n_records));
    for (ChargeMode mode : modes) {
        ChargingRecord r;
        r.mode = mode;
        if (mode == ChargeMode::AC) {
            r.start_soc = ac_start(rng);
            r.end_soc = ac_end(rng);
            r.duration_h = (r.end_soc - r.start_soc) / ac_crate(rng);
        } else {
            r.start_soc = dc_start(rng);
            r.end_soc = dc_end(rng);
            r.duration_h = (r.end_soc - r.start_soc) / dc_crate(rng);
        }
        r.gap_to_next_h = gap(rng);
        out.push_back(r);
    }
    return out;
}

void write_records_csv(const std::string& path,
                       const std::vector<ChargingRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("records: cannot write " + path);
    out << "start_soc,end_soc,duration_h,mode,gap_to_next_h\n";
    out.precision(12);
    for (const auto& r : records)
        out << r.start_soc << ',' << r.end_soc << ',' << r.duration_h << ','
            << (r.mode == ChargeMode::AC ? "AC" : "DC_fast") << ',' << r.gap_to_next_h
            << '\n';
}

std::vector<ChargingRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("records: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("records: empty file " + path);

    std::vector<ChargingRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        ChargingRecord r;
        std::getline(ss, field, ',');
        r.start_soc = std::stod(field);
        std::getline(ss, field, ',');
        r.end_soc = std::stod(field);
        std::getline(ss, field, ',');
        r.duration_h = std::stod(field);
        std::getline(ss, field, ',');
        if (field == "AC")
            r.mode = ChargeMode::AC;
        else if (field == "DC_fast")
            r.mode = ChargeMode::DC_fast;
        else
            throw std::runtime_error("records: unknown mode '" + field + "'");
        std::getline(ss, field, ',');
        r.gap_to_next_h = std::stod(field);
        if (r.end_soc <= r.start_soc || r.duration_h <= 0.0)
            throw std::runtime_error("records: invalid row in " + path);
        out.push_back(r);
    }
    return out;
}

}  // namespace cellsim
