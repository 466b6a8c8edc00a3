#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cellsim/sim.hpp"

namespace fs = std::filesystem;
using namespace cellsim;

namespace {

// "1,5,9" -> {1,5,9}; a single value N expands to 1..N for convenience.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
    if (seeds.empty()) throw std::runtime_error("empty seed list '" + text + "'");
    if (seeds.size() == 1 && text.find(',') == std::string::npos && seeds[0] > 1) {
        const std::uint64_t n = seeds[0];
        seeds.clear();
        for (std::uint64_t s = 1; s <= n; ++s) seeds.push_back(s);
    }
    return seeds;
}

std::vector<std::uint64_t> resolve_seeds(const std::string& flag_value) {
    if (const char* env = std::getenv("CELLPACK_SIM_SEED")) return parse_seeds(env);
    return parse_seeds(flag_value);
}

ScenarioConfig load_scenario(const std::string& path) {
    return path.empty() ? ScenarioConfig{} : ScenarioConfig::from_json_file(path);
}

void apply_overrides(ScenarioConfig& sc, const std::string& chemistry) {
    if (chemistry.empty()) return;
    if (chemistry == "lfp")
        sc.chemistry = Chemistry::LFP;
    else if (chemistry == "lmo")
        sc.chemistry = Chemistry::LMO;
    else
        throw std::runtime_error("unknown chemistry '" + chemistry + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text << '\n';
}

std::string compact_config(const ScenarioConfig& sc) {
    return nlohmann::json::parse(sc.to_json_string()).dump();
}

int cmd_drive_cycle(const std::string& out_dir, double window_h) {
    const DriveCycleResult res = run_drive_cycle(window_h);
    fs::create_directories(out_dir);
    ScenarioConfig sc;  // resolved defaults, embedded for provenance
    sc.name = "drive-cycle";
    std::ostringstream stem;
    stem << "drive_cycle_window" << window_h << "h";
    res.write_csv((fs::path(out_dir) / (stem.str() + ".csv")).string(),
                  "config " + compact_config(sc));

    nlohmann::json j;
    j["config"] = nlohmann::json::parse(sc.to_json_string());
    j["charge_window_h"] = window_h;
    j["charge_end_s"] = res.charge_end_index;
    j["rest_end_s"] = res.rest_end_index;
    j["end_of_charge_soc_variance"] = res.end_of_charge_soc_variance;
    j["stranded_fraction"] = res.stranded_fraction;
    write_text(fs::path(out_dir) / (stem.str() + ".json"), j.dump(2));
    std::cout << "drive-cycle: wrote " << stem.str() << ".{csv,json} to " << out_dir
              << "\n";
    return 0;
}

int cmd_longterm(const std::string& scenario_path, const std::string& out_dir,
                 const std::string& seeds_flag, const std::string& chemistry,
                 const std::string& strategy, int parallel) {
    ScenarioConfig base = load_scenario(scenario_path);
    apply_overrides(base, chemistry);
    const std::vector<std::uint64_t> seeds = resolve_seeds(seeds_flag);
    fs::create_directories(out_dir);

    const auto run_one = [&](Strategy st, const char* tag) {
        for (std::uint64_t seed : seeds) {
            ScenarioConfig sc = base;
            sc.seed = seed;
            sc.strategy = st;
            const SimResult res = run_longterm(sc);
            nlohmann::json j;
            j["config"] = nlohmann::json::parse(sc.to_json_string());
            j["result"] = nlohmann::json::parse(res.to_json_string());
            std::ostringstream name;
            name << "longterm_" << tag << "_seed" << seed << ".json";
            write_text(fs::path(out_dir) / name.str(), j.dump(2));
        }
    };

    if (strategy == "soc") {
        run_one(Strategy::soc_balance, "soc");
    } else if (strategy == "soh") {
        run_one(Strategy::soc_soh_aware, "soh");
    } else if (strategy == "both") {
        const ImprovementRow row = run_paired(base, seeds, parallel);
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            for (int k = 0; k < 2; ++k) {
                ScenarioConfig sc = base;
                sc.seed = seeds[s];
                sc.strategy = k == 0 ? Strategy::soc_balance : Strategy::soc_soh_aware;
                nlohmann::json j;
                j["config"] = nlohmann::json::parse(sc.to_json_string());
                j["lifetime_days"] =
                    k == 0 ? row.lifetime_soc_days[s] : row.lifetime_soh_days[s];
                std::ostringstream name;
                name << "longterm_" << (k == 0 ? "soc" : "soh") << "_seed" << seeds[s]
                     << ".json";
                write_text(fs::path(out_dir) / name.str(), j.dump(2));
            }
        }
        nlohmann::json j;
        j["config"] = nlohmann::json::parse(base.to_json_string());
        j["seeds"] = seeds;
        j["improvement_pct"] = row.improvement_pct;
        j["median_improvement_pct"] = row.median_improvement_pct;
        write_text(fs::path(out_dir) / "improvement_summary.json", j.dump(2));
    } else {
        throw std::runtime_error("unknown strategy '" + strategy + "'");
    }
    std::cout << "longterm: wrote results to " << out_dir << "\n";
    return 0;
}

int cmd_sensitivity(const std::string& scenario_path, const std::string& out_dir,
                    const std::string& seeds_flag, const std::string& chemistry,
                    int parallel) {
    ScenarioConfig base = load_scenario(scenario_path);
    apply_overrides(base, chemistry);
    const std::vector<std::uint64_t> seeds = resolve_seeds(seeds_flag);
    const std::vector<ScenarioConfig> suite = default_sensitivity_suite(base);
    const std::vector<ImprovementRow> rows = run_sensitivity(suite, seeds, parallel);

    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "sensitivity.csv");
    if (!csv) throw std::runtime_error("cannot write sensitivity.csv");
    csv << "# config " << compact_config(base) << '\n';
    csv << "scenario,median_improvement_pct";
    for (std::uint64_t s : seeds) csv << ",improvement_pct_seed" << s;
    csv << '\n';
    csv.precision(10);
    for (const auto& row : rows) {
        csv << row.name << ',' << row.median_improvement_pct;
        for (double v : row.improvement_pct) csv << ',' << v;
        csv << '\n';
    }

    nlohmann::json j;
    j["config"] = nlohmann::json::parse(base.to_json_string());
    j["seeds"] = seeds;
    for (const auto& row : rows) {
        nlohmann::json r;
        r["median_improvement_pct"] = row.median_improvement_pct;
        r["improvement_pct"] = row.improvement_pct;
        r["lifetime_soc_days"] = row.lifetime_soc_days;
        r["lifetime_soh_days"] = row.lifetime_soh_days;
        j["rows"][row.name] = r;
    }
    write_text(fs::path(out_dir) / "sensitivity.json", j.dump(2));
    std::cout << "sensitivity: wrote sensitivity.{csv,json} to " << out_dir << "\n";
    return 0;
}

int cmd_optimize_once(const std::string& scenario_path) {
    std::ifstream in(scenario_path);
    if (!in) throw std::runtime_error("cannot open " + scenario_path);
    nlohmann::json j;
    in >> j;

    CellParams base;
    if (j.contains("q_no_ah")) base.nominal_capacity_ah = j.at("q_no_ah").get<double>();
    if (j.contains("r0_ohm")) base.internal_resistance_ohm = j.at("r0_ohm").get<double>();
    if (j.contains("chemistry"))
        base.chemistry = j.at("chemistry").get<std::string>() == "lmo" ? Chemistry::LMO
                                                                       : Chemistry::LFP;
    PackState pack;
    if (j.contains("soh_eol")) pack.soh_eol = j.at("soh_eol").get<double>();
    for (const auto& cj : j.at("cells")) {
        CellParams p = base;
        pack.params.push_back(p);
        CellState c = CellState::fresh(p, cj.value("soc", 0.0));
        c.set_capacity(cj.at("soh").get<double>() * p.nominal_capacity_ah,
                       p.nominal_capacity_ah);
        c.set_charge(cj.value("soc", 0.0) * c.max_capacity_ah);
        pack.cells.push_back(c);
    }

    ChargeSession session;
    for (const auto& c : pack.cells)
        session.q_initial_ah.push_back(c.remaining_charge_ah);
    if (j.contains("q_final_sum_ah")) {
        session.q_final_sum_ah = j.at("q_final_sum_ah").get<double>();
    } else {
        double cap = 0.0;
        for (std::size_t i : pack.active_cells()) cap += pack.cells[i].max_capacity_ah;
        session.q_final_sum_ah = j.at("target_pack_soc").get<double>() * cap;
    }
    session.t_total_h = j.at("t_total_h").get<double>();

    OptimizerConfig cfg;
    cfg.fast_charge = j.value("fast_charge", false);

    const ChargePlan plan = optimize_charge_plan(pack, session, cfg);
    if (!plan.feasible) {
        std::cerr << "optimize-once: no feasible charge plan\n";
        return 2;
    }
    std::cout << plan.to_json_string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cell-level battery pack charging simulator"};
    app.require_subcommand(1);
    app.fallthrough(true);  // allow global flags after the subcommand name

    std::string scenario_path, out_dir = "out", seeds_flag = "1";
    std::string chemistry, strategy = "both";
    double window_h = 1.5;
    int parallel = 0;

    app.add_option("--scenario", scenario_path, "Scenario / pack-state JSON path");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seeds", seeds_flag,
                   "Comma-separated seed list; a single value N expands to 1..N");
    app.add_option("--window", window_h, "Drive-cycle charging window in hours");
    app.add_option("--chemistry", chemistry, "lfp or lmo");
    app.add_option("--strategy", strategy, "soc, soh or both");
    app.add_option("--parallel", parallel, "Worker threads (0 = all cores)");

    auto* drive = app.add_subcommand("drive-cycle", "Charge/rest/discharge demo");
    auto* longterm = app.add_subcommand("longterm", "Long-term aging campaign");
    auto* sens = app.add_subcommand("sensitivity", "Scenario sweep improvement matrix");
    auto* once = app.add_subcommand("optimize-once", "Print one charge plan as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (drive->parsed()) return cmd_drive_cycle(out_dir, window_h);
        if (longterm->parsed())
            return cmd_longterm(scenario_path, out_dir, seeds_flag, chemistry, strategy,
                                parallel);
        if (sens->parsed())
            return cmd_sensitivity(scenario_path, out_dir, seeds_flag, chemistry,
                                   parallel);
        if (once->parsed()) return cmd_optimize_once(scenario_path);
    } catch (const GuardError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
