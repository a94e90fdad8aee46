#include <jdbpr/baselines.hpp>
#include <jdbpr/channel.hpp>
#include <jdbpr/experiments.hpp>
#include <jdbpr/model.hpp>
#include <jdbpr/units.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

namespace {

using jdbpr::SystemConfig;
using nlohmann::json;

json config_to_json(const SystemConfig& c) {
    json j;
    j["num_users"] = c.num_users;
    j["num_antennas"] = c.num_antennas;
    j["num_elements"] = c.num_elements;
    j["bs_position"] = {c.bs_position.x(), c.bs_position.y(), c.bs_position.z()};
    j["irs_position"] = {c.irs_position.x(), c.irs_position.y(), c.irs_position.z()};
    j["user_radius"] = c.user_radius;
    j["noise_antenna_var"] = c.noise_antenna_var;
    j["noise_id_var"] = c.noise_id_var;
    j["eh_efficiency"] = c.eh_efficiency;
    j["sinr_threshold"] = c.sinr_threshold;
    j["energy_threshold"] = c.energy_threshold;
    j["path_loss_ref"] = c.path_loss_ref;
    j["alpha_direct"] = c.alpha_direct;
    j["alpha_bs_irs"] = c.alpha_bs_irs;
    j["alpha_irs_user"] = c.alpha_irs_user;
    j["rician_kappa"] = c.rician_kappa;
    j["rician_vartheta"] = c.rician_vartheta;
    j["element_spacing_ratio"] = c.element_spacing_ratio;
    j["randomization_count"] = c.randomization_count;
    j["convergence_eps"] = c.convergence_eps;
    j["max_iters"] = c.max_iters;
    j["rng_seed"] = c.rng_seed;
    return j;
}

Eigen::Vector3d vec3_from_json(const json& a) {
    if (!a.is_array() || a.size() != 3)
        throw std::runtime_error("solution file: position must be [x, y, z]");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

SystemConfig config_from_json(const json& j) {
    SystemConfig c;
    for (const auto& [key, val] : j.items()) {
        if (key == "num_users")
            c.num_users = val.get<int>();
        else if (key == "num_antennas")
            c.num_antennas = val.get<int>();
        else if (key == "num_elements")
            c.num_elements = val.get<int>();
        else if (key == "bs_position")
            c.bs_position = vec3_from_json(val);
        else if (key == "irs_position")
            c.irs_position = vec3_from_json(val);
        else if (key == "user_radius")
            c.user_radius = val.get<double>();
        else if (key == "noise_antenna_var")
            c.noise_antenna_var = val.get<double>();
        else if (key == "noise_id_var")
            c.noise_id_var = val.get<double>();
        else if (key == "eh_efficiency")
            c.eh_efficiency = val.get<double>();
        else if (key == "sinr_threshold")
            c.sinr_threshold = val.get<double>();
        else if (key == "energy_threshold")
            c.energy_threshold = val.get<double>();
        else if (key == "path_loss_ref")
            c.path_loss_ref = val.get<double>();
        else if (key == "alpha_direct")
            c.alpha_direct = val.get<double>();
        else if (key == "alpha_bs_irs")
            c.alpha_bs_irs = val.get<double>();
        else if (key == "alpha_irs_user")
            c.alpha_irs_user = val.get<double>();
        else if (key == "rician_kappa")
            c.rician_kappa = val.get<double>();
        else if (key == "rician_vartheta")
            c.rician_vartheta = val.get<double>();
        else if (key == "element_spacing_ratio")
            c.element_spacing_ratio = val.get<double>();
        else if (key == "randomization_count")
            c.randomization_count = val.get<int>();
        else if (key == "convergence_eps")
            c.convergence_eps = val.get<double>();
        else if (key == "max_iters")
            c.max_iters = val.get<int>();
        else if (key == "rng_seed")
            c.rng_seed = val.get<std::uint64_t>();
        else
            throw std::runtime_error("solution file: unknown config key '" + key + "'");
    }
    return c;
}

json solution_to_json(jdbpr::AlgorithmId alg, std::uint64_t draw, const SystemConfig& cfg,
                      const jdbpr::Solution& sol) {
    json j;
    j["algorithm"] = jdbpr::to_string(alg);
    j["draw"] = draw;
    j["config"] = config_to_json(cfg);
    j["status"] = jdbpr::to_string(sol.status);
    j["feasible"] = sol.feasible;
    j["iterations"] = sol.trace.size();
    if (sol.feasible) {
        j["objective_w"] = sol.objective_w;
        j["objective_dbm"] = jdbpr::watts_to_dbm(sol.objective_w);
        j["min_margin"] = sol.report.min_margin;
    }
    j["order"] = sol.order.s;
    j["rho"] = std::vector<double>(sol.split.rho.begin(), sol.split.rho.end());
    j["theta"] = std::vector<double>(sol.phase.theta.begin(), sol.phase.theta.end());
    json beams = json::array();
    for (const auto& w : sol.beams.w) {
        json col = json::array();
        for (Eigen::Index n = 0; n < w.size(); ++n)
            col.push_back({w[n].real(), w[n].imag()});
        beams.push_back(std::move(col));
    }
    j["beams"] = std::move(beams);
    return j;
}

int cmd_run(const SystemConfig& cfg, const std::vector<std::string>& alg_names,
            std::uint64_t draw, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto ch = jdbpr::generate_channels(cfg, draw);
    int failures = 0;
    for (const auto& name : alg_names) {
        const auto alg = jdbpr::algorithm_from_string(name);
        jdbpr::Solution sol;
        try {
            sol = jdbpr::run_algorithm(alg, cfg, ch, draw);
        } catch (const std::exception& e) {
            std::cout << jdbpr::to_string(alg) << ": error: " << e.what() << '\n';
            ++failures;
            continue;
        }
        std::cout << jdbpr::to_string(alg) << ": " << jdbpr::to_string(sol.status)
                  << " feasible=" << (sol.feasible ? "yes" : "no");
        if (sol.feasible)
            std::cout << " objective=" << std::setprecision(6) << sol.objective_w << " W ("
                      << jdbpr::watts_to_dbm(sol.objective_w) << " dBm)"
                      << " min_margin=" << sol.report.min_margin << " (" << sol.report.worst
                      << ")";
        std::cout << " iterations=" << sol.trace.size() << '\n';
        if (!sol.feasible)
            ++failures;

        const auto trace_path =
            std::filesystem::path(out_dir) / ("trace_" + std::string(jdbpr::to_string(alg)) + ".csv");
        std::ofstream ts(trace_path);
        jdbpr::write_trace_csv(ts, sol.trace);
        const auto sol_path = std::filesystem::path(out_dir) /
                              ("solution_" + std::string(jdbpr::to_string(alg)) + ".json");
        std::ofstream ss(sol_path);
        ss << solution_to_json(alg, draw, cfg, sol).dump(2) << '\n';
        std::cout << "  trace -> " << trace_path.string() << "\n  solution -> "
                  << sol_path.string() << '\n';
    }
    return failures == 0 ? 0 : 1;
}

int cmd_sweep(const jdbpr::SweepSpec& spec, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto csv_path = std::filesystem::path(out_dir) / "results.csv";
    std::cout << "sweep " << jdbpr::to_string(spec.param) << " over " << spec.values.size()
              << " values, " << spec.num_draws << " draws, " << spec.algorithms.size()
              << " algorithms\n";
    const auto result = jdbpr::run_sweep(spec, [](const jdbpr::ResultRow& row) {
        std::cout << "  " << jdbpr::to_string(row.algorithm) << " value=" << row.value
                  << " draw=" << row.draw;
        if (!row.error.empty())
            std::cout << " error: " << row.error;
        else if (!row.feasible)
            std::cout << " infeasible";
        else
            std::cout << " objective=" << std::setprecision(6) << row.objective_dbm << " dBm in "
                      << row.iterations << " iters";
        std::cout << " (" << std::setprecision(4) << row.millis / 1000.0 << " s)\n";
    });
    {
        std::ofstream os(csv_path);
        jdbpr::write_results_csv(os, result.rows);
    }
    const auto json_path = std::filesystem::path(out_dir) / "summary.json";
    {
        std::ofstream os(json_path);
        jdbpr::write_summary_json(os, result);
    }
    std::cout << "rows -> " << csv_path.string() << "\nsummary -> " << json_path.string() << '\n';
    return 0;
}

int cmd_check(const std::string& path, double tol) {
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot open " + path);
    json j;
    is >> j;

    const SystemConfig cfg = config_from_json(j.at("config"));
    const auto draw = j.at("draw").get<std::uint64_t>();
    jdbpr::Solution sol;
    sol.order.s = j.at("order").get<std::vector<int>>();
    {
        const auto rho = j.at("rho").get<std::vector<double>>();
        sol.split.rho = Eigen::Map<const Eigen::VectorXd>(rho.data(),
                                                          static_cast<Eigen::Index>(rho.size()));
        const auto theta = j.at("theta").get<std::vector<double>>();
        sol.phase.theta = Eigen::Map<const Eigen::VectorXd>(
            theta.data(), static_cast<Eigen::Index>(theta.size()));
    }
    for (const auto& col : j.at("beams")) {
        Eigen::VectorXcd w(col.size());
        for (std::size_t n = 0; n < col.size(); ++n)
            w[static_cast<Eigen::Index>(n)] = {col[n][0].get<double>(), col[n][1].get<double>()};
        sol.beams.w.push_back(std::move(w));
    }

    auto ch = jdbpr::generate_channels(cfg, draw);
    if (cfg.num_elements == 0 || sol.phase.theta.size() == 0) {
        ch = jdbpr::without_irs(ch);
        sol.phase.theta.resize(0);
    }
    const auto rep = jdbpr::check_feasibility(cfg, ch, sol, tol);

    std::cout << "constraint margins (tol " << tol << "):\n";
    for (const auto& c : rep.checks)
        std::cout << "  " << std::left << std::setw(18) << c.name << std::right
                  << std::setprecision(4) << std::scientific << c.margin
                  << (c.pass ? "  pass" : "  FAIL") << std::defaultfloat << '\n';
    const double power = jdbpr::total_power(sol.beams.w);
    std::cout << "transmit power: " << std::setprecision(6) << power << " W";
    if (j.contains("objective_w"))
        std::cout << " (stored " << j["objective_w"].get<double>() << " W)";
    std::cout << "\nverdict: " << (rep.feasible ? "feasible" : "infeasible") << " (worst "
              << rep.worst << ", margin " << std::setprecision(4) << rep.min_margin << ")\n";
    return rep.feasible ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transmit-power minimization for an IRS-assisted SWIPT-NOMA downlink"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> algorithms = {"JDBPR_OPT"};
    std::uint64_t seed = 0;
    int draws = 20;
    int max_iters = 0;

    auto* run = app.add_subcommand("run", "solve one scenario; write trace and solution files");
    auto* run_cfg = run->add_option("--config", config_path, "config file (key = value lines)");
    auto* run_seed = run->add_option("--seed", seed, "root seed");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--algorithms", algorithms, "comma-separated algorithm list")
        ->delimiter(',');
    std::uint64_t draw = 0;
    run->add_option("--draw", draw, "topology/channel draw index");
    auto* run_iters = run->add_option("--max-iters", max_iters, "outer iteration cap");

    auto* sweep = app.add_subcommand("sweep", "parameter sweep; write results.csv + summary.json");
    std::string param_name = "gamma_db";
    std::vector<double> values;
    auto* sweep_cfg = sweep->add_option("--config", config_path, "base config file");
    sweep->add_option("--param", param_name, "swept parameter: gamma_db | e_dbm | M | N");
    sweep->add_option("--values", values, "comma-separated value list")
        ->required()
        ->delimiter(',');
    sweep->add_option("--algorithms", algorithms, "comma-separated algorithm list")
        ->delimiter(',');
    sweep->add_option("--draws", draws, "Monte-Carlo draws per value");
    auto* sweep_seed = sweep->add_option("--seed", seed, "root seed");
    sweep->add_option("--out", out_dir, "output directory");
    auto* sweep_iters = sweep->add_option("--max-iters", max_iters, "outer iteration cap");

    auto* check = app.add_subcommand("check", "re-validate a stored solution file");
    std::string solution_path;
    double tol = 1e-6;
    check->add_option("file", solution_path, "solution JSON written by `run`")->required();
    check->add_option("--tol", tol, "margin tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            SystemConfig cfg =
                run_cfg->count() ? jdbpr::load_config_file(config_path) : jdbpr::default_config();
            if (run_seed->count())
                cfg.rng_seed = seed;
            if (run_iters->count())
                cfg.max_iters = max_iters;
            return cmd_run(cfg, algorithms, draw, out_dir);
        }
        if (sweep->parsed()) {
            jdbpr::SweepSpec spec;
            spec.base = sweep_cfg->count() ? jdbpr::load_config_file(config_path)
                                           : jdbpr::default_config();
            if (sweep_iters->count())
                spec.base.max_iters = max_iters;
            spec.param = jdbpr::sweep_param_from_string(param_name);
            spec.values = values;
            spec.num_draws = draws;
            spec.seed = sweep_seed->count() ? seed : spec.base.rng_seed;
            for (const auto& name : algorithms)
                spec.algorithms.push_back(jdbpr::algorithm_from_string(name));
            return cmd_sweep(spec, out_dir);
        }
        return cmd_check(solution_path, tol);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
