#include <jdbpr/experiments.hpp>

#include <jdbpr/channel.hpp>
#include <jdbpr/units.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace jdbpr {

SystemConfig default_config() { return {}; }

namespace {

std::string trim(std::string s) {
    const auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& val) {
    throw std::runtime_error("config: bad value for '" + key + "': " + val);
}

double parse_double(const std::string& key, const std::string& val) {
    try {
        std::size_t used = 0;
        const double v = std::stod(val, &used);
        if (trim(val.substr(used)).empty())
            return v;
    } catch (const std::exception&) {
    }
    bad_value(key, val);
}

long long parse_int(const std::string& key, const std::string& val) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(val, &used);
        if (trim(val.substr(used)).empty())
            return v;
    } catch (const std::exception&) {
    }
    bad_value(key, val);
}

std::uint64_t parse_u64(const std::string& key, const std::string& val) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(val, &used);
        if (trim(val.substr(used)).empty())
            return v;
    } catch (const std::exception&) {
    }
    bad_value(key, val);
}

Eigen::Vector3d parse_vec3(const std::string& key, const std::string& val) {
    std::istringstream is(val);
    Eigen::Vector3d v;
    std::string extra;
    if (is >> v.x() >> v.y() >> v.z() && !(is >> extra))
        return v;
    bad_value(key, val);
}

void apply_key(SystemConfig& cfg, const std::string& key, const std::string& val) {
    if (key == "num_users")
        cfg.num_users = static_cast<int>(parse_int(key, val));
    else if (key == "num_antennas")
        cfg.num_antennas = static_cast<int>(parse_int(key, val));
    else if (key == "num_elements")
        cfg.num_elements = static_cast<int>(parse_int(key, val));
    else if (key == "bs_position")
        cfg.bs_position = parse_vec3(key, val);
    else if (key == "irs_position")
        cfg.irs_position = parse_vec3(key, val);
    else if (key == "user_radius")
        cfg.user_radius = parse_double(key, val);
    else if (key == "noise_antenna_var")
        cfg.noise_antenna_var = parse_double(key, val);
    else if (key == "noise_antenna_dbm")
        cfg.noise_antenna_var = dbm_to_watts(parse_double(key, val));
    else if (key == "noise_id_var")
        cfg.noise_id_var = parse_double(key, val);
    else if (key == "noise_id_dbm")
        cfg.noise_id_var = dbm_to_watts(parse_double(key, val));
    else if (key == "eh_efficiency")
        cfg.eh_efficiency = parse_double(key, val);
    else if (key == "sinr_threshold")
        cfg.sinr_threshold = parse_double(key, val);
    else if (key == "sinr_threshold_db")
        cfg.sinr_threshold = db_to_linear(parse_double(key, val));
    else if (key == "energy_threshold")
        cfg.energy_threshold = parse_double(key, val);
    else if (key == "energy_threshold_dbm")
        cfg.energy_threshold = dbm_to_watts(parse_double(key, val));
    else if (key == "path_loss_ref")
        cfg.path_loss_ref = parse_double(key, val);
    else if (key == "path_loss_ref_db")
        cfg.path_loss_ref = db_to_linear(parse_double(key, val));
    else if (key == "alpha_direct")
        cfg.alpha_direct = parse_double(key, val);
    else if (key == "alpha_bs_irs")
        cfg.alpha_bs_irs = parse_double(key, val);
    else if (key == "alpha_irs_user")
        cfg.alpha_irs_user = parse_double(key, val);
    else if (key == "rician_kappa")
        cfg.rician_kappa = parse_double(key, val);
    else if (key == "rician_kappa_db")
        cfg.rician_kappa = db_to_linear(parse_double(key, val));
    else if (key == "rician_vartheta")
        cfg.rician_vartheta = parse_double(key, val);
    else if (key == "rician_vartheta_db")
        cfg.rician_vartheta = db_to_linear(parse_double(key, val));
    else if (key == "element_spacing_ratio")
        cfg.element_spacing_ratio = parse_double(key, val);
    else if (key == "randomization_count")
        cfg.randomization_count = static_cast<int>(parse_int(key, val));
    else if (key == "convergence_eps")
        cfg.convergence_eps = parse_double(key, val);
    else if (key == "max_iters")
        cfg.max_iters = static_cast<int>(parse_int(key, val));
    else if (key == "rng_seed")
        cfg.rng_seed = parse_u64(key, val);
    else
        throw std::runtime_error("config: unknown key '" + key + "'");
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string num_field(double v) {
    if (!std::isfinite(v))
        return {};
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

} // namespace

SystemConfig load_config(std::istream& is) {
    SystemConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": empty key or value");
        apply_key(cfg, key, val);
    }
    return cfg;
}

SystemConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("config: cannot open " + path);
    return load_config(is);
}

const char* to_string(SweepParam p) {
    switch (p) {
    case SweepParam::GAMMA_DB: return "gamma_db";
    case SweepParam::E_DBM: return "e_dbm";
    case SweepParam::ELEMENTS: return "M";
    case SweepParam::ANTENNAS: return "N";
    }
    return "?";
}

SweepParam sweep_param_from_string(std::string_view name) {
    if (name == "gamma_db")
        return SweepParam::GAMMA_DB;
    if (name == "e_dbm")
        return SweepParam::E_DBM;
    if (name == "M")
        return SweepParam::ELEMENTS;
    if (name == "N")
        return SweepParam::ANTENNAS;
    throw std::invalid_argument("unknown sweep parameter: " + std::string(name));
}

SystemConfig apply_sweep_value(const SweepSpec& spec, double value) {
    SystemConfig cfg = spec.base;
    cfg.rng_seed = spec.seed;
    const auto as_count = [&](int lo) {
        const auto n = static_cast<int>(std::llround(value));
        if (std::abs(value - n) > 1e-9 || n < lo)
            throw std::invalid_argument("sweep: value " + std::to_string(value) +
                                        " is not a valid count");
        return n;
    };
    switch (spec.param) {
    case SweepParam::GAMMA_DB: cfg.sinr_threshold = db_to_linear(value); break;
    case SweepParam::E_DBM: cfg.energy_threshold = dbm_to_watts(value); break;
    case SweepParam::ELEMENTS: cfg.num_elements = as_count(0); break;
    case SweepParam::ANTENNAS: cfg.num_antennas = as_count(1); break;
    }
    return cfg;
}

SweepResult run_sweep(const SweepSpec& spec, const RowCallback& on_row) {
    if (spec.values.empty())
        throw std::invalid_argument("run_sweep: empty value list");
    if (spec.num_draws < 1)
        throw std::invalid_argument("run_sweep: num_draws must be at least 1");
    if (spec.algorithms.empty())
        throw std::invalid_argument("run_sweep: no algorithms selected");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    SweepResult out;
    out.spec = spec;
    for (const double value : spec.values) {
        const SystemConfig cfg = apply_sweep_value(spec, value);
        for (int draw = 0; draw < spec.num_draws; ++draw) {
            // one realization per (value, draw), shared by every algorithm
            const ChannelSet ch = generate_channels(cfg, static_cast<std::uint64_t>(draw));
            for (const AlgorithmId alg : spec.algorithms) {
                ResultRow row;
                row.value = value;
                row.algorithm = alg;
                row.draw = draw;
                row.objective_w = nan;
                row.objective_dbm = nan;
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    const Solution sol =
                        run_algorithm(alg, cfg, ch, static_cast<std::uint64_t>(draw), spec.opts);
                    row.feasible = sol.feasible;
                    row.iterations = static_cast<int>(sol.trace.size());
                    if (sol.feasible && sol.objective_w > 0.0) {
                        row.objective_w = sol.objective_w;
                        row.objective_dbm = watts_to_dbm(sol.objective_w);
                    }
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
                row.millis = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
                if (on_row)
                    on_row(row);
                out.rows.push_back(std::move(row));
            }
        }
    }

    for (const double value : spec.values) {
        for (const AlgorithmId alg : spec.algorithms) {
            AggregateRow agg;
            agg.value = value;
            agg.algorithm = alg;
            agg.median_w = agg.mean_w = agg.median_dbm = nan;
            std::vector<double> obj;
            for (const auto& row : out.rows) {
                if (row.value != value || row.algorithm != alg)
                    continue;
                ++agg.total_count;
                if (row.feasible && std::isfinite(row.objective_w)) {
                    ++agg.feasible_count;
                    obj.push_back(row.objective_w);
                }
            }
            if (!obj.empty()) {
                agg.median_w = median(obj);
                agg.mean_w = std::accumulate(obj.begin(), obj.end(), 0.0) /
                             static_cast<double>(obj.size());
                agg.median_dbm = watts_to_dbm(agg.median_w);
            }
            out.aggregates.push_back(agg);
        }
    }
    return out;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << "value,algorithm,draw,feasible,objective_w,objective_dbm,iterations,millis,error\r\n";
    for (const auto& r : rows) {
        os << num_field(r.value) << ',' << to_string(r.algorithm) << ',' << r.draw << ','
           << (r.feasible ? 1 : 0) << ',' << num_field(r.objective_w) << ','
           << num_field(r.objective_dbm) << ',' << r.iterations << ',' << num_field(r.millis)
           << ',' << csv_escape(r.error) << "\r\n";
    }
}

void write_summary_json(std::ostream& os, const SweepResult& result) {
    nlohmann::json j;
    j["param"] = to_string(result.spec.param);
    j["values"] = result.spec.values;
    {
        std::vector<std::string> names;
        for (const auto id : result.spec.algorithms)
            names.emplace_back(to_string(id));
        j["algorithms"] = names;
    }
    j["num_draws"] = result.spec.num_draws;
    j["seed"] = result.spec.seed;
    j["row_count"] = result.rows.size();
    j["error_count"] =
        std::count_if(result.rows.begin(), result.rows.end(),
                      [](const ResultRow& r) { return !r.error.empty(); });

    nlohmann::json aggs = nlohmann::json::array();
    for (const auto& a : result.aggregates) {
        nlohmann::json entry;
        entry["value"] = a.value;
        entry["algorithm"] = to_string(a.algorithm);
        entry["feasible_count"] = a.feasible_count;
        entry["total_count"] = a.total_count;
        if (a.feasible_count > 0) {
            entry["median_w"] = a.median_w;
            entry["mean_w"] = a.mean_w;
            entry["median_dbm"] = a.median_dbm;
        }
        aggs.push_back(std::move(entry));
    }
    j["aggregates"] = std::move(aggs);
    os << j.dump(2) << '\n';
}

} // namespace jdbpr
