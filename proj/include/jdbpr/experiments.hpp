#pragma once

#include <jdbpr/baselines.hpp>

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace jdbpr {

// Reference scenario: the defaults in SystemConfig itself.
SystemConfig default_config();

// Flat `key = value` text, one pair per line, '#' starts a comment. Keys are
// the SystemConfig field names; *_db / *_dbm alternates are accepted for the
// quantities usually quoted that way; positions are "x y z". Unknown keys are
// errors, not warnings.
SystemConfig load_config(std::istream& is);
SystemConfig load_config_file(const std::string& path);

enum class SweepParam { GAMMA_DB, E_DBM, ELEMENTS, ANTENNAS };
const char* to_string(SweepParam p);
SweepParam sweep_param_from_string(std::string_view name); // gamma_db | e_dbm | M | N

struct SweepSpec {
    SweepParam param = SweepParam::GAMMA_DB;
    std::vector<double> values;
    std::vector<AlgorithmId> algorithms;
    int num_draws = 20;
    SystemConfig base;
    std::uint64_t seed = 1; // overrides base.rng_seed
    JdbprOptions opts;
};

// One run of one algorithm on one (value, draw) cell. error is nonempty when
// the run threw; such rows never abort the sweep.
struct ResultRow {
    double value = 0.0;
    AlgorithmId algorithm = AlgorithmId::JDBPR_OPT;
    int draw = 0;
    bool feasible = false;
    double objective_w = 0.0;
    double objective_dbm = 0.0;
    int iterations = 0;
    double millis = 0.0;
    std::string error;
};

// Per (value, algorithm): statistics over the rows flagged feasible.
struct AggregateRow {
    double value = 0.0;
    AlgorithmId algorithm = AlgorithmId::JDBPR_OPT;
    int feasible_count = 0;
    int total_count = 0;
    double median_w = 0.0;
    double mean_w = 0.0;
    double median_dbm = 0.0;
};

struct SweepResult {
    SweepSpec spec;
    std::vector<ResultRow> rows;
    std::vector<AggregateRow> aggregates;
};

// The base config with one swept field replaced (exposed for tests).
SystemConfig apply_sweep_value(const SweepSpec& spec, double value);

// Runs every (value, draw, algorithm) cell. The channel realization is drawn
// once per (value, draw) and shared across algorithms, and draws are keyed so
// growing M or N extends the same realization: comparisons are paired along
// both axes. on_row (optional) observes rows as they finish.
using RowCallback = std::function<void(const ResultRow&)>;
SweepResult run_sweep(const SweepSpec& spec, const RowCallback& on_row = {});

// RFC-4180 CSV with a header row; non-finite numbers become empty fields.
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);

// Aggregates plus the spec echo as JSON.
void write_summary_json(std::ostream& os, const SweepResult& result);

} // namespace jdbpr
