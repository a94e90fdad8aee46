#pragma once

#include <jdbpr/conic.hpp>
#include <jdbpr/types.hpp>

#include <cstdint>
#include <iosfwd>

namespace jdbpr {

struct JdbprOptions {
    double secant_omega = 10.0;   // trust half-width of the log majorants
    conic::SolverOptions solver;  // inner conic solver settings
};

// Stage-2 policy knobs shared with the comparison schemes: a single
// alternating pass, or frozen phases, reuse everything else unchanged.
struct Stage2Flags {
    int max_cycles = 50;
    bool update_phases = true;
    // Beamforming and power-splitting converge against each other much
    // faster than against the phases, so each cycle lets that pair iterate
    // a few times before the phase update. 1 restores a strict single pass.
    int pair_rounds = 4;
};

// Alternating descent at a fixed decode order from a given phase start:
// covariance program, then splitting ratios, then phases, per cycle. Beams are
// only adopted when the program objective does not increase, so the traced
// objective is non-increasing; the best point passing the exact constraint
// checks is returned. Stops when the fractional objective decrease drops
// below cfg.convergence_eps or after max_cycles. draw selects the
// randomization substreams, keeping candidate phases identical across runs
// that share cfg.rng_seed and draw regardless of the order searched.
Solution run_stage2(const SystemConfig& cfg, const ChannelSet& ch, const DecodingOrder& order,
                    const PhaseShift& theta0, std::uint64_t draw, const JdbprOptions& opts,
                    const Stage2Flags& flags);

// Full two-stage run: relaxed phase program + randomization fixes the decode
// order and the initial phases, then the alternating stage refines beams,
// splitting ratios and phases.
Solution run_jdbpr(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw = 0,
                   const JdbprOptions& opts = {});

// Per-run arithmetic-cost proxy: iterations * (K N^3.5 + (M+1)^3.5), the
// dominant interior-point block costs of the two program families.
double complexity_estimate(const SystemConfig& cfg, int iterations);

// One line per cycle: iteration, objective (W and dBm), sub-statuses, exact
// margin, worst rank ratio, wall time.
void write_trace_csv(std::ostream& os, const IterationTrace& trace);

} // namespace jdbpr
