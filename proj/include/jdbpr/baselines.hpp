#pragma once

#include <jdbpr/jdbpr.hpp>

#include <string_view>

namespace jdbpr {

// The main algorithm plus the five comparison schemes. All runners share the
// subproblem machinery and the substream scheme, so paired runs on the same
// (seed, draw) see identical channels and randomization candidates.
enum class AlgorithmId { JDBPR_OPT, EX_JBPR_OPT, JDBPR_COM, JDBPR_ZF, JDBP_RAN, NO_IRS };

const char* to_string(AlgorithmId id);
AlgorithmId algorithm_from_string(std::string_view name); // case-insensitive, throws

// Exhaustive decode-order search: one alternating run per permutation of the
// decode positions (K <= 6), same initial phases for all of them; returns the
// cheapest feasible run. The permutation the two-stage method would pick runs
// bit-identically inside the search, so this never loses to it.
Solution run_exhaustive_order(const SystemConfig& cfg, const ChannelSet& ch,
                              std::uint64_t draw = 0, const JdbprOptions& opts = {});

// One alternation cycle only (no outer loop).
Solution run_non_alternating(const SystemConfig& cfg, const ChannelSet& ch,
                             std::uint64_t draw = 0, const JdbprOptions& opts = {});

// Zero-forcing directions with closed-form per-user powers (cross terms
// vanish, so the power program decouples); splitting ratios and phases still
// alternate through the regular modules, and the beams are recomputed from
// the updated channels each cycle. Requires K <= N.
Solution run_zf(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw = 0,
                const JdbprOptions& opts = {});

// Phases drawn once uniform on [0, 2*pi)^M and frozen; the decode order is
// read from the gains under those phases; only beams and splitting ratios
// alternate.
Solution run_random_phase(const SystemConfig& cfg, const ChannelSet& ch,
                          std::uint64_t draw = 0, const JdbprOptions& opts = {});

// Surface removed (M = 0 view of the same realization); order from the
// direct-link gains.
Solution run_no_irs(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw = 0,
                    const JdbprOptions& opts = {});

Solution run_algorithm(AlgorithmId id, const SystemConfig& cfg, const ChannelSet& ch,
                       std::uint64_t draw = 0, const JdbprOptions& opts = {});

} // namespace jdbpr
