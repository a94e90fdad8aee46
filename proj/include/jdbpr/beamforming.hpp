#pragma once

#include <jdbpr/conic.hpp>
#include <jdbpr/model.hpp>
#include <jdbpr/types.hpp>

#include <vector>

namespace jdbpr {

// One transmit-covariance subproblem instance at fixed splitting ratios and
// phases. h holds the effective channels; W_prev anchors the concave-log
// linearizations and the trust intervals of the exact convex -ln terms.
struct BeamformingInput {
    std::vector<Eigen::VectorXcd> h;
    PowerSplit split;
    DecodingOrder order;
    std::vector<Eigen::MatrixXcd> W_prev;
    UserParams params;
    double secant_omega = 10.0; // trust half-width (multiplicative)
};

struct BeamformingResult {
    SubStatus status = SubStatus::FAILED;
    Beamformers beams;                   // extracted vectors + SDP covariances
    double objective_w = 0.0;            // sum of covariance traces
    std::vector<double> rank_ratios;     // lambda2/lambda1 per user
    conic::SdpSolution raw;              // solver diagnostics
};

// Channel-inversion cascade start when K <= N: w_{seq(i)} solves H w = sqrt(L_i) 1
// so every user receives exactly L_i from beam seq(i), the SIC comparisons
// hold with equality, and a power ladder plus one energy scale-up covers QoS
// and harvesting. Densities falling back (rank-deficient H or K > N) use an
// interference-padded maximum-ratio ladder with a doubling repair loop.
std::vector<Eigen::MatrixXcd> initial_covariances(const std::vector<Eigen::VectorXcd>& h,
                                                  const PowerSplit& split,
                                                  const DecodingOrder& order,
                                                  const UserParams& params);

// Lowered covariance program: minimize sum Tr(W_k) under the linear QoS and
// energy rows and the SIC rows with linearized concave logs (upper bounds,
// exact at W_prev) and secant-majorized convex logs.
conic::HermitianSdpProblem build_p32(const BeamformingInput& in);

// Converges the block to its own fixed point: solve, re-anchor at the
// optimum, repeat until the decrease stalls. Each solve retries with widened
// trust intervals (omega^3, omega^9) before giving up.
BeamformingResult solve_beamforming(const BeamformingInput& in,
                                    const conic::SolverOptions& opt = {});

// Direction-fixed power refit. With unit beam directions, splitting ratios
// and decode order held fixed, every original constraint is linear in the
// per-user transmit powers (the common power cancels from both sides of each
// SIC comparison), so the cheapest rank-one solution along given directions
// comes from one small LP.
struct PowerRefit {
    SubStatus status = SubStatus::FAILED;
    Eigen::VectorXd p;        // per-user transmit powers (watts)
    double objective_w = 0.0; // sum of powers
};

PowerRefit refit_powers(const std::vector<Eigen::VectorXcd>& h,
                        const std::vector<Eigen::VectorXcd>& dirs,
                        const PowerSplit& split,
                        const DecodingOrder& order,
                        const UserParams& params,
                        const conic::SolverOptions& opt = {});

} // namespace jdbpr
