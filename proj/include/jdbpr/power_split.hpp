#pragma once

#include <jdbpr/conic.hpp>
#include <jdbpr/model.hpp>
#include <jdbpr/types.hpp>

#include <vector>

namespace jdbpr {

// Splitting-ratio subproblem at fixed beams and phases. Everything the rows
// need is captured by the received-power table bp(k, j) = |h_k^H w_j|^2; the
// scale table carries ||h_k||^2 ||w_j||^2 so vacuous decode pairs can be
// skipped consistently with the exact checker. prev anchors the linearized
// 1/rho term and is returned unchanged when the program fails.
struct PowerSplitInput {
    Eigen::MatrixXd bp;
    Eigen::MatrixXd bp_scale;
    PowerSplit prev;
    DecodingOrder order;
    UserParams params;
};

PowerSplitInput make_power_split_input(const std::vector<Eigen::VectorXcd>& h,
                                       const std::vector<Eigen::VectorXcd>& w,
                                       const PowerSplit& prev, const DecodingOrder& order,
                                       const UserParams& params);

// Covariance form of the same table: bp(k, j) = Tr(h_k h_k^H W_j). Exact for
// rank-one W_j and the right coupling mid-descent, when the covariance
// iterate is not yet rank-one and extracted beams would misstate the powers.
PowerSplitInput make_power_split_input(const std::vector<Eigen::VectorXcd>& h,
                                       const std::vector<Eigen::MatrixXcd>& W,
                                       const PowerSplit& prev, const DecodingOrder& order,
                                       const UserParams& params);

struct PowerSplitResult {
    SubStatus status = SubStatus::FAILED;
    PowerSplit split;  // updated on OK, copy of prev otherwise
    double slack = 0.0; // common normalized margin achieved
    conic::SdpSolution raw;
};

// Margin-maximization program over (rho, tau = 1/rho, s): every QoS, decode,
// energy and interior row is normalized by its own scale and padded with the
// shared slack s, which is maximized. tau couples to rho through hyperbolic
// constraints; rows are arranged so feasibility of (rho, tau, s) implies the
// original constraints at rho (the relaxation is tight at the optimum).
// Scalar variable ids: rho_k -> k, tau_k -> K + k, s -> 2K.
conic::HermitianSdpProblem build_p41(const PowerSplitInput& in);

PowerSplitResult solve_power_split(const PowerSplitInput& in,
                                   const conic::SolverOptions& opt = {});

} // namespace jdbpr
