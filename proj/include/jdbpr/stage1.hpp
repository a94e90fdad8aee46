#pragma once

#include <jdbpr/conic.hpp>
#include <jdbpr/rng.hpp>
#include <jdbpr/types.hpp>

#include <vector>

namespace jdbpr {

// Lifted per-user gain matrix R_k over the extended reflection variable
// u_bar = [u; 1]: u_bar^H R_k u_bar + ||h_{d,k}||^2 equals the combined
// channel gain ||h_{r,k}^H diag(e^{j theta}) G + h_{d,k}^H||^2 when u matches
// the reflection coefficients. Built from a_k = diag(h_{r,k}^H) G.
Eigen::MatrixXcd build_gain_matrix(const ChannelSet& ch, int k);

// Combined channel gain ||h_k||^2 of user k under the given phases.
double combined_gain(const ChannelSet& ch, const PhaseShift& ph, int k);
double sum_combined_gain(const ChannelSet& ch, const PhaseShift& ph);

// Relaxed phase program: maximize sum_k Tr(R_k U) over Hermitian PSD U with
// unit diagonal. The reported objective excludes the constant sum ||h_d||^2;
// p21_objective_bound adds it back.
conic::SdpSolution solve_p21(const ChannelSet& ch, const conic::SolverOptions& opt = {});
double p21_objective_bound(const ChannelSet& ch, const conic::SdpSolution& sol);

// T candidate phase vectors from the scaled-eigenvector Gaussian construction;
// each is a valid phase configuration regardless of the rank of U.
std::vector<PhaseShift> randomization_candidates(const Eigen::MatrixXcd& U_bar, int T, Rng& rng);

// Best-of-T randomization: the candidate maximizing the sum combined gain.
PhaseShift gaussian_randomization(const Eigen::MatrixXcd& U_bar, const ChannelSet& ch, int T,
                                  Rng& rng);

// Ascending-gain decode order (weakest user decoded first); ties broken by
// ascending user index.
DecodingOrder order_from_gains(const ChannelSet& ch, const PhaseShift& ph);

// True when the combined gains under ph are ascending along the decode
// sequence (within a relative tolerance), i.e. the phases respect the order.
bool order_respected(const ChannelSet& ch, const PhaseShift& ph, const DecodingOrder& order,
                     double rel_tol = 1e-9);

struct Stage1Result {
    PhaseShift phases;
    DecodingOrder order;
    Eigen::MatrixXcd U_bar;           // relaxed solution, empty when M = 0
    double sdp_objective = 0.0;        // relaxation bound incl. direct gains
    double randomized_objective = 0.0; // achieved sum combined gain
    conic::SdpStatus status = conic::SdpStatus::OPTIMAL;
};

Stage1Result run_stage1(const SystemConfig& cfg, const ChannelSet& ch, Rng& rng,
                        const conic::SolverOptions& opt = {});

} // namespace jdbpr
