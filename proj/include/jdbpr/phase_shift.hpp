#pragma once

#include <jdbpr/conic.hpp>
#include <jdbpr/model.hpp>
#include <jdbpr/rng.hpp>
#include <jdbpr/types.hpp>

#include <vector>

namespace jdbpr {

// Lift of one received signal over the extended reflection variable
// u_bar = [u; 1] with u_m = e^{-j theta_m}: with S and q below,
//   u_bar^H S u_bar + |q|^2 = |h_j(theta)^H w|^2,
// so received powers are linear in U_bar = u_bar u_bar^H.
struct SignalLift {
    Eigen::MatrixXcd S; // (M+1) x (M+1) Hermitian
    cxd q = 0.0;        // direct-path component h_{d,j}^H w
};

SignalLift build_signal_lift(const ChannelSet& ch, const Eigen::VectorXcd& w, int receiver);

// Covariance form: received power through W = sum_i lam_i v_i v_i^H is the
// lambda-weighted sum of the eigenvector lifts, so powers stay linear in
// U_bar. q carries sqrt of the direct-path power (its phase is immaterial
// here; only |q|^2 enters the rows). Exact for rank-one W.
SignalLift build_signal_lift(const ChannelSet& ch, const Eigen::MatrixXcd& W, int receiver);

// Rank-one lift of a concrete phase configuration (the SCA anchor).
Eigen::MatrixXcd lift_phases(const PhaseShift& ps);

// Phase subproblem at fixed beam covariances and splitting ratios. The
// incumbent phases anchor every linearization and are the fallback on any
// failure. Covariances rather than extracted beams keep the rows consistent
// with the beam program mid-descent; pass w_k w_k^H for concrete beams.
struct PhaseProblemInput {
    ChannelSet channels;
    std::vector<Eigen::MatrixXcd> W;
    PowerSplit split;
    DecodingOrder order;
    UserParams params;
    PhaseShift incumbent;
    double secant_omega = 10.0;
};

// Margin-maximization program over U_bar (unit diagonal, PSD) and the shared
// slack s: QoS, decode-condition and energy rows are normalized and padded
// with s; the unit-diagonal rows and the gain-ordering rows for consecutive
// decode positions stay hard so the decode order survives the update. Decode
// rows use the same linearized-log plus secant-epigraph lowering as the
// covariance program. Scalar variable id 0 is the slack.
conic::HermitianSdpProblem build_p51(const PhaseProblemInput& in);

struct PhaseShiftResult {
    SubStatus status = SubStatus::FAILED;
    PhaseShift phase;        // winner, or the incumbent when nothing passed
    double slack = 0.0;      // program margin achieved
    double margin = 0.0;     // exact-constraint margin of the returned phases
    bool changed = false;    // a non-incumbent candidate was adopted
    conic::SdpSolution raw;
};

// Solves the program, draws T randomization candidates from the relaxed
// solution (plus its dominant eigenvector and the incumbent), screens them
// against the exact constraint set and the decode order, and returns the
// passing candidate with the largest worst-case margin. The incumbent is part
// of the pool, so a feasible incumbent is never traded for something worse.
PhaseShiftResult solve_phase_shift(const PhaseProblemInput& in, int T, Rng& rng,
                                   const conic::SolverOptions& opt = {});

} // namespace jdbpr
