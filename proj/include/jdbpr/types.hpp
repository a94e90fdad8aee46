#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace jdbpr {

using cxd = std::complex<double>;

// System-level configuration. Scalar per-link quantities (noise powers,
// thresholds, efficiency) are common across users here; the solver modules
// take per-user vectors, so heterogeneous setups remain expressible.
// Powers are linear watts, SINR threshold is a linear ratio.
struct SystemConfig {
    int num_users = 4;     // K
    int num_antennas = 4;  // N (BS ULA)
    int num_elements = 30; // M (IRS ULA), 0 disables the surface

    Eigen::Vector3d bs_position{0.0, 0.0, 15.0};
    Eigen::Vector3d irs_position{50.0, 50.0, 15.0};
    double user_radius = 200.0; // users uniform in a ground disc around the origin

    double noise_antenna_var = 1e-10; // sigma^2 [W]  (-70 dBm)
    double noise_id_var = 1e-8;       // delta^2 [W]  (-50 dBm)
    double eh_efficiency = 0.7;       // eta
    double sinr_threshold = 10.0;     // gamma, linear (10 dB)
    double energy_threshold = 1e-4;   // e [W]        (-10 dBm)

    double path_loss_ref = 1e-3; // C0 at d = 1 m (-30 dB)
    double alpha_direct = 3.0;   // BS-user exponent
    double alpha_bs_irs = 2.2;   // BS-IRS exponent
    double alpha_irs_user = 2.5; // IRS-user exponent

    double rician_kappa = 1.9952623149688795;    // BS-IRS factor, 3 dB
    double rician_vartheta = 1.9952623149688795; // IRS-user factor, 3 dB
    double element_spacing_ratio = 0.5;          // d / lambda for both ULAs

    int randomization_count = 1000; // T
    double convergence_eps = 1e-3;  // outer stopping rule
    int max_iters = 50;
    std::uint64_t rng_seed = 1;
};

// User and infrastructure positions for one scenario draw.
struct Topology {
    Eigen::Vector3d bs;
    Eigen::Vector3d irs;
    std::vector<Eigen::Vector3d> users;
};

// One channel realization. h_r and h_d hold column vectors per user; the
// row-vector forms h_{r,k}^H and h_{d,k}^H of the signal model are their
// adjoints. G is the BS->IRS matrix (M x N). M = 0 gives empty G and h_r.
struct ChannelSet {
    int num_users = 0;
    int num_antennas = 0;
    int num_elements = 0;
    Eigen::MatrixXcd G;                   // M x N
    std::vector<Eigen::VectorXcd> h_r;    // K vectors of length M
    std::vector<Eigen::VectorXcd> h_d;    // K vectors of length N
    Topology topology;
    std::uint64_t seed = 0; // root seed echoed for dumps
};

// IRS phase configuration, theta_m in [0, 2*pi). The reflection matrix is
// diag(exp(j*theta)). Empty vector encodes "no surface".
struct PhaseShift {
    Eigen::VectorXd theta;

    Eigen::VectorXcd reflection() const {
        Eigen::VectorXcd v(theta.size());
        for (Eigen::Index m = 0; m < theta.size(); ++m)
            v[m] = std::polar(1.0, theta[m]);
        return v;
    }
};

// SIC decoding order: s[k] is the 1-based decode position of user k
// (position 1 decoded first). Always a permutation of 1..K.
struct DecodingOrder {
    std::vector<int> s;

    // User indices sorted by decode position.
    std::vector<int> sequence() const {
        std::vector<int> seq(s.size());
        for (std::size_t k = 0; k < s.size(); ++k)
            seq[static_cast<std::size_t>(s[k] - 1)] = static_cast<int>(k);
        return seq;
    }
};

// Transmit beamformers; w[k] is the vector for user k. The lifted covariances
// from the most recent SDP solve are kept for SCA anchoring when available.
struct Beamformers {
    std::vector<Eigen::VectorXcd> w;
    std::vector<Eigen::MatrixXcd> W; // may be empty
};

struct PowerSplit {
    Eigen::VectorXd rho; // per-user, strictly inside (0, 1)
};

struct ConstraintCheck {
    std::string name;
    double margin = 0.0; // normalized, >= 0 means satisfied
    bool pass = false;
    bool binary = false; // pass/fail check; its margin carries no scale
};

struct FeasibilityReport {
    std::vector<ConstraintCheck> checks;
    bool feasible = false;
    double min_margin = 0.0;
    std::string worst; // name of the minimum-margin constraint
};

enum class SubStatus { OK, STALLED, INFEASIBLE, FAILED, SKIPPED };

struct IterationRecord {
    int iteration = 0;       // 1-based outer cycle
    double objective_w = 0.0; // sum of SDP covariance traces [W]
    SubStatus beamforming = SubStatus::OK;
    SubStatus power_split = SubStatus::OK;
    SubStatus phase = SubStatus::OK;
    double min_margin = 0.0;     // exact-constraint margin after the cycle
    double max_rank_ratio = 0.0; // worst lambda2/lambda1 over users
    double millis = 0.0;
};

using IterationTrace = std::vector<IterationRecord>;

enum class SolveStatus { CONVERGED, MAX_ITERS_EXCEEDED, SCENARIO_INFEASIBLE };

struct Solution {
    SolveStatus status = SolveStatus::SCENARIO_INFEASIBLE;
    bool feasible = false;
    double objective_w = 0.0;
    Beamformers beams;
    PowerSplit split;
    PhaseShift phase;
    DecodingOrder order;
    FeasibilityReport report;
    IterationTrace trace;
};

const char* to_string(SubStatus s);
const char* to_string(SolveStatus s);

} // namespace jdbpr
