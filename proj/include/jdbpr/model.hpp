#pragma once

#include <jdbpr/types.hpp>

#include <stdexcept>

namespace jdbpr {

// Per-user expansions of the config's common scalars, so every model function
// below supports heterogeneous users.
struct UserParams {
    Eigen::VectorXd gamma;  // SINR thresholds (linear)
    Eigen::VectorXd e_req;  // harvested-power requirements [W]
    Eigen::VectorXd sigma2; // antenna noise [W]
    Eigen::VectorXd delta2; // information-decoding noise [W]
    Eigen::VectorXd eta;    // harvesting efficiency
};

UserParams expand_params(const SystemConfig& cfg);

// Effective downlink channel h_k with h_k^H = h_{r,k}^H diag(e^{j theta}) G + h_{d,k}^H.
// With no surface (M = 0, empty theta) this is the direct channel.
template <class DG, class DR, class DD>
Eigen::VectorXcd effective_channel(const Eigen::MatrixBase<DG>& G,
                                   const Eigen::MatrixBase<DR>& h_r,
                                   const Eigen::MatrixBase<DD>& h_d,
                                   const Eigen::VectorXd& theta) {
    if (G.rows() != h_r.size() || G.rows() != theta.size())
        throw std::invalid_argument("effective_channel: element-count mismatch");
    if (G.rows() > 0 && G.cols() != h_d.size())
        throw std::invalid_argument("effective_channel: antenna-count mismatch");
    Eigen::VectorXcd h = h_d;
    if (G.rows() > 0) {
        Eigen::VectorXcd scaled(h_r.size());
        for (Eigen::Index m = 0; m < h_r.size(); ++m)
            scaled[m] = std::polar(1.0, -theta[m]) * h_r[m]; // (diag e^{j theta})^H h_r
        h += G.adjoint() * scaled;
    }
    return h;
}

std::vector<Eigen::VectorXcd> effective_channels(const ChannelSet& ch, const PhaseShift& ps);

// |h^H w|^2
inline double beam_power(const Eigen::VectorXcd& h, const Eigen::VectorXcd& w) {
    return std::norm(h.dot(w)); // Eigen's dot conjugates the first argument
}

// Received SINR of user k under power splitting and SIC: interference from
// users decoded after k (decode positions s(j) > s(k)) remains.
double sinr(int k, const std::vector<Eigen::VectorXcd>& h,
            const std::vector<Eigen::VectorXcd>& w, const Eigen::VectorXd& rho,
            const Eigen::VectorXd& sigma2, const Eigen::VectorXd& delta2,
            const DecodingOrder& order);

// SINR observed at user kbar while decoding user k's message (s(k) <= s(kbar));
// the residual interference set is still taken from k's decode position.
double cross_sinr(int k, int kbar, const std::vector<Eigen::VectorXcd>& h,
                  const std::vector<Eigen::VectorXcd>& w, const Eigen::VectorXd& rho,
                  const Eigen::VectorXd& sigma2, const Eigen::VectorXd& delta2,
                  const DecodingOrder& order);

// Harvested power at user k from the energy-splitting branch.
double harvested_power(int k, const std::vector<Eigen::VectorXcd>& h,
                       const std::vector<Eigen::VectorXcd>& w, const Eigen::VectorXd& rho,
                       const Eigen::VectorXd& sigma2, const Eigen::VectorXd& eta);

// BS transmit power: sum of squared beamformer norms.
double total_power(const std::vector<Eigen::VectorXcd>& w);

// A SIC pair (k decoded at kbar) is vacuous when kbar receives essentially no
// power of k's message; below this normalized cross power the decode
// condition constrains nothing (exact zero-forcing is the motivating case).
inline constexpr double kVacuousPairPowerRatio = 1e-18;

bool sic_pair_vacuous(const Eigen::VectorXcd& h_kbar, const Eigen::VectorXcd& w_k);

// Validates a candidate operating point against the original (non-convex)
// constraint set: QoS, SIC decode conditions, harvested energy, splitting
// bounds, phase range, order validity. Margins are normalized (relative to the
// constraint's own scale); pass means margin >= -tol.
FeasibilityReport check_feasibility(const std::vector<Eigen::VectorXcd>& h,
                                    const std::vector<Eigen::VectorXcd>& w,
                                    const Eigen::VectorXd& rho, const Eigen::VectorXd& theta,
                                    const DecodingOrder& order, const UserParams& p,
                                    double tol = 1e-6);

FeasibilityReport check_feasibility(const SystemConfig& cfg, const ChannelSet& ch,
                                    const Solution& sol, double tol = 1e-6);

} // namespace jdbpr
