#include <jdbpr/model.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace jdbpr {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

const char* to_string(SubStatus s) {
    switch (s) {
    case SubStatus::OK: return "ok";
    case SubStatus::STALLED: return "stalled";
    case SubStatus::INFEASIBLE: return "infeasible";
    case SubStatus::FAILED: return "failed";
    case SubStatus::SKIPPED: return "skipped";
    }
    return "?";
}

const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::CONVERGED: return "converged";
    case SolveStatus::MAX_ITERS_EXCEEDED: return "max_iters_exceeded";
    case SolveStatus::SCENARIO_INFEASIBLE: return "scenario_infeasible";
    }
    return "?";
}

UserParams expand_params(const SystemConfig& cfg) {
    const int K = cfg.num_users;
    UserParams p;
    p.gamma = Eigen::VectorXd::Constant(K, cfg.sinr_threshold);
    p.e_req = Eigen::VectorXd::Constant(K, cfg.energy_threshold);
    p.sigma2 = Eigen::VectorXd::Constant(K, cfg.noise_antenna_var);
    p.delta2 = Eigen::VectorXd::Constant(K, cfg.noise_id_var);
    p.eta = Eigen::VectorXd::Constant(K, cfg.eh_efficiency);
    return p;
}

std::vector<Eigen::VectorXcd> effective_channels(const ChannelSet& ch, const PhaseShift& ps) {
    std::vector<Eigen::VectorXcd> h(static_cast<std::size_t>(ch.num_users));
    for (int k = 0; k < ch.num_users; ++k) {
        if (ch.num_elements > 0)
            h[k] = effective_channel(ch.G, ch.h_r[k], ch.h_d[k], ps.theta);
        else
            h[k] = ch.h_d[k];
    }
    return h;
}

namespace {

// Residual interference power at receiver rx for messages decoded after
// position s(k): sum over j with s(j) > s(k) of |h_rx^H w_j|^2.
double residual_interference(int k, int rx, const std::vector<Eigen::VectorXcd>& h,
                             const std::vector<Eigen::VectorXcd>& w, const DecodingOrder& order) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j)
        if (order.s[j] > order.s[static_cast<std::size_t>(k)])
            acc += beam_power(h[static_cast<std::size_t>(rx)], w[j]);
    return acc;
}

} // namespace

double sinr(int k, const std::vector<Eigen::VectorXcd>& h, const std::vector<Eigen::VectorXcd>& w,
            const Eigen::VectorXd& rho, const Eigen::VectorXd& sigma2,
            const Eigen::VectorXd& delta2, const DecodingOrder& order) {
    const auto ku = static_cast<std::size_t>(k);
    const double sig = rho[k] * beam_power(h[ku], w[ku]);
    const double den = rho[k] * (residual_interference(k, k, h, w, order) + sigma2[k]) + delta2[k];
    return sig / den;
}

double cross_sinr(int k, int kbar, const std::vector<Eigen::VectorXcd>& h,
                  const std::vector<Eigen::VectorXcd>& w, const Eigen::VectorXd& rho,
                  const Eigen::VectorXd& sigma2, const Eigen::VectorXd& delta2,
                  const DecodingOrder& order) {
    const auto ku = static_cast<std::size_t>(k);
    const auto bu = static_cast<std::size_t>(kbar);
    const double sig = rho[kbar] * beam_power(h[bu], w[ku]);
    const double den =
        rho[kbar] * (residual_interference(k, kbar, h, w, order) + sigma2[kbar]) + delta2[kbar];
    return sig / den;
}

double harvested_power(int k, const std::vector<Eigen::VectorXcd>& h,
                       const std::vector<Eigen::VectorXcd>& w, const Eigen::VectorXd& rho,
                       const Eigen::VectorXd& sigma2, const Eigen::VectorXd& eta) {
    const auto ku = static_cast<std::size_t>(k);
    double received = sigma2[k];
    for (const auto& wj : w)
        received += beam_power(h[ku], wj);
    return eta[k] * (1.0 - rho[k]) * received;
}

double total_power(const std::vector<Eigen::VectorXcd>& w) {
    double acc = 0.0;
    for (const auto& wk : w)
        acc += wk.squaredNorm();
    return acc;
}

bool sic_pair_vacuous(const Eigen::VectorXcd& h_kbar, const Eigen::VectorXcd& w_k) {
    const double scale = h_kbar.squaredNorm() * w_k.squaredNorm();
    return beam_power(h_kbar, w_k) <= kVacuousPairPowerRatio * scale;
}

FeasibilityReport check_feasibility(const std::vector<Eigen::VectorXcd>& h,
                                    const std::vector<Eigen::VectorXcd>& w,
                                    const Eigen::VectorXd& rho, const Eigen::VectorXd& theta,
                                    const DecodingOrder& order, const UserParams& p, double tol) {
    const int K = static_cast<int>(h.size());
    if (static_cast<int>(w.size()) != K || rho.size() != K ||
        static_cast<int>(order.s.size()) != K)
        throw std::invalid_argument("check_feasibility: user-count mismatch");

    FeasibilityReport rep;
    auto add = [&](std::string name, double margin, bool binary = false) {
        rep.checks.push_back({std::move(name), margin, margin >= -tol, binary});
    };

    // (order validity first: the SINR expressions assume a permutation)
    {
        std::vector<bool> seen(static_cast<std::size_t>(K), false);
        bool ok = true;
        for (int v : order.s) {
            if (v < 1 || v > K || seen[static_cast<std::size_t>(v - 1)]) {
                ok = false;
                break;
            }
            seen[static_cast<std::size_t>(v - 1)] = true;
        }
        add("order_perm", ok ? 0.0 : -1.0, true);
        if (!ok) {
            rep.feasible = false;
            rep.min_margin = -1.0;
            rep.worst = "order_perm";
            return rep;
        }
    }

    for (int k = 0; k < K; ++k) {
        const double g = sinr(k, h, w, rho, p.sigma2, p.delta2, order);
        add("qos[" + std::to_string(k) + "]", (g - p.gamma[k]) / p.gamma[k]);
    }

    for (int k = 0; k < K; ++k) {
        for (int kb = 0; kb < K; ++kb) {
            if (k == kb || order.s[static_cast<std::size_t>(k)] >
                               order.s[static_cast<std::size_t>(kb)])
                continue;
            const std::string name =
                "sic[" + std::to_string(k) + "->" + std::to_string(kb) + "]";
            if (sic_pair_vacuous(h[static_cast<std::size_t>(kb)], w[static_cast<std::size_t>(k)])) {
                add(name, 0.0, true); // nothing received, nothing to decode
                continue;
            }
            const double own = sinr(k, h, w, rho, p.sigma2, p.delta2, order);
            const double cross = cross_sinr(k, kb, h, w, rho, p.sigma2, p.delta2, order);
            add(name, (cross - own) / std::max(own, 1e-300));
        }
    }

    for (int k = 0; k < K; ++k) {
        const double e = harvested_power(k, h, w, rho, p.sigma2, p.eta);
        add("energy[" + std::to_string(k) + "]", (e - p.e_req[k]) / p.e_req[k]);
    }

    for (int k = 0; k < K; ++k) {
        add("rho_lower[" + std::to_string(k) + "]", rho[k]);
        add("rho_upper[" + std::to_string(k) + "]", 1.0 - rho[k]);
    }

    if (theta.size() > 0) {
        double worst = 0.0;
        for (Eigen::Index m = 0; m < theta.size(); ++m)
            worst = std::min(worst, std::min(theta[m], kTwoPi - theta[m]) / kTwoPi);
        add("theta_range", worst >= 0.0 ? 0.0 : worst, true);
    }

    rep.feasible = true;
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& c : rep.checks) {
        rep.feasible = rep.feasible && c.pass;
        if (c.margin < rep.min_margin) {
            rep.min_margin = c.margin;
            rep.worst = c.name;
        }
    }
    return rep;
}

FeasibilityReport check_feasibility(const SystemConfig& cfg, const ChannelSet& ch,
                                    const Solution& sol, double tol) {
    const auto h = effective_channels(ch, sol.phase);
    return check_feasibility(h, sol.beams.w, sol.split.rho, sol.phase.theta, sol.order,
                             expand_params(cfg), tol);
}

} // namespace jdbpr
