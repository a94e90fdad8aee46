#include <jdbpr/beamforming.hpp>

#include <jdbpr/sca.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace jdbpr {

namespace {

std::string tag(int k) { return "[" + std::to_string(k) + "]"; }
std::string tag(int k, int kb) { return "[" + std::to_string(k) + "->" + std::to_string(kb) + "]"; }

// Tr(h h^H W) = h^H W h, real for Hermitian W.
double quad_form(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& W) {
    return std::real(cxd(h.adjoint() * W * h));
}

// Covariance analogue of sic_pair_vacuous: for rank-one W_k = w w^H the two
// tests coincide.
bool pair_vacuous(const Eigen::VectorXcd& h_kb, const Eigen::MatrixXcd& W_k) {
    const double scale = h_kb.squaredNorm() * std::real(W_k.trace());
    return quad_form(h_kb, W_k) <= kVacuousPairPowerRatio * scale;
}

// Rows assembled in watts span many decades; dividing a row by its own
// right-hand scale keeps the solver's residual tolerances meaningful as
// relative errors on every row. Pure row scaling, the constraint set is
// unchanged.
void push_row_scaled(conic::HermitianSdpProblem& p, conic::Constraint c, double floor_scale) {
    const double r = std::max({std::abs(c.rhs), floor_scale, 1e-300});
    for (auto& [id, A] : c.matrix_terms)
        A /= r;
    for (auto& [id, v] : c.scalar_terms)
        v /= r;
    c.rhs /= r;
    p.constraints.push_back(std::move(c));
}

void validate(const BeamformingInput& in) {
    const auto K = in.h.size();
    if (K == 0 || in.W_prev.size() != K || in.order.s.size() != K ||
        static_cast<std::size_t>(in.split.rho.size()) != K ||
        static_cast<std::size_t>(in.params.gamma.size()) != K)
        throw std::invalid_argument("beamforming: user-count mismatch");
    const auto N = in.h[0].size();
    for (const auto& hk : in.h)
        if (hk.size() != N)
            throw std::invalid_argument("beamforming: antenna-count mismatch");
    for (const auto& Wk : in.W_prev)
        if (Wk.rows() != N || Wk.cols() != N)
            throw std::invalid_argument("beamforming: anchor dimension mismatch");
    if (!(in.secant_omega > 1.0))
        throw std::invalid_argument("beamforming: secant_omega must exceed 1");
    for (Eigen::Index k = 0; k < in.split.rho.size(); ++k)
        if (!(in.split.rho[k] > 0.0) || !(in.split.rho[k] < 1.0))
            throw std::invalid_argument("beamforming: rho outside (0, 1)");
}

} // namespace

std::vector<Eigen::MatrixXcd> initial_covariances(const std::vector<Eigen::VectorXcd>& h,
                                                  const PowerSplit& split,
                                                  const DecodingOrder& order,
                                                  const UserParams& params) {
    const int K = static_cast<int>(h.size());
    const Eigen::Index N = h.empty() ? 0 : h[0].size();
    for (const auto& hk : h)
        if (!(hk.squaredNorm() > 0.0))
            throw std::invalid_argument("initial_covariances: zero channel");

    // Received-power ladder: the message decoded at step i must clear the
    // SINR target against everything decoded after it, so aim for
    //   L_i = 1.2 * gamma * (sum_{t > i} L_t + A)
    // and lift the whole ladder until the harvested-power targets hold too.
    double a_max = 0.0, need = 0.0;
    double g_max = 1e-3;
    for (int k = 0; k < K; ++k) {
        a_max = std::max(a_max, params.sigma2[k] + params.delta2[k] / split.rho[k]);
        need = std::max(need, params.e_req[k] / (params.eta[k] * (1.0 - split.rho[k])) -
                                  params.sigma2[k]);
        g_max = std::max(g_max, params.gamma[k]);
    }
    std::vector<double> L(static_cast<std::size_t>(K));
    double tail = 0.0;
    for (int i = K - 1; i >= 0; --i) {
        L[static_cast<std::size_t>(i)] = 1.2 * g_max * (tail + a_max);
        tail += L[static_cast<std::size_t>(i)];
    }
    if (need > 0.0 && tail < 2.0 * need)
        for (auto& l : L)
            l *= 2.0 * need / tail;

    auto covariances = [&](const std::vector<Eigen::VectorXcd>& w) {
        std::vector<Eigen::MatrixXcd> W(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k)
            W[static_cast<std::size_t>(k)] = w[static_cast<std::size_t>(k)] *
                                             w[static_cast<std::size_t>(k)].adjoint();
        return W;
    };

    // Preferred start: beams that hand every user the same received power per
    // message (minimum-norm channel inversion). All cross powers then equal
    // the own powers, so the decode conditions hold with margin zero and the
    // first covariance program is feasible at its own anchor.
    if (K <= N) {
        Eigen::MatrixXcd Hm(K, N);
        for (int k = 0; k < K; ++k)
            Hm.row(k) = h[static_cast<std::size_t>(k)].adjoint();
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(Hm);
        if (cod.rank() == K) {
            const auto seq = order.sequence();
            std::vector<Eigen::VectorXcd> w(static_cast<std::size_t>(K));
            bool finite = true;
            for (int i = 0; i < K; ++i) {
                w[static_cast<std::size_t>(seq[static_cast<std::size_t>(i)])] = cod.solve(
                    Eigen::VectorXcd::Constant(K, std::sqrt(L[static_cast<std::size_t>(i)])));
                finite = finite &&
                         w[static_cast<std::size_t>(seq[static_cast<std::size_t>(i)])].allFinite();
            }
            if (finite)
                return covariances(w);
        }
    }

    // Fallback for overloaded or rank-deficient channels: maximum-ratio beams
    // on the same ladder. Interference couples the users, so double
    // everything until the start is feasible; the maximum-ratio SINR can
    // saturate below its target when users are correlated, so give up on it
    // once scaling stops helping. The covariance program fixes directions;
    // the anchor only has to put the trust intervals at the right scale.
    std::vector<double> p(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
        p[static_cast<std::size_t>(k)] =
            L[static_cast<std::size_t>(order.s[static_cast<std::size_t>(k)] - 1)] /
            h[static_cast<std::size_t>(k)].squaredNorm();

    auto mrt = [&]() {
        std::vector<Eigen::VectorXcd> w(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            const auto& hk = h[static_cast<std::size_t>(k)];
            w[static_cast<std::size_t>(k)] =
                std::sqrt(p[static_cast<std::size_t>(k)]) * hk / hk.norm();
        }
        return w;
    };
    // Worst satisfaction ratios of the QoS and energy targets separately;
    // >= 1 means the start already meets the group.
    auto ratios = [&]() {
        const auto w = mrt();
        double qos = std::numeric_limits<double>::infinity();
        double energy = qos;
        for (int k = 0; k < K; ++k) {
            qos = std::min(qos, sinr(k, h, w, split.rho, params.sigma2, params.delta2, order) /
                                    params.gamma[k]);
            energy = std::min(energy,
                              harvested_power(k, h, w, split.rho, params.sigma2, params.eta) /
                                  params.e_req[k]);
        }
        return std::pair<double, double>(qos, energy);
    };
    auto [qos, energy] = ratios();
    for (int rep = 0; rep < 64 && (qos < 1.0 || energy < 1.0); ++rep) {
        for (auto& pk : p)
            pk *= 2.0;
        const auto [q2, e2] = ratios();
        if (e2 >= 1.0 && q2 <= qos * 1.01 && q2 < 1.0)
            break; // energy covered, SINR saturated: scaling buys nothing more
        qos = q2;
        energy = e2;
    }
    return covariances(mrt());
}

conic::HermitianSdpProblem build_p32(const BeamformingInput& in) {
    validate(in);
    const int K = static_cast<int>(in.h.size());
    const int N = static_cast<int>(in.h[0].size());
    const double omega = in.secant_omega;

    // later(k) = users whose messages stay as interference at decode step of k
    auto later = [&](int k) {
        std::vector<int> out;
        for (int j = 0; j < K; ++j)
            if (in.order.s[static_cast<std::size_t>(j)] > in.order.s[static_cast<std::size_t>(k)])
                out.push_back(j);
        return out;
    };
    auto H = [&](int k) {
        const auto& hk = in.h[static_cast<std::size_t>(k)];
        return Eigen::MatrixXcd(hk * hk.adjoint());
    };
    // anchored received power of beam j at receiver rx
    auto anchor_power = [&](int rx, int j) {
        return quad_form(in.h[static_cast<std::size_t>(rx)], in.W_prev[static_cast<std::size_t>(j)]);
    };

    conic::HermitianSdpProblem p;
    p.objective.sense = conic::Sense::MINIMIZE;
    for (int k = 0; k < K; ++k) {
        const int id = p.add_matrix_var(N, "W" + tag(k));
        p.objective.matrix_terms.emplace_back(id, Eigen::MatrixXcd::Identity(N, N));
    }

    Eigen::VectorXd A(K);
    for (int k = 0; k < K; ++k)
        A[k] = in.params.sigma2[k] + in.params.delta2[k] / in.split.rho[k];

    // |h_k^H w_k|^2 >= gamma_k (interference + A_k)
    for (int k = 0; k < K; ++k) {
        conic::Constraint c;
        c.name = "qos" + tag(k);
        c.rel = conic::Rel::GE;
        c.matrix_terms.emplace_back(k, H(k));
        for (int j : later(k))
            c.matrix_terms.emplace_back(j, Eigen::MatrixXcd(-in.params.gamma[k] * H(k)));
        c.rhs = in.params.gamma[k] * A[k];
        push_row_scaled(p, std::move(c), A[k]);
    }

    // total received power >= e_k / (eta_k (1 - rho_k)) - sigma_k^2
    for (int k = 0; k < K; ++k) {
        conic::Constraint c;
        c.name = "energy" + tag(k);
        c.rel = conic::Rel::GE;
        for (int j = 0; j < K; ++j)
            c.matrix_terms.emplace_back(j, H(k));
        c.rhs = in.params.e_req[k] / (in.params.eta[k] * (1.0 - in.split.rho[k])) -
                in.params.sigma2[k];
        push_row_scaled(p, std::move(c), in.params.sigma2[k]);
    }

    // Decode condition per pair (k decoded at kb): with T1 = |h_k^H w_k|^2,
    // T2/T4 the residual interference at k/kb, T3 = |h_kb^H w_k|^2,
    //   ln T1 - ln(T2 + A_k) - ln T3 + ln(T4 + A_kb) <= 0.
    // Concave lns are linearized at the anchor; convex -lns go through
    // epigraph scalars under their secant majorants plus trust rows.
    for (int k = 0; k < K; ++k) {
        for (int kb = 0; kb < K; ++kb) {
            if (k == kb ||
                in.order.s[static_cast<std::size_t>(k)] > in.order.s[static_cast<std::size_t>(kb)])
                continue;
            if (pair_vacuous(in.h[static_cast<std::size_t>(kb)], in.W_prev[static_cast<std::size_t>(k)]))
                continue;

            const auto js = later(k);
            const double c1 = anchor_power(k, k);
            if (!(c1 > 0.0))
                throw std::invalid_argument("build_p32: zero own-signal anchor" + tag(k));
            double t20 = A[k];
            double c2 = A[kb];
            for (int j : js) {
                t20 += anchor_power(k, j);
                c2 += anchor_power(kb, j);
            }
            const double t30 = anchor_power(kb, k);

            const auto m2 = sca::neg_log_majorant(t20, omega);
            const auto m3 = sca::neg_log_majorant(t30, omega);
            const double inf = std::numeric_limits<double>::infinity();
            const int u1 = p.add_scalar_var(-std::log(m2.hi), inf, "u1" + tag(k, kb));
            const int u2 = p.add_scalar_var(-std::log(m3.hi), inf, "u2" + tag(k, kb));

            {
                conic::Constraint c;
                c.name = "sic" + tag(k, kb);
                c.rel = conic::Rel::LE;
                c.matrix_terms.emplace_back(k, Eigen::MatrixXcd(H(k) / c1));
                for (int j : js)
                    c.matrix_terms.emplace_back(j, Eigen::MatrixXcd(H(kb) / c2));
                c.scalar_terms.emplace_back(u1, 1.0);
                c.scalar_terms.emplace_back(u2, 1.0);
                c.rhs = 2.0 - std::log(c1) - std::log(c2) - A[kb] / c2;
                p.constraints.push_back(std::move(c));
            }

            // u1 >= chord(T2 + A_k), both chords
            for (const auto& chord : {m2.left, m2.right}) {
                conic::Constraint c;
                c.name = "u1_chord" + tag(k, kb);
                c.rel = conic::Rel::GE;
                c.scalar_terms.emplace_back(u1, 1.0);
                for (int j : js)
                    c.matrix_terms.emplace_back(j, Eigen::MatrixXcd(-chord.slope * H(k)));
                c.rhs = chord.offset + chord.slope * A[k];
                p.constraints.push_back(std::move(c));
            }
            // u2 >= chord(T3)
            for (const auto& chord : {m3.left, m3.right}) {
                conic::Constraint c;
                c.name = "u2_chord" + tag(k, kb);
                c.rel = conic::Rel::GE;
                c.scalar_terms.emplace_back(u2, 1.0);
                c.matrix_terms.emplace_back(k, Eigen::MatrixXcd(-chord.slope * H(kb)));
                c.rhs = chord.offset;
                p.constraints.push_back(std::move(c));
            }

            // trust intervals keep the majorants valid
            auto trust = [&](conic::Rel rel, int rx, double rhs, const char* which) {
                conic::Constraint c;
                c.name = std::string(which) + tag(k, kb);
                c.rel = rel;
                for (int j : js)
                    c.matrix_terms.emplace_back(j, H(rx));
                c.rhs = rhs;
                push_row_scaled(p, std::move(c), A[rx]);
            };
            trust(conic::Rel::GE, k, m2.lo - A[k], "trust2_lo");
            trust(conic::Rel::LE, k, m2.hi - A[k], "trust2_hi");
            {
                conic::Constraint c;
                c.name = "trust3_lo" + tag(k, kb);
                c.rel = conic::Rel::GE;
                c.matrix_terms.emplace_back(k, H(kb));
                c.rhs = m3.lo;
                push_row_scaled(p, std::move(c), m3.lo);
                c = {};
                c.name = "trust3_hi" + tag(k, kb);
                c.rel = conic::Rel::LE;
                c.matrix_terms.emplace_back(k, H(kb));
                c.rhs = m3.hi;
                push_row_scaled(p, std::move(c), m3.lo);
            }
        }
    }
    return p;
}

namespace {

// One anchored SDP solve. Change of variables W = P0 * W~ before handing the
// program to the interior-point method: beam powers sit many decades above
// the epigraph scalars, and on the raw-watt program the Newton systems lose
// the central path. Same objective value and margins, only the variable
// scale moves; the solution is mapped back before returning.
conic::SdpSolution solve_p32_once(const BeamformingInput& in, const conic::SolverOptions& opt) {
    double P0 = 0.0;
    for (const auto& Wk : in.W_prev)
        P0 = std::max(P0, std::real(Wk.trace()));
    if (!(P0 > 0.0) || !std::isfinite(P0))
        P0 = 1.0;
    auto build_scaled = [&](const BeamformingInput& bi) {
        auto prob = build_p32(bi);
        for (auto& c : prob.constraints)
            for (auto& [idx, A] : c.matrix_terms)
                A *= P0;
        for (auto& [idx, A] : prob.objective.matrix_terms)
            A *= P0;
        return prob;
    };
    auto sol = conic::solve(build_scaled(in), opt);
    // A tight trust region can cut off the feasible set even though the
    // pre-lowered program is solvable, and a poorly centred anchor can stall
    // the interior-point method; retry with widening intervals. The majorants
    // stay valid at any width, only looser, and the next pass re-anchors and
    // tightens again.
    for (double exp = 3.0; sol.status != conic::SdpStatus::OPTIMAL && exp <= 9.0;
         exp *= 3.0) {
        BeamformingInput wide = in;
        wide.secant_omega = std::pow(in.secant_omega, exp);
        auto retry = conic::solve(build_scaled(wide), opt);
        if (retry.status == conic::SdpStatus::OPTIMAL)
            sol = std::move(retry);
    }
    for (auto& Xk : sol.X)
        Xk *= P0;
    return sol;
}

} // namespace

BeamformingResult solve_beamforming(const BeamformingInput& in, const conic::SolverOptions& opt) {
    BeamformingResult res;
    // This block is itself a successive-convex program: each solve is anchored
    // at the previous covariances, and the anchored program always contains
    // its own anchor, so re-solving until the decrease stalls converges the
    // block to its fixed point and hands the next block a settled state.
    constexpr double kInnerEps = 1e-4;
    constexpr int kMaxInner = 12;
    auto total = [](const std::vector<Eigen::MatrixXcd>& X) {
        double t = 0.0;
        for (const auto& Xk : X)
            t += std::real(Xk.trace());
        return t;
    };
    auto sol = solve_p32_once(in, opt);
    if (sol.status == conic::SdpStatus::OPTIMAL) {
        BeamformingInput cur = in;
        double prev = total(sol.X);
        for (int i = 1; i < kMaxInner; ++i) {
            cur.W_prev = sol.X;
            auto next = solve_p32_once(cur, opt);
            if (next.status != conic::SdpStatus::OPTIMAL)
                break;
            const double obj = total(next.X);
            if (obj < prev) {
                const double drop = (prev - obj) / std::max(prev, 1e-300);
                sol = std::move(next);
                prev = obj;
                if (drop < kInnerEps)
                    break;
            } else {
                break;
            }
        }
    }

    switch (sol.status) {
    case conic::SdpStatus::OPTIMAL: res.status = SubStatus::OK; break;
    case conic::SdpStatus::INFEASIBLE: res.status = SubStatus::INFEASIBLE; break;
    case conic::SdpStatus::NUMERICAL_FAILURE: res.status = SubStatus::FAILED; break;
    }

    if (res.status == SubStatus::OK) {
        const auto K = in.h.size();
        res.beams.W = sol.X;
        res.beams.w.resize(K);
        res.rank_ratios.resize(K);
        res.objective_w = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            auto [wk, ratio] = conic::extract_rank_one(sol.X[k]);
            res.beams.w[k] = std::move(wk);
            res.rank_ratios[k] = ratio;
            res.objective_w += std::real(sol.X[k].trace());
        }
    }
    res.raw = std::move(sol);
    return res;
}

PowerRefit refit_powers(const std::vector<Eigen::VectorXcd>& h,
                        const std::vector<Eigen::VectorXcd>& dirs,
                        const PowerSplit& split,
                        const DecodingOrder& order,
                        const UserParams& params,
                        const conic::SolverOptions& opt) {
    PowerRefit res;
    const int K = static_cast<int>(h.size());
    if (dirs.size() != h.size() || split.rho.size() != K)
        throw std::invalid_argument("refit_powers: size mismatch");

    std::vector<Eigen::VectorXcd> d(dirs.size());
    for (int k = 0; k < K; ++k) {
        const double n = dirs[static_cast<std::size_t>(k)].norm();
        if (!(n > 0.0))
            return res;
        d[static_cast<std::size_t>(k)] = dirs[static_cast<std::size_t>(k)] / n;
    }

    Eigen::MatrixXd g(K, K);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j)
            g(i, j) = beam_power(h[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(j)]);

    Eigen::VectorXd A(K), need(K);
    for (int k = 0; k < K; ++k) {
        A[k] = params.sigma2[k] + params.delta2[k] / split.rho[k];
        need[k] = params.e_req[k] / (params.eta[k] * (1.0 - split.rho[k])) - params.sigma2[k];
        if (!(g(k, k) > 0.0))
            return res; // own direction orthogonal to own channel
    }

    auto later = [&](int k) {
        std::vector<int> js;
        for (int j = 0; j < K; ++j)
            if (order.s[static_cast<std::size_t>(j)] > order.s[static_cast<std::size_t>(k)])
                js.push_back(j);
        return js;
    };
    auto tag = [](int a, int b = -1) {
        std::string t = "[" + std::to_string(a);
        if (b >= 0)
            t += "->" + std::to_string(b);
        return t + "]";
    };

    // power scale so the LP variables sit near one
    double P0 = 0.0;
    for (int k = 0; k < K; ++k) {
        P0 = std::max(P0, K * params.gamma[k] * A[k] / g(k, k));
        const double gmax = g.row(k).maxCoeff();
        if (need[k] > 0.0 && gmax > 0.0)
            P0 = std::max(P0, 2.0 * need[k] / gmax);
    }
    if (!(P0 > 0.0) || !std::isfinite(P0))
        P0 = 1.0;

    conic::HermitianSdpProblem lp;
    lp.objective.sense = conic::Sense::MINIMIZE;
    const double inf = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
        const int id = lp.add_scalar_var(0.0, inf, "p" + tag(k));
        lp.objective.scalar_terms.emplace_back(id, 1.0);
    }

    for (int k = 0; k < K; ++k) {
        conic::Constraint c;
        c.name = "qos" + tag(k);
        c.rel = conic::Rel::GE;
        c.scalar_terms.emplace_back(k, g(k, k) * P0);
        for (int j : later(k))
            c.scalar_terms.emplace_back(j, -params.gamma[k] * g(k, j) * P0);
        c.rhs = params.gamma[k] * A[k];
        push_row_scaled(lp, std::move(c), A[k]);
    }
    for (int k = 0; k < K; ++k) {
        conic::Constraint c;
        c.name = "energy" + tag(k);
        c.rel = conic::Rel::GE;
        for (int j = 0; j < K; ++j)
            c.scalar_terms.emplace_back(j, g(k, j) * P0);
        c.rhs = need[k];
        push_row_scaled(lp, std::move(c), params.sigma2[k]);
    }
    // cross-SINR at kb decoding k must reach k's own SINR; clearing both
    // denominators cancels p_k and leaves a linear row in the later powers
    for (int k = 0; k < K; ++k) {
        for (int kb = 0; kb < K; ++kb) {
            if (k == kb ||
                order.s[static_cast<std::size_t>(k)] > order.s[static_cast<std::size_t>(kb)])
                continue;
            if (g(kb, k) <= kVacuousPairPowerRatio * h[static_cast<std::size_t>(kb)].squaredNorm())
                continue;
            const double Nk = split.rho[k] * params.sigma2[k] + params.delta2[k];
            const double Nkb = split.rho[kb] * params.sigma2[kb] + params.delta2[kb];
            conic::Constraint c;
            c.name = "sic" + tag(k, kb);
            c.rel = conic::Rel::GE;
            double cmax = 0.0;
            for (int j : later(k)) {
                const double coef = split.rho[k] * split.rho[kb] *
                                    (g(kb, k) * g(k, j) - g(k, k) * g(kb, j)) * P0;
                c.scalar_terms.emplace_back(j, coef);
                cmax = std::max(cmax, std::abs(coef));
            }
            c.rhs = split.rho[k] * g(k, k) * Nkb - split.rho[kb] * g(kb, k) * Nk;
            push_row_scaled(lp, std::move(c), cmax);
        }
    }

    auto sol = conic::solve(lp, opt);
    switch (sol.status) {
    case conic::SdpStatus::OPTIMAL: res.status = SubStatus::OK; break;
    case conic::SdpStatus::INFEASIBLE: res.status = SubStatus::INFEASIBLE; break;
    case conic::SdpStatus::NUMERICAL_FAILURE: res.status = SubStatus::FAILED; break;
    }
    if (res.status == SubStatus::OK) {
        res.p = (P0 * sol.scalars.head(K)).cwiseMax(0.0);
        res.objective_w = res.p.sum();
    }
    return res;
}

} // namespace jdbpr
