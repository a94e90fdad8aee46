#include <jdbpr/phase_shift.hpp>

#include <jdbpr/sca.hpp>
#include <jdbpr/stage1.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace jdbpr {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string tag(int k) { return "[" + std::to_string(k) + "]"; }
std::string tag(int k, int kb) { return "[" + std::to_string(k) + "->" + std::to_string(kb) + "]"; }

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0)
        a += kTwoPi;
    return a;
}

PhaseShift phases_from_vector(const Eigen::VectorXcd& u) {
    const Eigen::Index M = u.size() - 1;
    cxd ref = u[M];
    if (std::abs(ref) == 0.0)
        ref = 1.0;
    PhaseShift ps;
    ps.theta.resize(M);
    for (Eigen::Index m = 0; m < M; ++m) {
        const cxd rel = u[m] / ref;
        ps.theta[m] = std::abs(rel) == 0.0 ? 0.0 : wrap_angle(-std::arg(rel));
    }
    return ps;
}

void validate(const PhaseProblemInput& in) {
    const int K = in.channels.num_users;
    const int M = in.channels.num_elements;
    if (K <= 0 || static_cast<int>(in.W.size()) != K || in.split.rho.size() != K ||
        static_cast<int>(in.order.s.size()) != K || in.params.gamma.size() != K)
        throw std::invalid_argument("phase_shift: user-count mismatch");
    for (const auto& Wk : in.W)
        if (Wk.rows() != in.channels.num_antennas || Wk.cols() != in.channels.num_antennas)
            throw std::invalid_argument("phase_shift: covariance dimension mismatch");
    if (M <= 0 || in.incumbent.theta.size() != M)
        throw std::invalid_argument("phase_shift: element-count mismatch");
    if (!(in.secant_omega > 1.0))
        throw std::invalid_argument("phase_shift: secant_omega must exceed 1");
    for (Eigen::Index k = 0; k < in.split.rho.size(); ++k)
        if (!(in.split.rho[k] > 0.0) || !(in.split.rho[k] < 1.0))
            throw std::invalid_argument("phase_shift: rho outside (0, 1)");
}

// Normalizes a row by its own scale and couples it to the shared slack so the
// objective reads as a uniform relative margin (same scheme as the splitting
// program, extended to matrix coefficients).
void push_with_slack(conic::HermitianSdpProblem& p, conic::Constraint c, int slack_id) {
    double r = std::abs(c.rhs);
    for (const auto& [id, m] : c.matrix_terms)
        r = std::max(r, m.cwiseAbs().maxCoeff());
    for (const auto& [id, v] : c.scalar_terms)
        r = std::max(r, std::abs(v));
    if (r <= 0.0)
        r = 1.0;
    for (auto& [id, m] : c.matrix_terms)
        m /= r;
    for (auto& [id, v] : c.scalar_terms)
        v /= r;
    c.rhs /= r;
    c.scalar_terms.emplace_back(slack_id, c.rel == conic::Rel::GE ? -1.0 : 1.0);
    p.constraints.push_back(std::move(c));
}

} // namespace

SignalLift build_signal_lift(const ChannelSet& ch, const Eigen::VectorXcd& w, int receiver) {
    const int M = ch.num_elements;
    const auto ru = static_cast<std::size_t>(receiver);
    SignalLift lift;
    lift.q = ch.h_d[ru].dot(w); // h_d^H w
    lift.S = Eigen::MatrixXcd::Zero(M + 1, M + 1);
    if (M > 0) {
        const Eigen::VectorXcd p = ch.h_r[ru].conjugate().asDiagonal() * (ch.G * w);
        lift.S.topLeftCorner(M, M) = p * p.adjoint();
        lift.S.topRightCorner(M, 1) = p * std::conj(lift.q);
        lift.S.bottomLeftCorner(1, M) = lift.q * p.adjoint();
    }
    return lift;
}

SignalLift build_signal_lift(const ChannelSet& ch, const Eigen::MatrixXcd& W, int receiver) {
    const int M = ch.num_elements;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(W);
    SignalLift acc;
    acc.S = Eigen::MatrixXcd::Zero(M + 1, M + 1);
    double q2 = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = es.eigenvalues()[i];
        if (!(lam > 0.0))
            continue; // numerically zero or slightly negative eigenvalue
        const Eigen::VectorXcd v = std::sqrt(lam) * es.eigenvectors().col(i);
        const SignalLift li = build_signal_lift(ch, v, receiver);
        acc.S += li.S;
        q2 += std::norm(li.q);
    }
    acc.q = std::sqrt(q2);
    return acc;
}

Eigen::MatrixXcd lift_phases(const PhaseShift& ps) {
    const Eigen::Index M = ps.theta.size();
    Eigen::VectorXcd u(M + 1);
    for (Eigen::Index m = 0; m < M; ++m)
        u[m] = std::polar(1.0, -ps.theta[m]);
    u[M] = 1.0;
    return u * u.adjoint();
}

conic::HermitianSdpProblem build_p51(const PhaseProblemInput& in) {
    validate(in);
    const int K = in.channels.num_users;
    const int M = in.channels.num_elements;
    const double omega = in.secant_omega;
    const auto& ord = in.order.s;

    auto later = [&](int k) {
        std::vector<int> out;
        for (int j = 0; j < K; ++j)
            if (ord[static_cast<std::size_t>(j)] > ord[static_cast<std::size_t>(k)])
                out.push_back(j);
        return out;
    };

    // lift(j, k): beam covariance j as seen at receiver k
    std::vector<std::vector<SignalLift>> lift(static_cast<std::size_t>(K));
    for (int j = 0; j < K; ++j) {
        lift[static_cast<std::size_t>(j)].reserve(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k)
            lift[static_cast<std::size_t>(j)].push_back(
                build_signal_lift(in.channels, in.W[static_cast<std::size_t>(j)], k));
    }
    auto S = [&](int j, int k) -> const Eigen::MatrixXcd& {
        return lift[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].S;
    };
    auto q2 = [&](int j, int k) {
        return std::norm(lift[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].q);
    };

    // anchored received powers under the incumbent phases
    Eigen::VectorXcd ubar(M + 1);
    for (int m = 0; m < M; ++m)
        ubar[m] = std::polar(1.0, -in.incumbent.theta[m]);
    ubar[M] = 1.0;
    auto anchor_power = [&](int j, int k) {
        return std::real(cxd(ubar.adjoint() * S(j, k) * ubar)) + q2(j, k);
    };

    Eigen::VectorXd A(K);
    for (int k = 0; k < K; ++k)
        A[k] = in.params.sigma2[k] + in.params.delta2[k] / in.split.rho[k];

    const auto h_inc = effective_channels(in.channels, in.incumbent);

    conic::HermitianSdpProblem p;
    const int uvar = p.add_matrix_var(M + 1, "U");
    // Negative slack keeps an interior point available even when the incumbent
    // is exactly on the boundary (phase-I style); candidates are screened
    // against the exact constraints afterwards either way.
    const int slack = p.add_scalar_var(-1.0, 1.0, "slack");
    p.objective.sense = conic::Sense::MAXIMIZE;
    p.objective.scalar_terms.emplace_back(slack, 1.0);

    // unit modulus (hard)
    for (int m = 0; m <= M; ++m) {
        conic::Constraint c;
        c.name = "diag[" + std::to_string(m) + "]";
        c.rel = conic::Rel::EQ;
        Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(M + 1, M + 1);
        E(m, m) = 1.0;
        c.matrix_terms.emplace_back(uvar, std::move(E));
        c.rhs = 1.0;
        p.constraints.push_back(std::move(c));
    }

    // combined gains stay ascending along the decode sequence (hard), so the
    // fixed order remains the one the gains imply
    const auto seq = in.order.sequence();
    for (int i = 0; i + 1 < K; ++i) {
        const int a = seq[static_cast<std::size_t>(i)];
        const int b = seq[static_cast<std::size_t>(i + 1)];
        conic::Constraint c;
        c.name = "order" + tag(a, b);
        c.rel = conic::Rel::LE;
        c.matrix_terms.emplace_back(
            uvar, Eigen::MatrixXcd(build_gain_matrix(in.channels, a) -
                                   build_gain_matrix(in.channels, b)));
        c.rhs = in.channels.h_d[static_cast<std::size_t>(b)].squaredNorm() -
                in.channels.h_d[static_cast<std::size_t>(a)].squaredNorm();
        p.constraints.push_back(std::move(c));
    }

    // QoS: own power >= gamma (interference + A_k)
    for (int k = 0; k < K; ++k) {
        Eigen::MatrixXcd C = S(k, k);
        double rhs = -q2(k, k) + in.params.gamma[k] * A[k];
        for (int j : later(k)) {
            C -= in.params.gamma[k] * S(j, k);
            rhs += in.params.gamma[k] * q2(j, k);
        }
        conic::Constraint c;
        c.name = "qos" + tag(k);
        c.rel = conic::Rel::GE;
        c.matrix_terms.emplace_back(uvar, std::move(C));
        c.rhs = rhs;
        push_with_slack(p, std::move(c), slack);
    }

    // harvesting: total received power >= e / (eta (1 - rho)) - sigma^2
    for (int k = 0; k < K; ++k) {
        Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(M + 1, M + 1);
        double rhs = in.params.e_req[k] / (in.params.eta[k] * (1.0 - in.split.rho[k])) -
                     in.params.sigma2[k];
        for (int j = 0; j < K; ++j) {
            C += S(j, k);
            rhs -= q2(j, k);
        }
        conic::Constraint c;
        c.name = "energy" + tag(k);
        c.rel = conic::Rel::GE;
        c.matrix_terms.emplace_back(uvar, std::move(C));
        c.rhs = rhs;
        push_with_slack(p, std::move(c), slack);
    }

    // decode condition per non-vacuous pair, same lowering as the covariance
    // program: concave lns linearized at the incumbent, convex -lns through
    // secant epigraphs with trust rows
    for (int k = 0; k < K; ++k) {
        for (int kb = 0; kb < K; ++kb) {
            if (k == kb || ord[static_cast<std::size_t>(k)] > ord[static_cast<std::size_t>(kb)])
                continue;
            {
                // covariance analogue of sic_pair_vacuous
                const auto& hb = h_inc[static_cast<std::size_t>(kb)];
                const auto& Wk = in.W[static_cast<std::size_t>(k)];
                const double cross = std::real(cxd(hb.adjoint() * Wk * hb));
                if (cross <= kVacuousPairPowerRatio * hb.squaredNorm() * std::real(Wk.trace()))
                    continue;
            }

            const auto js = later(k);
            const double c1 = anchor_power(k, k);
            if (!(c1 > 0.0))
                throw std::invalid_argument("build_p51: zero own-signal anchor" + tag(k));
            double t20 = A[k];
            double c2 = A[kb];
            double q2sum_k = 0.0, q2sum_kb = 0.0;
            Eigen::MatrixXcd S2 = Eigen::MatrixXcd::Zero(M + 1, M + 1); // receiver k
            Eigen::MatrixXcd S4 = Eigen::MatrixXcd::Zero(M + 1, M + 1); // receiver kb
            for (int j : js) {
                t20 += anchor_power(j, k);
                c2 += anchor_power(j, kb);
                q2sum_k += q2(j, k);
                q2sum_kb += q2(j, kb);
                S2 += S(j, k);
                S4 += S(j, kb);
            }
            const double t30 = anchor_power(k, kb);

            const auto m2 = sca::neg_log_majorant(t20, omega);
            const auto m3 = sca::neg_log_majorant(t30, omega);
            const double inf = std::numeric_limits<double>::infinity();
            const int u1 = p.add_scalar_var(-std::log(m2.hi), inf, "u1" + tag(k, kb));
            const int u2 = p.add_scalar_var(-std::log(m3.hi), inf, "u2" + tag(k, kb));

            {
                conic::Constraint c;
                c.name = "sic" + tag(k, kb);
                c.rel = conic::Rel::LE;
                c.matrix_terms.emplace_back(uvar, Eigen::MatrixXcd(S(k, k) / c1 + S4 / c2));
                c.scalar_terms.emplace_back(u1, 1.0);
                c.scalar_terms.emplace_back(u2, 1.0);
                c.rhs = 2.0 - std::log(c1) - std::log(c2) - q2(k, k) / c1 -
                        (q2sum_kb + A[kb]) / c2;
                push_with_slack(p, std::move(c), slack);
            }

            for (const auto& chord : {m2.left, m2.right}) {
                conic::Constraint c;
                c.name = "u1_chord" + tag(k, kb);
                c.rel = conic::Rel::GE;
                c.scalar_terms.emplace_back(u1, 1.0);
                c.matrix_terms.emplace_back(uvar, Eigen::MatrixXcd(-chord.slope * S2));
                c.rhs = chord.offset + chord.slope * (q2sum_k + A[k]);
                p.constraints.push_back(std::move(c));
            }
            for (const auto& chord : {m3.left, m3.right}) {
                conic::Constraint c;
                c.name = "u2_chord" + tag(k, kb);
                c.rel = conic::Rel::GE;
                c.scalar_terms.emplace_back(u2, 1.0);
                c.matrix_terms.emplace_back(uvar, Eigen::MatrixXcd(-chord.slope * S(k, kb)));
                c.rhs = chord.offset + chord.slope * q2(k, kb);
                p.constraints.push_back(std::move(c));
            }

            auto trust = [&](conic::Rel rel, const Eigen::MatrixXcd& C, double rhs,
                             const char* which) {
                conic::Constraint c;
                c.name = std::string(which) + tag(k, kb);
                c.rel = rel;
                c.matrix_terms.emplace_back(uvar, C);
                c.rhs = rhs;
                p.constraints.push_back(std::move(c));
            };
            trust(conic::Rel::GE, S2, m2.lo - A[k] - q2sum_k, "trust2_lo");
            trust(conic::Rel::LE, S2, m2.hi - A[k] - q2sum_k, "trust2_hi");
            trust(conic::Rel::GE, S(k, kb), m3.lo - q2(k, kb), "trust3_lo");
            trust(conic::Rel::LE, S(k, kb), m3.hi - q2(k, kb), "trust3_hi");
        }
    }
    return p;
}

PhaseShiftResult solve_phase_shift(const PhaseProblemInput& in, int T, Rng& rng,
                                   const conic::SolverOptions& opt) {
    PhaseShiftResult res;
    res.phase = in.incumbent;

    // Exact margins of a candidate evaluated on the beam covariances,
    // mirroring check_feasibility's normalizations. A candidate is admissible
    // when the gain ordering holds; among those, the deepest continuous
    // margin decides, whether or not it is nonnegative yet, so the phases
    // keep moving while the beam iterate is still short of feasible.
    const int K = in.channels.num_users;
    auto exact_margin = [&](const PhaseShift& ps) {
        const auto h = effective_channels(in.channels, ps);
        Eigen::MatrixXd bp(K, K), scale(K, K);
        for (int k = 0; k < K; ++k) {
            const auto& hk = h[static_cast<std::size_t>(k)];
            for (int j = 0; j < K; ++j) {
                const auto& Wj = in.W[static_cast<std::size_t>(j)];
                bp(k, j) = std::real(cxd(hk.adjoint() * Wj * hk));
                scale(k, j) = hk.squaredNorm() * std::real(Wj.trace());
            }
        }
        // SINR of message k at receiver rx, interference = decoded-later set
        auto dec_sinr = [&](int rx, int k) {
            double interf = 0.0;
            for (int j = 0; j < K; ++j)
                if (in.order.s[static_cast<std::size_t>(j)] >
                    in.order.s[static_cast<std::size_t>(k)])
                    interf += bp(rx, j);
            const double num = in.split.rho[rx] * bp(rx, k);
            return num / (in.split.rho[rx] * (interf + in.params.sigma2[rx]) +
                          in.params.delta2[rx]);
        };
        double scored = std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k)
            scored = std::min(scored,
                              (dec_sinr(k, k) - in.params.gamma[k]) / in.params.gamma[k]);
        for (int k = 0; k < K; ++k)
            for (int kb = 0; kb < K; ++kb) {
                if (k == kb || in.order.s[static_cast<std::size_t>(k)] >
                                   in.order.s[static_cast<std::size_t>(kb)])
                    continue;
                if (bp(kb, k) <= kVacuousPairPowerRatio * scale(kb, k))
                    continue;
                const double own = dec_sinr(k, k);
                const double cross = dec_sinr(kb, k);
                scored = std::min(scored, (cross - own) / std::max(own, 1e-300));
            }
        for (int k = 0; k < K; ++k) {
            const double harvested = in.params.eta[k] * (1.0 - in.split.rho[k]) *
                                     (bp.row(k).sum() + in.params.sigma2[k]);
            scored = std::min(scored, (harvested - in.params.e_req[k]) / in.params.e_req[k]);
        }
        return std::make_pair(order_respected(in.channels, ps, in.order), scored);
    };

    auto sol = conic::solve(build_p51(in), opt);
    switch (sol.status) {
    case conic::SdpStatus::OPTIMAL: res.status = SubStatus::OK; break;
    case conic::SdpStatus::INFEASIBLE: res.status = SubStatus::INFEASIBLE; break;
    case conic::SdpStatus::NUMERICAL_FAILURE: res.status = SubStatus::FAILED; break;
    }
    if (res.status != SubStatus::OK) {
        res.margin = exact_margin(in.incumbent).second;
        res.raw = std::move(sol);
        return res;
    }
    res.slack = sol.scalars[0];

    // candidate pool: incumbent, dominant eigenvector, T random draws
    std::vector<PhaseShift> pool;
    pool.push_back(in.incumbent);
    auto [lead, ratio] = conic::extract_rank_one(sol.X[0]);
    (void)ratio;
    if (lead.size() == in.channels.num_elements + 1)
        pool.push_back(phases_from_vector(lead));
    for (auto& ps : randomization_candidates(sol.X[0], std::max(T, 0), rng))
        pool.push_back(std::move(ps));

    bool any = false;
    std::size_t best = 0;
    double best_margin = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto [ok, margin] = exact_margin(pool[i]);
        if (!ok)
            continue;
        if (!any || margin > best_margin) {
            any = true;
            best = i;
            best_margin = margin;
        }
    }

    if (!any) {
        // not even the incumbent passes the pass/fail checks
        res.status = SubStatus::STALLED;
        res.margin = exact_margin(in.incumbent).second;
    } else {
        res.phase = pool[best];
        res.margin = best_margin;
        res.changed = best != 0;
    }
    res.raw = std::move(sol);
    return res;
}

} // namespace jdbpr
