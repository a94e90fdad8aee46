#include <jdbpr/stage1.hpp>

#include <jdbpr/model.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace jdbpr {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0)
        w += kTwoPi;
    return w;
}
} // namespace

Eigen::MatrixXcd build_gain_matrix(const ChannelSet& ch, int k) {
    const int M = ch.num_elements;
    if (M < 1)
        throw std::invalid_argument("build_gain_matrix: no reflecting elements");
    const Eigen::MatrixXcd a =
        ch.h_r[static_cast<std::size_t>(k)].conjugate().asDiagonal() * ch.G; // M x N
    const Eigen::VectorXcd& hd = ch.h_d[static_cast<std::size_t>(k)];
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(M + 1, M + 1);
    R.topLeftCorner(M, M) = a * a.adjoint();
    R.topRightCorner(M, 1) = a * hd;
    R.bottomLeftCorner(1, M) = (a * hd).adjoint();
    return R;
}

double combined_gain(const ChannelSet& ch, const PhaseShift& ph, int k) {
    const auto ku = static_cast<std::size_t>(k);
    return effective_channel(ch.G, ch.h_r[ku], ch.h_d[ku], ph.theta).squaredNorm();
}

double sum_combined_gain(const ChannelSet& ch, const PhaseShift& ph) {
    double acc = 0.0;
    for (int k = 0; k < ch.num_users; ++k)
        acc += combined_gain(ch, ph, k);
    return acc;
}

conic::SdpSolution solve_p21(const ChannelSet& ch, const conic::SolverOptions& opt) {
    const int M = ch.num_elements;
    if (M < 1)
        throw std::invalid_argument("solve_p21: no reflecting elements");
    conic::HermitianSdpProblem p;
    const int U = p.add_matrix_var(M + 1, "U");
    Eigen::MatrixXcd Rsum = Eigen::MatrixXcd::Zero(M + 1, M + 1);
    for (int k = 0; k < ch.num_users; ++k)
        Rsum += build_gain_matrix(ch, k);
    p.objective.sense = conic::Sense::MAXIMIZE;
    p.objective.matrix_terms.emplace_back(U, Rsum);
    for (int m = 0; m <= M; ++m) {
        conic::Constraint c;
        Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(M + 1, M + 1);
        E(m, m) = 1.0;
        c.matrix_terms.emplace_back(U, std::move(E));
        c.rel = conic::Rel::EQ;
        c.rhs = 1.0;
        c.name = "diag[" + std::to_string(m) + "]";
        p.constraints.push_back(std::move(c));
    }
    return conic::solve(p, opt);
}

double p21_objective_bound(const ChannelSet& ch, const conic::SdpSolution& sol) {
    double direct = 0.0;
    for (const auto& hd : ch.h_d)
        direct += hd.squaredNorm();
    return sol.objective + direct;
}

std::vector<PhaseShift> randomization_candidates(const Eigen::MatrixXcd& U_bar, int T, Rng& rng) {
    const Eigen::Index n = U_bar.rows();
    const Eigen::Index M = n - 1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (U_bar + U_bar.adjoint().eval()));
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        ev[i] = ev[i] < 1e-12 ? 0.0 : ev[i]; // clamp solver noise below zero
    const Eigen::MatrixXcd F = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();

    std::vector<PhaseShift> out;
    out.reserve(static_cast<std::size_t>(T));
    Eigen::VectorXcd r(n);
    for (int t = 0; t < T; ++t) {
        for (Eigen::Index i = 0; i < n; ++i)
            r[i] = rng.cgaussian();
        const Eigen::VectorXcd u = F * r;
        const cxd ref = std::abs(u[M]) > 0.0 ? u[M] : cxd(1.0, 0.0);
        PhaseShift ph;
        ph.theta.resize(M);
        // u approximates conj(e^{j theta}) up to the global phase of the last
        // entry, so the angle comes out negated.
        for (Eigen::Index m = 0; m < M; ++m)
            ph.theta[m] = wrap_angle(-std::arg(u[m] / ref));
        out.push_back(std::move(ph));
    }
    return out;
}

PhaseShift gaussian_randomization(const Eigen::MatrixXcd& U_bar, const ChannelSet& ch, int T,
                                  Rng& rng) {
    const auto candidates = randomization_candidates(U_bar, T, rng);
    const PhaseShift* best = nullptr;
    double best_gain = -1.0;
    for (const auto& ph : candidates) {
        const double g = sum_combined_gain(ch, ph);
        if (g > best_gain) {
            best_gain = g;
            best = &ph;
        }
    }
    return *best;
}

DecodingOrder order_from_gains(const ChannelSet& ch, const PhaseShift& ph) {
    const int K = ch.num_users;
    std::vector<int> idx(static_cast<std::size_t>(K));
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> gain(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
        gain[static_cast<std::size_t>(k)] = combined_gain(ch, ph, k);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return gain[static_cast<std::size_t>(a)] < gain[static_cast<std::size_t>(b)];
    });
    DecodingOrder order;
    order.s.assign(static_cast<std::size_t>(K), 0);
    for (int pos = 0; pos < K; ++pos)
        order.s[static_cast<std::size_t>(idx[static_cast<std::size_t>(pos)])] = pos + 1;
    return order;
}

bool order_respected(const ChannelSet& ch, const PhaseShift& ph, const DecodingOrder& order,
                     double rel_tol) {
    const auto seq = order.sequence();
    double prev = -std::numeric_limits<double>::infinity();
    for (int k : seq) {
        const double g = combined_gain(ch, ph, k);
        if (g < prev * (1.0 - rel_tol) - 1e-300)
            return false;
        prev = g;
    }
    return true;
}

Stage1Result run_stage1(const SystemConfig& cfg, const ChannelSet& ch, Rng& rng,
                        const conic::SolverOptions& opt) {
    Stage1Result res;
    if (ch.num_elements == 0) {
        res.phases.theta.resize(0);
        res.order = order_from_gains(ch, res.phases);
        res.sdp_objective = res.randomized_objective = sum_combined_gain(ch, res.phases);
        return res;
    }
    conic::SdpSolution sol = solve_p21(ch, opt);
    res.status = sol.status;
    Eigen::MatrixXcd U;
    if (sol.status == conic::SdpStatus::OPTIMAL) {
        U = sol.X[0];
        res.sdp_objective = p21_objective_bound(ch, sol);
    } else {
        // Unit-diagonal identity is always feasible; randomization still yields
        // a usable phase configuration.
        U = Eigen::MatrixXcd::Identity(ch.num_elements + 1, ch.num_elements + 1);
        res.sdp_objective = std::numeric_limits<double>::quiet_NaN();
    }
    res.U_bar = U;
    res.phases = gaussian_randomization(U, ch, std::max(1, cfg.randomization_count), rng);
    res.randomized_objective = sum_combined_gain(ch, res.phases);
    res.order = order_from_gains(ch, res.phases);
    return res;
}

} // namespace jdbpr
