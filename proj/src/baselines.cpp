#include <jdbpr/baselines.hpp>

#include <jdbpr/channel.hpp>
#include <jdbpr/model.hpp>
#include <jdbpr/phase_shift.hpp>
#include <jdbpr/power_split.hpp>
#include <jdbpr/rng.hpp>
#include <jdbpr/stage1.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace jdbpr {

const char* to_string(AlgorithmId id) {
    switch (id) {
    case AlgorithmId::JDBPR_OPT: return "JDBPR_OPT";
    case AlgorithmId::EX_JBPR_OPT: return "EX_JBPR_OPT";
    case AlgorithmId::JDBPR_COM: return "JDBPR_COM";
    case AlgorithmId::JDBPR_ZF: return "JDBPR_ZF";
    case AlgorithmId::JDBP_RAN: return "JDBP_RAN";
    case AlgorithmId::NO_IRS: return "NO_IRS";
    }
    return "?";
}

AlgorithmId algorithm_from_string(std::string_view name) {
    std::string up(name);
    std::transform(up.begin(), up.end(), up.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (AlgorithmId id : {AlgorithmId::JDBPR_OPT, AlgorithmId::EX_JBPR_OPT,
                           AlgorithmId::JDBPR_COM, AlgorithmId::JDBPR_ZF, AlgorithmId::JDBP_RAN,
                           AlgorithmId::NO_IRS})
        if (up == to_string(id))
            return id;
    throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

namespace {

Stage1Result shared_stage1(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw,
                           const JdbprOptions& opts) {
    Rng rng(substream_seed(cfg.rng_seed, "stage1", draw));
    return run_stage1(cfg, ch, rng, opts.solver);
}

// Directions from the channel pseudo-inverse plus the decoupled power floor:
// with zero cross terms the QoS and harvesting constraints bind per user, so
// p_k = max(gamma_k A_k, e_k/(eta_k (1 - rho_k)) - sigma_k^2) / g_k is the
// exact minimum-power allocation for the given splits.
std::vector<Eigen::VectorXcd> zf_beams(const std::vector<Eigen::VectorXcd>& h,
                                       const PowerSplit& split, const UserParams& params) {
    const int K = static_cast<int>(h.size());
    const int N = static_cast<int>(h[0].size());
    Eigen::MatrixXcd H(N, K);
    for (int k = 0; k < K; ++k)
        H.col(k) = h[static_cast<std::size_t>(k)];
    const Eigen::MatrixXcd gram = H.adjoint() * H;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
    const auto& ev = es.eigenvalues();
    if (!(ev[0] > 1e-14 * ev[K - 1]) || !(ev[K - 1] > 0.0))
        throw std::runtime_error("run_zf: rank-deficient channel matrix");
    const Eigen::MatrixXcd pinv = H * es.eigenvectors() *
                                  ev.cwiseInverse().asDiagonal() *
                                  es.eigenvectors().adjoint();

    std::vector<Eigen::VectorXcd> w(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        Eigen::VectorXcd dir = pinv.col(k).normalized();
        const double g = beam_power(h[static_cast<std::size_t>(k)], dir);
        const double A = params.sigma2[k] + params.delta2[k] / split.rho[k];
        const double floor_qos = params.gamma[k] * A;
        const double floor_eh =
            params.e_req[k] / (params.eta[k] * (1.0 - split.rho[k])) - params.sigma2[k];
        const double p = std::max(floor_qos, floor_eh) / g;
        w[static_cast<std::size_t>(k)] = std::sqrt(p) * dir;
    }
    return w;
}

} // namespace

Solution run_exhaustive_order(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw,
                              const JdbprOptions& opts) {
    if (cfg.num_users > 6)
        throw std::invalid_argument("run_exhaustive_order: factorial search capped at 6 users");
    const auto s1 = shared_stage1(cfg, ch, draw, opts);
    Stage2Flags flags;
    flags.max_cycles = cfg.max_iters;
    flags.update_phases = ch.num_elements > 0;

    std::vector<int> positions(static_cast<std::size_t>(cfg.num_users));
    std::iota(positions.begin(), positions.end(), 1);
    Solution best;
    bool first = true;
    do {
        DecodingOrder order{positions};
        auto sol = run_stage2(cfg, ch, order, s1.phases, draw, opts, flags);
        const bool better =
            sol.feasible && (!best.feasible || sol.objective_w < best.objective_w);
        if (first || better)
            best = std::move(sol);
        first = false;
    } while (std::next_permutation(positions.begin(), positions.end()));
    return best;
}

Solution run_non_alternating(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw,
                             const JdbprOptions& opts) {
    const auto s1 = shared_stage1(cfg, ch, draw, opts);
    Stage2Flags flags;
    flags.max_cycles = 1;
    flags.pair_rounds = 1;
    flags.update_phases = ch.num_elements > 0;
    return run_stage2(cfg, ch, s1.order, s1.phases, draw, opts, flags);
}

Solution run_zf(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw,
                const JdbprOptions& opts) {
    if (cfg.num_users > cfg.num_antennas)
        throw std::invalid_argument("run_zf: zero-forcing needs K <= N");
    const auto params = expand_params(cfg);
    const auto s1 = shared_stage1(cfg, ch, draw, opts);

    Solution sol;
    sol.order = s1.order;
    sol.phase = s1.phases;
    sol.objective_w = std::numeric_limits<double>::quiet_NaN();

    PowerSplit split;
    split.rho = Eigen::VectorXd::Constant(cfg.num_users, 0.5);
    PhaseShift theta = s1.phases;
    double prev_obj = std::numeric_limits<double>::infinity();
    double best_power = std::numeric_limits<double>::infinity();
    bool stopped_by_rule = false;

    for (int r = 1; r <= cfg.max_iters; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        IterationRecord rec;
        rec.iteration = r;
        rec.power_split = SubStatus::SKIPPED;
        rec.phase = SubStatus::SKIPPED;

        const auto h = effective_channels(ch, theta);
        std::vector<Eigen::VectorXcd> w;
        try {
            w = zf_beams(h, split, params);
        } catch (const std::exception&) {
            if (r == 1)
                throw;
            rec.beamforming = SubStatus::FAILED;
            sol.trace.push_back(rec);
            break;
        }
        rec.beamforming = SubStatus::OK;
        const double obj = total_power(w);
        rec.objective_w = obj;

        const auto rep = check_feasibility(h, w, split.rho, theta.theta, sol.order, params);
        rec.min_margin = rep.min_margin;
        if (rep.feasible && obj < best_power) {
            best_power = obj;
            sol.feasible = true;
            sol.objective_w = obj;
            sol.beams.w = w;
            sol.beams.W.clear();
            sol.split = split;
            sol.phase = theta;
            sol.report = rep;
        }

        auto ps = solve_power_split(make_power_split_input(h, w, split, sol.order, params),
                                    opts.solver);
        rec.power_split = ps.status;
        split = ps.split;

        if (ch.num_elements > 0) {
            Rng prng(substream_seed(cfg.rng_seed, "phase-rand", draw,
                                    static_cast<std::uint64_t>(r)));
            std::vector<Eigen::MatrixXcd> Wd(w.size());
            for (std::size_t k = 0; k < w.size(); ++k)
                Wd[k] = w[k] * w[k].adjoint();
            PhaseProblemInput pin{ch, Wd, split, sol.order, params, theta, opts.secant_omega};
            auto phr = solve_phase_shift(pin, cfg.randomization_count, prng, opts.solver);
            rec.phase = phr.status;
            if (phr.changed)
                theta = phr.phase;
        }

        rec.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               t0)
                         .count();
        sol.trace.push_back(rec);

        if (r > 1 && prev_obj - obj < cfg.convergence_eps * std::max(prev_obj, 1e-300)) {
            stopped_by_rule = true;
            break;
        }
        prev_obj = obj;
    }

    if (!sol.feasible)
        sol.status = SolveStatus::SCENARIO_INFEASIBLE;
    else if (stopped_by_rule || static_cast<int>(sol.trace.size()) < cfg.max_iters)
        sol.status = SolveStatus::CONVERGED;
    else
        sol.status = SolveStatus::MAX_ITERS_EXCEEDED;
    return sol;
}

Solution run_random_phase(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw,
                          const JdbprOptions& opts) {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    Rng trng(substream_seed(cfg.rng_seed, "ran-theta", draw));
    PhaseShift theta;
    theta.theta.resize(ch.num_elements);
    for (Eigen::Index m = 0; m < theta.theta.size(); ++m)
        theta.theta[m] = trng.uniform(0.0, kTwoPi);

    const DecodingOrder order = order_from_gains(ch, theta);
    Stage2Flags flags;
    flags.max_cycles = cfg.max_iters;
    flags.update_phases = false;
    return run_stage2(cfg, ch, order, theta, draw, opts, flags);
}

Solution run_no_irs(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw,
                    const JdbprOptions& opts) {
    SystemConfig bare = cfg;
    bare.num_elements = 0;
    return run_jdbpr(bare, without_irs(ch), draw, opts);
}

Solution run_algorithm(AlgorithmId id, const SystemConfig& cfg, const ChannelSet& ch,
                       std::uint64_t draw, const JdbprOptions& opts) {
    switch (id) {
    case AlgorithmId::JDBPR_OPT: return run_jdbpr(cfg, ch, draw, opts);
    case AlgorithmId::EX_JBPR_OPT: return run_exhaustive_order(cfg, ch, draw, opts);
    case AlgorithmId::JDBPR_COM: return run_non_alternating(cfg, ch, draw, opts);
    case AlgorithmId::JDBPR_ZF: return run_zf(cfg, ch, draw, opts);
    case AlgorithmId::JDBP_RAN: return run_random_phase(cfg, ch, draw, opts);
    case AlgorithmId::NO_IRS: return run_no_irs(cfg, ch, draw, opts);
    }
    throw std::invalid_argument("run_algorithm: unknown id");
}

} // namespace jdbpr
