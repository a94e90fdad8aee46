#include <jdbpr/jdbpr.hpp>

#include <jdbpr/beamforming.hpp>
#include <jdbpr/channel.hpp>
#include <jdbpr/model.hpp>
#include <jdbpr/phase_shift.hpp>
#include <jdbpr/power_split.hpp>
#include <jdbpr/rng.hpp>
#include <jdbpr/stage1.hpp>
#include <jdbpr/units.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace jdbpr {

namespace {

void validate(const SystemConfig& cfg, const ChannelSet& ch) {
    if (ch.num_users != cfg.num_users || ch.num_antennas != cfg.num_antennas ||
        ch.num_elements != cfg.num_elements)
        throw std::invalid_argument("run_stage2: config/channel dimension mismatch");
    if (cfg.num_users <= 0 || cfg.num_antennas <= 0)
        throw std::invalid_argument("run_stage2: empty system");
}

// Turn the converged covariances into concrete feasible beams. The SDP
// optimum is not always rank-one (the harvesting rows reward spreading power
// across directions), so a direction-fixed power LP prices candidate
// direction sets: the dominant eigenvectors seed a shrinking-radius local
// search inside each covariance's column space, with a splitting-ratio
// re-center after every radius level. Flat Gaussian draws from the
// covariances are almost never feasible here, which is why the search stays
// local to the incumbent.
struct FinalBeams {
    bool ok = false;
    std::vector<Eigen::VectorXcd> w;
    PowerSplit split;
    double power = 0.0;
};

FinalBeams finalize_beams(const std::vector<Eigen::VectorXcd>& h,
                          const std::vector<Eigen::MatrixXcd>& W,
                          const PowerSplit& split, const DecodingOrder& order,
                          const UserParams& params, Rng& rng,
                          const conic::SolverOptions& sopt) {
    FinalBeams out;
    const std::size_t K = h.size();
    if (W.size() != K || K == 0)
        return out;

    std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>> es(K);
    for (std::size_t k = 0; k < K; ++k) {
        es[k].compute(W[k]);
        if (es[k].info() != Eigen::Success)
            return out;
    }
    auto noise_dir = [&](std::size_t k) {
        const auto& lam = es[k].eigenvalues();
        const auto& V = es[k].eigenvectors();
        Eigen::VectorXcd n = Eigen::VectorXcd::Zero(V.rows());
        for (Eigen::Index i = 0; i < lam.size(); ++i)
            if (lam[i] > 0.0)
                n += std::sqrt(lam[i]) * rng.cgaussian() * V.col(i);
        return n;
    };

    std::vector<Eigen::VectorXcd> dom(K);
    for (std::size_t k = 0; k < K; ++k)
        dom[k] = es[k].eigenvectors().col(es[k].eigenvectors().cols() - 1);

    const Eigen::Index N = h[0].size();

    // The harvesting rows see only the sum covariance, so the leading
    // eigenvectors of the total span the directions worth transmitting in.
    // When that optimum is rank-two or higher no single per-user eigenvector
    // captures it; projections onto the span recover most of the value.
    Eigen::MatrixXcd span;
    {
        Eigen::MatrixXcd Wtot = Eigen::MatrixXcd::Zero(N, N);
        for (const auto& Wk : W)
            Wtot += Wk;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> est(Wtot);
        if (est.info() == Eigen::Success && est.eigenvalues()[N - 1] > 0.0) {
            const auto& lam = est.eigenvalues();
            Eigen::Index r = 0;
            while (r < std::min<Eigen::Index>(N, 4) && lam[N - 1 - r] > 1e-8 * lam[N - 1])
                ++r;
            span.resize(N, r);
            for (Eigen::Index i = 0; i < r; ++i)
                span.col(i) = est.eigenvectors().col(N - 1 - i);
        }
    }

    // Seed pool. The dominant eigenvectors price best when they are feasible,
    // but their feasibility is knife-edge (the QoS rows couple all users), so
    // the pool adds span projections, biased mixes inside each covariance's
    // column space, and the equal-gain inversion direction, which satisfies
    // the QoS/SIC system by construction whenever the channel matrix has full
    // row rank.
    std::vector<std::vector<Eigen::VectorXcd>> seeds;
    seeds.push_back(dom);
    if (span.cols() > 0) {
        std::vector<Eigen::VectorXcd> mrt(K), mix(K);
        for (std::size_t k = 0; k < K; ++k) {
            const Eigen::VectorXcd pr = span * (span.adjoint() * h[k]);
            mrt[k] = pr.norm() > 0.0 ? pr.normalized() : dom[k];
            mix[k] = (dom[k] + mrt[k]).normalized();
        }
        seeds.push_back(mrt);
        seeds.push_back(std::move(mix));
        seeds.emplace_back(K, span.col(0));
    }
    if (static_cast<Eigen::Index>(K) <= N) {
        Eigen::MatrixXcd Hm(K, N);
        for (std::size_t k = 0; k < K; ++k)
            Hm.row(static_cast<Eigen::Index>(k)) = h[k].adjoint();
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(Hm);
        if (cod.rank() == static_cast<Eigen::Index>(K)) {
            const Eigen::VectorXcd inv =
                cod.solve(Eigen::VectorXcd::Constant(static_cast<Eigen::Index>(K), 1.0));
            if (inv.allFinite() && inv.norm() > 0.0)
                seeds.emplace_back(K, inv.normalized());
        }
    }
    for (int r = 0; r < 12; ++r) {
        std::vector<Eigen::VectorXcd> d(K);
        for (std::size_t k = 0; k < K; ++k) {
            const double scale = std::sqrt(std::max(std::real(W[k].trace()), 1e-300));
            d[k] = (dom[k] + 0.35 * noise_dir(k) / scale).normalized();
        }
        seeds.push_back(std::move(d));
    }
    for (int r = 0; r < 8; ++r) {
        std::vector<Eigen::VectorXcd> d(K);
        for (std::size_t k = 0; k < K; ++k) {
            d[k] = noise_dir(k);
            if (!(d[k].norm() > 0.0))
                d[k] = dom[k];
        }
        seeds.push_back(std::move(d));
    }

    PowerSplit half;
    half.rho = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(K), 0.5);
    std::vector<Eigen::VectorXcd> best;
    PowerSplit cur = split;
    double best_power = std::numeric_limits<double>::infinity();
    const std::array<const PowerSplit*, 2> starts{&split, &half};
    for (const auto& d : seeds) {
        for (const PowerSplit* sp : starts) {
            auto fit = refit_powers(h, d, *sp, order, params, sopt);
            if (fit.status == SubStatus::OK && fit.objective_w < best_power) {
                best_power = fit.objective_w;
                best = d;
                cur = *sp;
            }
        }
    }
    if (best.empty())
        return out;

    auto assemble = [&](const std::vector<Eigen::VectorXcd>& d, const Eigen::VectorXd& p) {
        std::vector<Eigen::VectorXcd> w(K);
        for (std::size_t k = 0; k < K; ++k)
            w[k] = std::sqrt(p[static_cast<Eigen::Index>(k)]) * d[k] / d[k].norm();
        return w;
    };

    for (double sig : {0.25, 0.1, 0.05, 0.02}) {
        for (int t = 0; t < 16; ++t) {
            std::vector<Eigen::VectorXcd> d(K);
            for (std::size_t k = 0; k < K; ++k) {
                const double scale = std::sqrt(std::max(std::real(W[k].trace()), 1e-300));
                Eigen::VectorXcd n = noise_dir(k);
                if (t % 2 == 1 && span.cols() > 0)
                    n = span * (span.adjoint() * n);
                d[k] = (best[k] + sig * n / scale).normalized();
            }
            auto fit = refit_powers(h, d, cur, order, params, sopt);
            if (fit.status == SubStatus::OK && fit.objective_w < best_power) {
                best_power = fit.objective_w;
                best = std::move(d);
            }
        }
        auto fit = refit_powers(h, best, cur, order, params, sopt);
        if (fit.status != SubStatus::OK)
            continue;
        auto ps = solve_power_split(
            make_power_split_input(h, assemble(best, fit.p), cur, order, params), sopt);
        if (ps.status == SubStatus::OK) {
            auto refit = refit_powers(h, best, ps.split, order, params, sopt);
            if (refit.status == SubStatus::OK && refit.objective_w < best_power) {
                cur = ps.split;
                best_power = refit.objective_w;
            }
        }
    }

    // Per-user sweep over the leading two-dimensional face of the total
    // covariance: when the relaxed optimum is rank-two the best unit-rank
    // compromise for each user lies in that plane, and a coarse grid with the
    // power program re-fit per point lands on it reliably.
    if (span.cols() >= 2) {
        constexpr double kQuarterPi = 0.78539816339744830962;
        for (int round = 0; round < 2; ++round) {
            bool improved = false;
            for (std::size_t k = 0; k < K; ++k) {
                auto d = best;
                for (double t : {0.0, 0.5 * kQuarterPi, kQuarterPi, 1.5 * kQuarterPi,
                                 2.0 * kQuarterPi}) {
                    for (double phi : {0.0, 2.0 * kQuarterPi, 4.0 * kQuarterPi,
                                       6.0 * kQuarterPi}) {
                        d[k] = std::cos(t) * span.col(0) +
                               std::sin(t) * std::polar(1.0, phi) * span.col(1);
                        auto fit = refit_powers(h, d, cur, order, params, sopt);
                        if (fit.status == SubStatus::OK && fit.objective_w < best_power) {
                            best_power = fit.objective_w;
                            best[k] = d[k];
                            improved = true;
                        }
                        if (t == 0.0)
                            break; // the second column does not enter at t = 0
                    }
                }
            }
            if (!improved)
                break;
        }
        auto fit = refit_powers(h, best, cur, order, params, sopt);
        if (fit.status == SubStatus::OK) {
            auto ps = solve_power_split(
                make_power_split_input(h, assemble(best, fit.p), cur, order, params), sopt);
            if (ps.status == SubStatus::OK) {
                auto refit = refit_powers(h, best, ps.split, order, params, sopt);
                if (refit.status == SubStatus::OK && refit.objective_w < best_power) {
                    cur = ps.split;
                    best_power = refit.objective_w;
                }
            }
        }
    }

    auto fit = refit_powers(h, best, cur, order, params, sopt);
    if (fit.status != SubStatus::OK)
        return out;
    out.ok = true;
    out.split = cur;
    out.w = assemble(best, fit.p);
    out.power = fit.objective_w;
    return out;
}

} // namespace

Solution run_stage2(const SystemConfig& cfg, const ChannelSet& ch, const DecodingOrder& order,
                    const PhaseShift& theta0, std::uint64_t draw, const JdbprOptions& opts,
                    const Stage2Flags& flags) {
    validate(cfg, ch);
    const auto params = expand_params(cfg);
    const int K = cfg.num_users;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    Solution sol;
    sol.order = order;
    sol.phase = theta0;
    sol.objective_w = nan;

    PowerSplit split;
    split.rho = Eigen::VectorXd::Constant(K, 0.5);
    PhaseShift theta = theta0;
    auto h = effective_channels(ch, theta);
    std::vector<Eigen::MatrixXcd> W_prev = initial_covariances(h, split, order, params);
    std::vector<Eigen::VectorXcd> w;

    double prev_obj = std::numeric_limits<double>::infinity();
    double best_power = std::numeric_limits<double>::infinity();
    bool stopped_by_rule = false;

    for (int r = 1; r <= flags.max_cycles; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        IterationRecord rec;
        rec.iteration = r;
        rec.power_split = SubStatus::SKIPPED;
        rec.phase = SubStatus::SKIPPED;

        // The beam and split blocks are cheap relative to a full cycle and
        // their coupling converges slowly one step at a time, so they are
        // alternated until the ratios settle before the phase block runs.
        double obj = prev_obj;
        bool beam_failed = false;
        for (int round = 0; round < flags.pair_rounds; ++round) {
            BeamformingInput bin{h, split, order, W_prev, params, opts.secant_omega};
            auto bf = solve_beamforming(bin, opts.solver);
            if (bf.status != SubStatus::OK) {
                if (round == 0) {
                    rec.beamforming = bf.status;
                    beam_failed = true;
                } // otherwise keep this cycle's earlier successful state
                break;
            }
            rec.beamforming = bf.status;
            if (r > 1 && bf.objective_w > obj * (1.0 + 1e-12)) {
                // program moved uphill (surrogate mismatch after the other
                // blocks moved): retain the incumbent beams
                rec.beamforming = SubStatus::STALLED;
            } else {
                obj = bf.objective_w;
                W_prev = bf.beams.W;
                w = bf.beams.w;
                double worst = 0.0;
                for (double rr : bf.rank_ratios)
                    worst = std::max(worst, rr);
                rec.max_rank_ratio = worst;
            }

            auto ps = solve_power_split(make_power_split_input(h, W_prev, split, order, params),
                                        opts.solver);
            rec.power_split = ps.status;
            const double moved = (ps.split.rho - split.rho).cwiseAbs().maxCoeff();
            split = ps.split;
            if (ps.status != SubStatus::OK || moved < 1e-3)
                break;
        }
        if (beam_failed && r == 1) {
            rec.objective_w = prev_obj;
            sol.trace.push_back(rec);
            sol.status = SolveStatus::SCENARIO_INFEASIBLE;
            return sol;
        }
        if (beam_failed) {
            rec.objective_w = prev_obj;
            sol.trace.push_back(rec);
            break; // keep the best point found so far
        }
        rec.objective_w = obj;

        if (flags.update_phases && ch.num_elements > 0) {
            Rng prng(substream_seed(cfg.rng_seed, "phase-rand", draw, static_cast<std::uint64_t>(r)));
            PhaseProblemInput pin{ch, W_prev, split, order, params, theta, opts.secant_omega};
            auto ph = solve_phase_shift(pin, cfg.randomization_count, prng, opts.solver);
            rec.phase = ph.status;
            if (ph.changed) {
                theta = ph.phase;
                h = effective_channels(ch, theta);
            }
        }

        const auto rep = check_feasibility(h, w, split.rho, theta.theta, order, params);
        rec.min_margin = rep.min_margin;
        rec.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               t0)
                         .count();
        sol.trace.push_back(rec);

        if (rep.feasible && total_power(w) < best_power) {
            best_power = total_power(w);
            sol.feasible = true;
            sol.objective_w = best_power;
            sol.beams.w = w;
            sol.beams.W = W_prev;
            sol.split = split;
            sol.phase = theta;
            sol.report = rep;
        }

        if (r > 1 && prev_obj - obj < cfg.convergence_eps * std::max(prev_obj, 1e-300)) {
            stopped_by_rule = true;
            prev_obj = obj;
            break;
        }
        prev_obj = obj;
    }

    if (!W_prev.empty()) {
        Rng brng(substream_seed(cfg.rng_seed, "beam-rand", draw));
        auto fin = finalize_beams(h, W_prev, split, order, params, brng, opts.solver);
        if (fin.ok) {
            const auto rep =
                check_feasibility(h, fin.w, fin.split.rho, theta.theta, order, params);
            if (rep.feasible && fin.power < best_power) {
                best_power = fin.power;
                sol.feasible = true;
                sol.objective_w = fin.power;
                sol.beams.w = fin.w;
                sol.beams.W.resize(fin.w.size());
                for (std::size_t k = 0; k < fin.w.size(); ++k)
                    sol.beams.W[k] = fin.w[k] * fin.w[k].adjoint();
                sol.split = fin.split;
                sol.phase = theta;
                sol.report = rep;
            }
        }
    }

    if (!sol.feasible)
        sol.status = SolveStatus::SCENARIO_INFEASIBLE;
    else if (stopped_by_rule || static_cast<int>(sol.trace.size()) < flags.max_cycles ||
             flags.max_cycles == 1)
        sol.status = SolveStatus::CONVERGED;
    else
        sol.status = SolveStatus::MAX_ITERS_EXCEEDED;
    return sol;
}

Solution run_jdbpr(const SystemConfig& cfg, const ChannelSet& ch, std::uint64_t draw,
                   const JdbprOptions& opts) {
    Rng s1rng(substream_seed(cfg.rng_seed, "stage1", draw));
    const auto s1 = run_stage1(cfg, ch, s1rng, opts.solver);
    Stage2Flags flags;
    flags.max_cycles = cfg.max_iters;
    flags.update_phases = ch.num_elements > 0;
    return run_stage2(cfg, ch, s1.order, s1.phases, draw, opts, flags);
}

double complexity_estimate(const SystemConfig& cfg, int iterations) {
    const double beam = cfg.num_users * std::pow(cfg.num_antennas, 3.5);
    const double phase = std::pow(cfg.num_elements + 1, 3.5);
    return iterations * (beam + phase);
}

void write_trace_csv(std::ostream& os, const IterationTrace& trace) {
    os << "iter,objective_w,objective_dbm,beamforming,power_split,phase,min_margin,"
          "max_rank_ratio,millis\n";
    const auto prec = os.precision(12);
    for (const auto& r : trace) {
        os << r.iteration << ',' << r.objective_w << ',';
        if (r.objective_w > 0.0 && std::isfinite(r.objective_w))
            os << watts_to_dbm(r.objective_w);
        os << ',' << to_string(r.beamforming) << ',' << to_string(r.power_split) << ','
           << to_string(r.phase) << ',' << r.min_margin << ',' << r.max_rank_ratio << ','
           << r.millis << '\n';
    }
    os.precision(prec);
}

} // namespace jdbpr
