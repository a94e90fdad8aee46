#include <jdbpr/conic.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <iostream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace jdbpr::conic {

const char* to_string(SdpStatus s) {
    switch (s) {
    case SdpStatus::OPTIMAL: return "optimal";
    case SdpStatus::INFEASIBLE: return "infeasible";
    case SdpStatus::NUMERICAL_FAILURE: return "numerical_failure";
    }
    return "?";
}

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Complex-to-real embedding. A Hermitian matrix A = Ar + i*Ai maps to the
// symmetric [[Ar, -Ai], [Ai, Ar]]; dividing coefficients by 2 makes embedded
// traces equal complex traces, so right-hand sides carry over unchanged.
// ---------------------------------------------------------------------------

MatrixXd embed_coeff(const MatrixXcd& A) {
    const Eigen::Index n = A.rows();
    MatrixXd out(2 * n, 2 * n);
    const MatrixXd Ar = A.real(), Ai = A.imag();
    out.topLeftCorner(n, n) = Ar;
    out.bottomRightCorner(n, n) = Ar;
    out.topRightCorner(n, n) = -Ai;
    out.bottomLeftCorner(n, n) = Ai;
    return 0.5 * out;
}

MatrixXcd unembed(const MatrixXd& Xt, Eigen::Index n) {
    const MatrixXd P = 0.5 * (Xt.topLeftCorner(n, n) + Xt.bottomRightCorner(n, n));
    const MatrixXd Q = 0.5 * (Xt.bottomLeftCorner(n, n) - Xt.topRightCorner(n, n));
    MatrixXcd X = P.cast<cxd>() + cxd(0.0, 1.0) * Q.cast<cxd>();
    return 0.5 * (X + X.adjoint().eval());
}

// ---------------------------------------------------------------------------
// Internal standard form: min <c,x>, A x = b, x in (PSD blocks) x R+^q.
// ---------------------------------------------------------------------------

struct RowData {
    std::vector<std::pair<int, MatrixXd>> mats; // (block index, symmetric coeff)
    std::vector<std::pair<int, double>> lp;     // (lp index, coeff)
    double b = 0.0;
};

struct StdForm {
    std::vector<int> bdim;
    int q = 0;
    std::vector<RowData> rows;
    std::vector<std::pair<int, MatrixXd>> c_mats;
    std::vector<std::pair<int, double>> c_lp;
    bool maximize = false;
    bool feasibility = false;
    // recovery maps
    std::vector<int> var_block;    // public matrix var -> block
    std::vector<int> scalar_lp;    // public scalar var -> lp index
    std::vector<double> scalar_lo; // lower bounds to add back
    double eps_shift = 0.0;        // PSD relaxation used on this attempt
};

void validate(const HermitianSdpProblem& p) {
    for (const auto& v : p.matrix_vars)
        if (v.dim < 1)
            throw std::invalid_argument("conic: matrix variable dimension must be >= 1");
    for (const auto& v : p.scalar_vars) {
        if (!std::isfinite(v.lower))
            throw std::invalid_argument("conic: scalar lower bound must be finite");
        if (v.upper < v.lower)
            throw std::invalid_argument("conic: scalar bounds out of order");
    }
    auto check_terms = [&](const std::vector<std::pair<int, MatrixXcd>>& mats,
                           const std::vector<std::pair<int, double>>& lps, const char* where) {
        for (const auto& [idx, A] : mats) {
            if (idx < 0 || idx >= static_cast<int>(p.matrix_vars.size()))
                throw std::invalid_argument(std::string("conic: matrix index out of range in ") +
                                            where);
            const int d = p.matrix_vars[static_cast<std::size_t>(idx)].dim;
            if (A.rows() != d || A.cols() != d)
                throw std::invalid_argument(std::string("conic: coefficient shape mismatch in ") +
                                            where);
            const double scale = 1.0 + A.cwiseAbs().maxCoeff();
            if ((A - A.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
                throw std::invalid_argument(std::string("conic: non-Hermitian coefficient in ") +
                                            where);
        }
        for (const auto& [idx, c] : lps) {
            if (idx < 0 || idx >= static_cast<int>(p.scalar_vars.size()))
                throw std::invalid_argument(std::string("conic: scalar index out of range in ") +
                                            where);
            if (!std::isfinite(c))
                throw std::invalid_argument(std::string("conic: non-finite coefficient in ") +
                                            where);
        }
    };
    for (const auto& c : p.constraints) {
        check_terms(c.matrix_terms, c.scalar_terms, "constraint");
        if (!std::isfinite(c.rhs))
            throw std::invalid_argument("conic: non-finite right-hand side");
    }
    check_terms(p.objective.matrix_terms, p.objective.scalar_terms, "objective");
    for (const auto& h : p.hyperbolics) {
        if (h.a < 0 || h.a >= static_cast<int>(p.scalar_vars.size()) || h.b < 0 ||
            h.b >= static_cast<int>(p.scalar_vars.size()))
            throw std::invalid_argument("conic: hyperbolic scalar index out of range");
        if (!(h.bound > 0.0) || !std::isfinite(h.bound))
            throw std::invalid_argument("conic: hyperbolic bound must be positive");
    }
}

StdForm standardize(const HermitianSdpProblem& p, double eps_shift) {
    StdForm f;
    f.eps_shift = eps_shift;
    f.maximize = p.objective.sense == Sense::MAXIMIZE;
    f.feasibility = p.objective.sense == Sense::FEASIBILITY;

    for (const auto& v : p.matrix_vars) {
        f.var_block.push_back(static_cast<int>(f.bdim.size()));
        f.bdim.push_back(2 * v.dim);
    }

    // One nonnegative lp var per scalar (shifted by its lower bound).
    for (const auto& v : p.scalar_vars) {
        f.scalar_lp.push_back(f.q++);
        f.scalar_lo.push_back(v.lower);
    }

    auto lower_terms = [&](const std::vector<std::pair<int, MatrixXcd>>& mats,
                           const std::vector<std::pair<int, double>>& lps, RowData& row,
                           double& shift) {
        for (const auto& [idx, A] : mats) {
            row.mats.emplace_back(f.var_block[static_cast<std::size_t>(idx)], embed_coeff(A));
            shift -= eps_shift * A.real().trace(); // X = X' - eps*I relaxation
        }
        for (const auto& [idx, c] : lps) {
            row.lp.emplace_back(f.scalar_lp[static_cast<std::size_t>(idx)], c);
            shift += c * f.scalar_lo[static_cast<std::size_t>(idx)];
        }
    };

    for (const auto& c : p.constraints) {
        RowData row;
        double shift = 0.0; // moved to the right-hand side
        lower_terms(c.matrix_terms, c.scalar_terms, row, shift);
        row.b = c.rhs - shift;
        if (c.rel == Rel::LE)
            row.lp.emplace_back(f.q++, 1.0);
        else if (c.rel == Rel::GE)
            row.lp.emplace_back(f.q++, -1.0);
        f.rows.push_back(std::move(row));
    }

    // Finite upper bounds become u + v = hi - lo.
    for (std::size_t j = 0; j < p.scalar_vars.size(); ++j) {
        const auto& v = p.scalar_vars[j];
        if (std::isfinite(v.upper)) {
            RowData row;
            row.lp.emplace_back(f.scalar_lp[j], 1.0);
            row.lp.emplace_back(f.q++, 1.0);
            row.b = v.upper - v.lower;
            f.rows.push_back(std::move(row));
        }
    }

    // Hyperbolic t_a * t_b >= bound: 2x2 PSD block diag-linked to the scalars,
    // off-diagonal pinned to sqrt(bound).
    for (const auto& h : p.hyperbolics) {
        const int blk = static_cast<int>(f.bdim.size());
        f.bdim.push_back(2);
        auto link = [&](int entry_row, int entry_col, double rhs,
                        int lp_idx, double lp_coef, double lp_shift) {
            RowData row;
            MatrixXd E = MatrixXd::Zero(2, 2);
            if (entry_row == entry_col)
                E(entry_row, entry_col) = 1.0;
            else {
                E(entry_row, entry_col) = 0.5;
                E(entry_col, entry_row) = 0.5;
            }
            row.mats.emplace_back(blk, E);
            double shift = -eps_shift * E.trace();
            if (lp_idx >= 0) {
                row.lp.emplace_back(lp_idx, lp_coef);
                shift += lp_coef * lp_shift;
            }
            row.b = rhs - shift;
            f.rows.push_back(std::move(row));
        };
        link(0, 0, 0.0, f.scalar_lp[static_cast<std::size_t>(h.a)], -1.0,
             f.scalar_lo[static_cast<std::size_t>(h.a)]);
        link(1, 1, 0.0, f.scalar_lp[static_cast<std::size_t>(h.b)], -1.0,
             f.scalar_lo[static_cast<std::size_t>(h.b)]);
        link(0, 1, std::sqrt(h.bound), -1, 0.0, 0.0);
    }

    if (!f.feasibility) {
        const double sgn = f.maximize ? -1.0 : 1.0;
        std::vector<MatrixXd> acc(f.bdim.size());
        for (const auto& [idx, A] : p.objective.matrix_terms) {
            const int blk = f.var_block[static_cast<std::size_t>(idx)];
            MatrixXd E = sgn * embed_coeff(A);
            bool merged = false;
            for (auto& [bi, B] : f.c_mats)
                if (bi == blk) {
                    B += E;
                    merged = true;
                    break;
                }
            if (!merged)
                f.c_mats.emplace_back(blk, std::move(E));
        }
        for (const auto& [idx, c] : p.objective.scalar_terms)
            f.c_lp.emplace_back(f.scalar_lp[static_cast<std::size_t>(idx)], sgn * c);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Block-aware equilibration (Ruiz-style) plus a right-hand-side scale.
// Variable scalings are scalar per cone block, so they are cone automorphisms.
// ---------------------------------------------------------------------------

struct Scales {
    std::vector<double> block;
    VectorXd lp;
    double bscale = 1.0;
};

Scales equilibrate(StdForm& f) {
    Scales sc;
    sc.block.assign(f.bdim.size(), 1.0);
    sc.lp = VectorXd::Ones(f.q);

    for (int pass = 0; pass < 4; ++pass) {
        // rows
        for (auto& row : f.rows) {
            double mx = 0.0;
            for (const auto& [b, A] : row.mats)
                mx = std::max(mx, A.cwiseAbs().maxCoeff());
            for (const auto& [j, c] : row.lp)
                mx = std::max(mx, std::abs(c));
            if (mx <= 0.0)
                continue;
            const double s = 1.0 / std::sqrt(mx);
            for (auto& [b, A] : row.mats)
                A *= s;
            for (auto& [j, c] : row.lp)
                c *= s;
            row.b *= s;
        }
        // blocks
        std::vector<double> bmax(f.bdim.size(), 0.0);
        for (const auto& row : f.rows)
            for (const auto& [b, A] : row.mats)
                bmax[static_cast<std::size_t>(b)] =
                    std::max(bmax[static_cast<std::size_t>(b)], A.cwiseAbs().maxCoeff());
        for (std::size_t b = 0; b < f.bdim.size(); ++b) {
            if (bmax[b] <= 0.0)
                continue;
            const double s = 1.0 / std::sqrt(bmax[b]);
            sc.block[b] *= s; // coefficients scaled by s, so X = s * X_tilde
            for (auto& row : f.rows)
                for (auto& [bi, A] : row.mats)
                    if (bi == static_cast<int>(b))
                        A *= s;
            for (auto& [bi, A] : f.c_mats)
                if (bi == static_cast<int>(b))
                    A *= s;
        }
        // lp vars
        VectorXd lmax = VectorXd::Zero(f.q);
        for (const auto& row : f.rows)
            for (const auto& [j, c] : row.lp)
                lmax[j] = std::max(lmax[j], std::abs(c));
        for (int j = 0; j < f.q; ++j) {
            if (lmax[j] <= 0.0)
                continue;
            const double s = 1.0 / std::sqrt(lmax[j]);
            sc.lp[j] *= s;
            for (auto& row : f.rows)
                for (auto& [ji, c] : row.lp)
                    if (ji == j)
                        c *= s;
            for (auto& [ji, c] : f.c_lp)
                if (ji == j)
                    c *= s;
        }
    }

    double bmax = 0.0;
    for (const auto& row : f.rows)
        bmax = std::max(bmax, std::abs(row.b));
    sc.bscale = std::max(1.0, bmax);
    for (auto& row : f.rows)
        row.b /= sc.bscale;

    double cmax = 0.0;
    for (const auto& [b, A] : f.c_mats)
        cmax = std::max(cmax, A.cwiseAbs().maxCoeff());
    for (const auto& [j, c] : f.c_lp)
        cmax = std::max(cmax, std::abs(c));
    if (cmax > 0.0) {
        for (auto& [b, A] : f.c_mats)
            A /= cmax;
        for (auto& [j, c] : f.c_lp)
            c /= cmax;
    }
    return sc;
}

// ---------------------------------------------------------------------------
// Cone-space vector and primitive operations.
// ---------------------------------------------------------------------------

struct KVec {
    std::vector<MatrixXd> S;
    VectorXd l;
};

KVec kzero(const std::vector<int>& bdim, int q) {
    KVec v;
    v.S.reserve(bdim.size());
    for (int d : bdim)
        v.S.push_back(MatrixXd::Zero(d, d));
    v.l = VectorXd::Zero(q);
    return v;
}

KVec kidentity(const std::vector<int>& bdim, int q) {
    KVec v;
    for (int d : bdim)
        v.S.push_back(MatrixXd::Identity(d, d));
    v.l = VectorXd::Ones(q);
    return v;
}

double kdot(const KVec& a, const KVec& b) {
    double acc = a.l.dot(b.l);
    for (std::size_t i = 0; i < a.S.size(); ++i)
        acc += (a.S[i].array() * b.S[i].array()).sum();
    return acc;
}

double knorm(const KVec& a) { return std::sqrt(std::max(0.0, kdot(a, a))); }

void kaxpy(double alpha, const KVec& x, KVec& y) {
    for (std::size_t i = 0; i < x.S.size(); ++i)
        y.S[i] += alpha * x.S[i];
    y.l += alpha * x.l;
}

struct HsdResult {
    SdpStatus status = SdpStatus::NUMERICAL_FAILURE;
    KVec x;
    double tau = 1.0;
    int iters = 0;
    double pres = 0.0, dres = 0.0, relgap = 0.0;
    std::string message;
};

HsdResult solve_hsd(const StdForm& f, const SolverOptions& opt) {
    const std::vector<int>& bdim = f.bdim;
    const int q = f.q;
    const int m = static_cast<int>(f.rows.size());
    const int nb = static_cast<int>(bdim.size());

    double nu = static_cast<double>(q);
    for (int d : bdim)
        nu += d;

    VectorXd b(m);
    for (int i = 0; i < m; ++i)
        b[i] = f.rows[static_cast<std::size_t>(i)].b;

    KVec c = kzero(bdim, q);
    for (const auto& [bi, A] : f.c_mats)
        c.S[static_cast<std::size_t>(bi)] += A;
    for (const auto& [j, v] : f.c_lp)
        c.l[j] += v;

    auto a_apply = [&](const KVec& v) {
        VectorXd out(m);
        for (int i = 0; i < m; ++i) {
            const auto& row = f.rows[static_cast<std::size_t>(i)];
            double acc = 0.0;
            for (const auto& [bi, A] : row.mats)
                acc += (A.array() * v.S[static_cast<std::size_t>(bi)].array()).sum();
            for (const auto& [j, cv] : row.lp)
                acc += cv * v.l[j];
            out[i] = acc;
        }
        return out;
    };

    auto at_apply = [&](const VectorXd& y) {
        KVec out = kzero(bdim, q);
        for (int i = 0; i < m; ++i) {
            const auto& row = f.rows[static_cast<std::size_t>(i)];
            for (const auto& [bi, A] : row.mats)
                out.S[static_cast<std::size_t>(bi)] += y[i] * A;
            for (const auto& [j, cv] : row.lp)
                out.l[j] += y[i] * cv;
        }
        return out;
    };

    // State.
    KVec x = kidentity(bdim, q), z = kidentity(bdim, q);
    VectorXd y = VectorXd::Zero(m);
    double tau = 1.0, kappa = 1.0;

    const double bnorm = 1.0 + b.norm();
    const double cnorm = 1.0 + knorm(c);
    const double tol = opt.tol;
    const double inf_tol = std::max(opt.tol * 10.0, 1e-9);

    HsdResult res;
    double best_metric = std::numeric_limits<double>::infinity();
    int stagnant = 0, tiny_steps = 0;

    // Best iterate seen, for the reduced-accuracy fallback: progress can die
    // at machine precision a decade short of tol, which is still a perfectly
    // usable solution.
    const double acc_tol = std::max(100.0 * tol, 1e-6);
    KVec x_best = x;
    double tau_best = tau, metric_best_seen = std::numeric_limits<double>::infinity();
    double pres_best = 0.0, dres_best = 0.0, relgap_best = 0.0;

    auto fail_or_accept = [&](const char* msg) {
        if (metric_best_seen <= acc_tol) {
            res.status = SdpStatus::OPTIMAL;
            res.x = x_best;
            res.tau = tau_best;
            res.pres = pres_best;
            res.dres = dres_best;
            res.relgap = relgap_best;
            res.message = std::string("reduced accuracy (") + msg + ")";
        } else {
            res.message = msg;
        }
        return res;
    };

    // Per-iteration NT scaling data.
    std::vector<MatrixXd> R(static_cast<std::size_t>(nb)), Rinv(static_cast<std::size_t>(nb)),
        W(static_cast<std::size_t>(nb));
    std::vector<VectorXd> lam(static_cast<std::size_t>(nb));
    VectorXd wlp, lamlp;

    auto factor_psd = [](const MatrixXd& Xb) {
        Eigen::LLT<MatrixXd> llt(Xb);
        if (llt.info() == Eigen::Success)
            return MatrixXd(llt.matrixL());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(Xb);
        VectorXd ev = es.eigenvalues().cwiseMax(1e-300);
        return MatrixXd(es.eigenvectors() * ev.cwiseSqrt().asDiagonal());
    };

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        res.iters = iter;

        // Residuals.
        const double cx = kdot(c, x);
        const double by = b.dot(y);
        VectorXd r_p = a_apply(x) - b * tau;
        KVec r_d = kzero(bdim, q);
        {
            KVec aty = at_apply(y);
            for (int bi = 0; bi < nb; ++bi)
                r_d.S[static_cast<std::size_t>(bi)] =
                    c.S[static_cast<std::size_t>(bi)] * tau - aty.S[static_cast<std::size_t>(bi)] -
                    z.S[static_cast<std::size_t>(bi)];
            r_d.l = c.l * tau - aty.l - z.l;
        }
        const double r_g = by - cx - kappa;
        const double mu = (kdot(x, z) + tau * kappa) / (nu + 1.0);

        // Convergence / certificates.
        const double pres = r_p.norm() / tau / bnorm;
        const double dres = knorm(r_d) / tau / cnorm;
        const double pobj = cx / tau;
        const double gap = kdot(x, z) / (tau * tau);
        const double relgap = gap / std::max(1.0, std::abs(pobj));
        res.pres = pres;
        res.dres = dres;
        res.relgap = relgap;
        if (opt.verbose) {
            std::ostringstream oss;
            oss << "iter " << iter << " pres " << pres << " dres " << dres << " relgap " << relgap
                << " tau " << tau << " kappa " << kappa;
            res.message = oss.str();
            std::cerr << res.message << '\n';
        }
        if (pres <= tol && dres <= tol && relgap <= tol) {
            res.status = SdpStatus::OPTIMAL;
            res.x = x;
            res.tau = tau;
            return res;
        }
        if (by > 0.0) {
            KVec aty = at_apply(y);
            kaxpy(1.0, z, aty);
            if (knorm(aty) / by <= inf_tol) {
                res.status = SdpStatus::INFEASIBLE;
                res.message = "primal infeasibility certificate";
                return res;
            }
        }
        if (cx < 0.0) {
            const double axn = a_apply(x).norm();
            if (axn / (-cx) <= inf_tol) {
                res.status = SdpStatus::NUMERICAL_FAILURE;
                res.message = "dual infeasibility certificate (objective unbounded below)";
                return res;
            }
        }
        const double metric = std::max({pres, dres, relgap});
        if (metric < metric_best_seen) {
            metric_best_seen = metric;
            x_best = x;
            tau_best = tau;
            pres_best = pres;
            dres_best = dres;
            relgap_best = relgap;
        }
        if (metric < 0.9 * best_metric) {
            best_metric = metric;
            stagnant = 0;
        } else if (++stagnant > 20) {
            return fail_or_accept("stalled");
        }

        // Nesterov-Todd scaling per block.
        for (int bi = 0; bi < nb; ++bi) {
            const auto bu = static_cast<std::size_t>(bi);
            const MatrixXd Fx = factor_psd(x.S[bu]);
            const MatrixXd Fz = factor_psd(z.S[bu]);
            Eigen::BDCSVD<MatrixXd> svd(Fz.transpose() * Fx,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
            VectorXd sv = svd.singularValues().cwiseMax(1e-300);
            const VectorXd isqrt = sv.cwiseSqrt().cwiseInverse();
            R[bu] = Fx * svd.matrixV() * isqrt.asDiagonal();
            Rinv[bu] = isqrt.asDiagonal() * svd.matrixU().transpose() * Fz.transpose();
            W[bu] = R[bu] * R[bu].transpose();
            lam[bu] = sv;
        }
        wlp = (x.l.array() / z.l.array()).sqrt().matrix();
        lamlp = (x.l.array() * z.l.array()).sqrt().matrix();

        // Scaled constraint coefficients and the Schur complement.
        std::vector<std::vector<MatrixXd>> scaled(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            const auto& row = f.rows[static_cast<std::size_t>(i)];
            auto& sc = scaled[static_cast<std::size_t>(i)];
            sc.reserve(row.mats.size());
            for (const auto& [bi, A] : row.mats)
                sc.push_back(R[static_cast<std::size_t>(bi)].transpose() * A *
                             R[static_cast<std::size_t>(bi)]);
        }
        MatrixXd M = MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            const auto& ri = f.rows[static_cast<std::size_t>(i)];
            for (int j = i; j < m; ++j) {
                const auto& rj = f.rows[static_cast<std::size_t>(j)];
                double acc = 0.0;
                for (std::size_t ai = 0; ai < ri.mats.size(); ++ai)
                    for (std::size_t aj = 0; aj < rj.mats.size(); ++aj)
                        if (ri.mats[ai].first == rj.mats[aj].first)
                            acc += (scaled[static_cast<std::size_t>(i)][ai].array() *
                                    scaled[static_cast<std::size_t>(j)][aj].array())
                                       .sum();
                for (const auto& [ji, cvi] : ri.lp)
                    for (const auto& [jj, cvj] : rj.lp)
                        if (ji == jj)
                            acc += wlp[ji] * wlp[ji] * cvi * cvj;
                M(i, j) = acc;
                M(j, i) = acc;
            }
        }
        Eigen::LDLT<MatrixXd> mfac(M);
        if (mfac.info() != Eigen::Success || !mfac.isPositive()) {
            const double ridge = 1e-12 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
            mfac.compute(M + ridge * MatrixXd::Identity(m, m));
            if (mfac.info() != Eigen::Success) {
                res.message = "Schur complement factorization failed";
                return res;
            }
        }

        auto p_apply = [&](const KVec& v) {
            KVec out = kzero(bdim, q);
            for (int bi = 0; bi < nb; ++bi)
                out.S[static_cast<std::size_t>(bi)] = W[static_cast<std::size_t>(bi)] *
                                                      v.S[static_cast<std::size_t>(bi)] *
                                                      W[static_cast<std::size_t>(bi)];
            out.l = (wlp.array().square() * v.l.array()).matrix();
            return out;
        };

        const KVec Pc = p_apply(c);
        const VectorXd APc = a_apply(Pc);
        const double cPc = kdot(c, Pc);
        const KVec Prd = p_apply(r_d);
        const VectorXd APrd = a_apply(Prd);
        const double cPrd = kdot(c, Prd);
        const VectorXd u1 = mfac.solve(APc + b);
        const double den_tau = (b - APc).dot(u1) + cPc + kappa / tau;

        struct Dir {
            KVec dx, dz;
            VectorXd dy;
            double dtau = 0.0, dkappa = 0.0;
        };

        auto make_dir = [&](double eta, const std::vector<MatrixXd>& D, const VectorXd& dlp,
                            double dtk) {
            Dir d;
            KVec v = kzero(bdim, q);
            for (int bi = 0; bi < nb; ++bi) {
                const auto bu = static_cast<std::size_t>(bi);
                const int dim = bdim[bu];
                MatrixXd E(dim, dim);
                for (int r2 = 0; r2 < dim; ++r2)
                    for (int c2 = 0; c2 < dim; ++c2)
                        E(r2, c2) = 2.0 * D[bu](r2, c2) / (lam[bu][r2] + lam[bu][c2]);
                v.S[bu] = R[bu] * E * R[bu].transpose();
            }
            v.l = (dlp.array() / z.l.array()).matrix();

            const VectorXd rhs1 = -eta * r_p - a_apply(v) + eta * APrd;
            const VectorXd u0 = mfac.solve(rhs1);
            const double rhs2 = -eta * r_g + kdot(c, v) - eta * cPrd + dtk / tau;
            d.dtau = (rhs2 - (b - APc).dot(u0)) / den_tau;
            d.dy = u0 + d.dtau * u1;

            d.dz = at_apply(d.dy);
            for (int bi = 0; bi < nb; ++bi) {
                const auto bu = static_cast<std::size_t>(bi);
                d.dz.S[bu] = -d.dz.S[bu] + c.S[bu] * d.dtau + eta * r_d.S[bu];
            }
            d.dz.l = -d.dz.l + c.l * d.dtau + eta * r_d.l;

            d.dx = p_apply(d.dz);
            for (int bi = 0; bi < nb; ++bi) {
                const auto bu = static_cast<std::size_t>(bi);
                d.dx.S[bu] = v.S[bu] - d.dx.S[bu];
            }
            d.dx.l = v.l - d.dx.l;
            d.dkappa = (dtk - kappa * d.dtau) / tau;
            return d;
        };

        auto boundary = [&](const Dir& d) {
            double amax = std::numeric_limits<double>::infinity();
            for (int bi = 0; bi < nb; ++bi) {
                const auto bu = static_cast<std::size_t>(bi);
                const VectorXd il = lam[bu].cwiseSqrt().cwiseInverse();
                {
                    const MatrixXd Cx = il.asDiagonal() *
                                        (Rinv[bu] * d.dx.S[bu] * Rinv[bu].transpose()) *
                                        il.asDiagonal();
                    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Cx, Eigen::EigenvaluesOnly);
                    const double mn = es.eigenvalues().minCoeff();
                    if (mn < 0.0)
                        amax = std::min(amax, -1.0 / mn);
                }
                {
                    const MatrixXd Cz = il.asDiagonal() *
                                        (R[bu].transpose() * d.dz.S[bu] * R[bu]) *
                                        il.asDiagonal();
                    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Cz, Eigen::EigenvaluesOnly);
                    const double mn = es.eigenvalues().minCoeff();
                    if (mn < 0.0)
                        amax = std::min(amax, -1.0 / mn);
                }
            }
            for (int j = 0; j < q; ++j) {
                if (d.dx.l[j] < 0.0)
                    amax = std::min(amax, -x.l[j] / d.dx.l[j]);
                if (d.dz.l[j] < 0.0)
                    amax = std::min(amax, -z.l[j] / d.dz.l[j]);
            }
            if (d.dtau < 0.0)
                amax = std::min(amax, -tau / d.dtau);
            if (d.dkappa < 0.0)
                amax = std::min(amax, -kappa / d.dkappa);
            return amax;
        };

        // Predictor.
        std::vector<MatrixXd> Daff(static_cast<std::size_t>(nb));
        for (int bi = 0; bi < nb; ++bi) {
            const auto bu = static_cast<std::size_t>(bi);
            Daff[bu] = MatrixXd::Zero(bdim[bu], bdim[bu]);
            Daff[bu].diagonal() = -lam[bu].array().square();
        }
        const VectorXd dlp_aff = -lamlp.array().square().matrix();
        const Dir aff = make_dir(1.0, Daff, dlp_aff, -tau * kappa);
        const double a_aff = std::min(1.0, boundary(aff));

        double mu_aff = (tau + a_aff * aff.dtau) * (kappa + a_aff * aff.dkappa);
        {
            KVec xa = x, za = z;
            kaxpy(a_aff, aff.dx, xa);
            kaxpy(a_aff, aff.dz, za);
            mu_aff += kdot(xa, za);
        }
        mu_aff /= (nu + 1.0);
        double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);

        // Corrector.
        std::vector<MatrixXd> Dcor(static_cast<std::size_t>(nb));
        for (int bi = 0; bi < nb; ++bi) {
            const auto bu = static_cast<std::size_t>(bi);
            const MatrixXd dxt = Rinv[bu] * aff.dx.S[bu] * Rinv[bu].transpose();
            const MatrixXd dzt = R[bu].transpose() * aff.dz.S[bu] * R[bu];
            MatrixXd corr = 0.5 * (dxt * dzt + dzt * dxt);
            Dcor[bu] = -corr;
            Dcor[bu].diagonal().array() += sigma * mu;
            Dcor[bu].diagonal() -= lam[bu].array().square().matrix();
        }
        const VectorXd dlp_cor = (sigma * mu - lamlp.array().square() -
                                  aff.dx.l.array() * aff.dz.l.array())
                                     .matrix();
        const double dtk_cor = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        const Dir dir = make_dir(1.0 - sigma, Dcor, dlp_cor, dtk_cor);

        double alpha = std::min(1.0, 0.99 * boundary(dir));
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            return fail_or_accept("no admissible step");
        if (alpha < 1e-9 && ++tiny_steps >= 3)
            return fail_or_accept("step size collapsed");

        kaxpy(alpha, dir.dx, x);
        kaxpy(alpha, dir.dz, z);
        y += alpha * dir.dy;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }

    return fail_or_accept("iteration limit reached");
}

SdpSolution solve_once(const HermitianSdpProblem& p, const SolverOptions& opt, double eps_shift) {
    StdForm f = standardize(p, eps_shift);
    const Scales sc = equilibrate(f);
    const HsdResult hs = solve_hsd(f, opt);

    SdpSolution sol;
    sol.iterations = hs.iters;
    sol.primal_residual = hs.pres;
    sol.dual_residual = hs.dres;
    sol.gap = hs.relgap;
    sol.message = hs.message;
    if (hs.status == SdpStatus::INFEASIBLE) {
        sol.status = SdpStatus::INFEASIBLE;
        return sol;
    }
    if (hs.status != SdpStatus::OPTIMAL) {
        sol.status = SdpStatus::NUMERICAL_FAILURE;
        if (sol.message.empty())
            sol.message = "no convergence";
        return sol;
    }

    sol.status = SdpStatus::OPTIMAL;
    // Recover the user's variables from the scaled homogeneous solution.
    sol.X.resize(p.matrix_vars.size());
    for (std::size_t v = 0; v < p.matrix_vars.size(); ++v) {
        const int blk = f.var_block[v];
        const double s =
            sc.block[static_cast<std::size_t>(blk)] * sc.bscale / hs.tau;
        MatrixXd Xt = s * hs.x.S[static_cast<std::size_t>(blk)];
        sol.X[v] = unembed(Xt, p.matrix_vars[v].dim);
        if (eps_shift > 0.0)
            sol.X[v] -= eps_shift * MatrixXcd::Identity(sol.X[v].rows(), sol.X[v].cols());
    }
    sol.scalars.resize(static_cast<Eigen::Index>(p.scalar_vars.size()));
    for (std::size_t v = 0; v < p.scalar_vars.size(); ++v) {
        const int j = f.scalar_lp[v];
        sol.scalars[static_cast<Eigen::Index>(v)] =
            f.scalar_lo[v] + sc.lp[j] * sc.bscale * hs.x.l[j] / hs.tau;
    }
    if (p.objective.sense != Sense::FEASIBILITY) {
        double obj = 0.0;
        for (const auto& [idx, A] : p.objective.matrix_terms)
            obj += (A.array() * sol.X[static_cast<std::size_t>(idx)].conjugate().array())
                       .sum()
                       .real();
        for (const auto& [idx, cv] : p.objective.scalar_terms)
            obj += cv * sol.scalars[idx];
        sol.objective = obj;
    }
    return sol;
}

} // namespace

SdpSolution solve(const HermitianSdpProblem& p, const SolverOptions& opt) {
    validate(p);
    SdpSolution sol = solve_once(p, opt, 0.0);
    if (sol.status == SdpStatus::NUMERICAL_FAILURE) {
        // One retry with the PSD cones relaxed by a small diagonal shift.
        SdpSolution retry = solve_once(p, opt, 1e-9);
        if (retry.status != SdpStatus::NUMERICAL_FAILURE) {
            retry.message += retry.message.empty() ? "" : "; ";
            retry.message += "solved after 1e-9 diagonal relaxation";
            return retry;
        }
    }
    return sol;
}

double evaluate(const Constraint& c, const std::vector<MatrixXcd>& X, const VectorXd& scalars) {
    double acc = 0.0;
    for (const auto& [idx, A] : c.matrix_terms)
        acc += (A.array() * X[static_cast<std::size_t>(idx)].conjugate().array()).sum().real();
    for (const auto& [idx, cv] : c.scalar_terms)
        acc += cv * scalars[idx];
    return acc;
}

std::pair<Eigen::VectorXcd, double> extract_rank_one(const MatrixXcd& X) {
    if (X.rows() == 0)
        return {Eigen::VectorXcd(), 0.0};
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (X + X.adjoint().eval()));
    const VectorXd ev = es.eigenvalues();
    const Eigen::Index n = ev.size();
    const double l1 = ev[n - 1];
    if (!(l1 > 0.0))
        return {Eigen::VectorXcd::Zero(X.rows()), 0.0};
    const double l2 = n > 1 ? std::max(0.0, ev[n - 2]) : 0.0;
    Eigen::VectorXcd v = es.eigenvectors().col(n - 1);
    // Deterministic global phase: largest-magnitude entry made real positive.
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const cxd piv = v[imax];
    if (std::abs(piv) > 0.0)
        v *= std::conj(piv) / std::abs(piv);
    return {std::sqrt(l1) * v, l2 / l1};
}

void dump(const HermitianSdpProblem& p, std::ostream& os) {
    os << "hermitian-sdp v1\n";
    os << "matrix_vars " << p.matrix_vars.size() << '\n';
    for (const auto& v : p.matrix_vars)
        os << "  dim " << v.dim << ' ' << (v.name.empty() ? "-" : v.name) << '\n';
    os << "scalar_vars " << p.scalar_vars.size() << '\n';
    for (const auto& v : p.scalar_vars)
        os << "  range " << v.lower << ' ' << v.upper << ' ' << (v.name.empty() ? "-" : v.name)
           << '\n';
    auto put_terms = [&](const std::vector<std::pair<int, Eigen::MatrixXcd>>& mats,
                         const std::vector<std::pair<int, double>>& lps) {
        for (const auto& [idx, A] : mats)
            for (Eigen::Index r = 0; r < A.rows(); ++r)
                for (Eigen::Index cl = 0; cl < A.cols(); ++cl)
                    if (A(r, cl) != cxd(0.0, 0.0))
                        os << "  mat " << idx << ' ' << r << ' ' << cl << ' ' << A(r, cl).real()
                           << ' ' << A(r, cl).imag() << '\n';
        for (const auto& [idx, cv] : lps)
            os << "  scl " << idx << ' ' << cv << '\n';
    };
    os << "objective ";
    switch (p.objective.sense) {
    case Sense::MINIMIZE: os << "min\n"; break;
    case Sense::MAXIMIZE: os << "max\n"; break;
    case Sense::FEASIBILITY: os << "feasibility\n"; break;
    }
    put_terms(p.objective.matrix_terms, p.objective.scalar_terms);
    os << "constraints " << p.constraints.size() << '\n';
    for (const auto& c : p.constraints) {
        const char* rel = c.rel == Rel::LE ? "<=" : (c.rel == Rel::GE ? ">=" : "==");
        os << " constraint " << rel << ' ' << c.rhs << ' ' << (c.name.empty() ? "-" : c.name)
           << '\n';
        put_terms(c.matrix_terms, c.scalar_terms);
    }
    os << "hyperbolics " << p.hyperbolics.size() << '\n';
    for (const auto& h : p.hyperbolics)
        os << "  prod " << h.a << ' ' << h.b << " >= " << h.bound << '\n';
    os << "end\n";
}

} // namespace jdbpr::conic
