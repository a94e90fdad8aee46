#pragma once

#include <jdbpr/types.hpp>

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace jdbpr::conic {

// Solver-agnostic standard form: Hermitian PSD matrix variables, bounded
// scalar variables, linear trace constraints, a linear (or feasibility)
// objective, plus hyperbolic couplings t_a * t_b >= bound used for 1/rho
// epigraphs. Solved by an in-house homogeneous self-dual interior-point
// method over the complex-to-real embedding.

enum class SdpStatus { OPTIMAL, INFEASIBLE, NUMERICAL_FAILURE };

const char* to_string(SdpStatus s);

enum class Rel { LE, EQ, GE };
enum class Sense { MINIMIZE, MAXIMIZE, FEASIBILITY };

struct MatrixVar {
    int dim = 0;
    std::string name;
};

struct ScalarVar {
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
    std::string name;
};

// sum_i Tr(A_i X_i) + sum_j c_j t_j  <rel>  rhs. Coefficients must be Hermitian.
struct Constraint {
    std::vector<std::pair<int, Eigen::MatrixXcd>> matrix_terms;
    std::vector<std::pair<int, double>> scalar_terms;
    Rel rel = Rel::EQ;
    double rhs = 0.0;
    std::string name;
};

struct Objective {
    Sense sense = Sense::FEASIBILITY;
    std::vector<std::pair<int, Eigen::MatrixXcd>> matrix_terms;
    std::vector<std::pair<int, double>> scalar_terms;
};

// t_a * t_b >= bound with both scalars nonnegative (bound > 0); lowered to a
// 2x2 PSD block [[t_a, sqrt(bound)], [sqrt(bound), t_b]] internally.
struct Hyperbolic {
    int a = 0;
    int b = 0;
    double bound = 1.0;
    std::string name;
};

struct HermitianSdpProblem {
    std::vector<MatrixVar> matrix_vars;
    std::vector<ScalarVar> scalar_vars;
    Objective objective;
    std::vector<Constraint> constraints;
    std::vector<Hyperbolic> hyperbolics;

    int add_matrix_var(int dim, std::string name = {}) {
        matrix_vars.push_back({dim, std::move(name)});
        return static_cast<int>(matrix_vars.size()) - 1;
    }
    int add_scalar_var(double lower, double upper, std::string name = {}) {
        scalar_vars.push_back({lower, upper, std::move(name)});
        return static_cast<int>(scalar_vars.size()) - 1;
    }
};

struct SolverOptions {
    double tol = 1e-8;      // feasibility residual and relative-gap target
    int max_iters = 120;
    bool verbose = false;
};

struct SdpSolution {
    SdpStatus status = SdpStatus::NUMERICAL_FAILURE;
    double objective = 0.0;          // in the problem's own sense
    std::vector<Eigen::MatrixXcd> X; // PSD within tolerance
    Eigen::VectorXd scalars;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    std::string message;
};

// Solves the program. NUMERICAL_FAILURE triggers one internal retry with the
// PSD cones relaxed by a 1e-9 diagonal shift before the failure is surfaced.
SdpSolution solve(const HermitianSdpProblem& p, const SolverOptions& opt = {});

// Left-hand side of a constraint at a candidate point (for checks and tests).
double evaluate(const Constraint& c, const std::vector<Eigen::MatrixXcd>& X,
                const Eigen::VectorXd& scalars);

// Dominant eigenpair scaled as a beamformer: returns (sqrt(l1) v1, l2/l1).
// A zero (or negative semidefinite) matrix gives a zero vector and ratio 0.
std::pair<Eigen::VectorXcd, double> extract_rank_one(const Eigen::MatrixXcd& X);

// Text dump: dimensions then coefficient triplets, one per line.
void dump(const HermitianSdpProblem& p, std::ostream& os);

} // namespace jdbpr::conic
