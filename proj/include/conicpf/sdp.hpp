#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace conicpf {

/// Entry (row, col) with row <= col of a symmetric matrix in block `block`.
/// Off-diagonal entries stand for both (row, col) and (col, row).
struct BlockEntry {
    int block = 0;
    int row = 0;
    int col = 0;
    double value = 0.0;
};

struct LpEntry {
    int index = 0;
    double value = 0.0;
};

struct RealConstraint {
    std::vector<BlockEntry> block_entries;
    std::vector<LpEntry> lp_entries;
    double rhs = 0.0;
};

/// Block-diagonal real SDP in standard primal form:
///   minimize   sum_b <C_b, X_b> + c^T x
///   subject to sum_b <A_ib, X_b> + a_i^T x = b_i,  X_b PSD, x >= 0.
/// Dual: maximize b^T y s.t. C - sum_i y_i A_i = S PSD.
struct RealConicProgram {
    std::vector<int> block_sizes;
    int lp_size = 0;
    std::vector<BlockEntry> objective;
    std::vector<double> lp_cost;
    std::vector<RealConstraint> constraints;

    int constraint_count() const { return static_cast<int>(constraints.size()); }
    /// Number of scalar primal variables: n(n+1)/2 per block plus lp_size.
    long scalar_variable_count() const;
};

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure };

std::string to_string(SolveStatus status);

enum class ExecPolicy { serial, parallel };

struct SolverOptions {
    double tol = 1e-8;
    int max_iterations = 120;
    ExecPolicy policy = ExecPolicy::parallel;
    bool verbose = false;
};

struct RealSolution {
    SolveStatus status = SolveStatus::numerical_failure;
    std::vector<Eigen::MatrixXd> x_blocks;
    std::vector<Eigen::MatrixXd> s_blocks;
    Eigen::VectorXd x_lp;
    Eigen::VectorXd s_lp;
    Eigen::VectorXd y;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;  // ||b - A(X)|| / (1 + ||b||)
    double dual_residual = 0.0;    // ||C - A^T y - S|| / (1 + ||C||)
    double gap = 0.0;              // |pobj - dobj| / (1 + |pobj| + |dobj|)
    int iterations = 0;
    std::string message;
};

/// Infeasible primal-dual interior-point method with the HKM search
/// direction and Mehrotra predictor-corrector steps. Linearly dependent
/// equalities are detected up front: consistent ones are dropped (their
/// multiplier is reported as zero), inconsistent ones make the problem
/// infeasible.
RealSolution solve_real(const RealConicProgram& program, const SolverOptions& options = {});

}  // namespace conicpf
