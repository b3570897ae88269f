#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "conicpf/hermitian.hpp"
#include "conicpf/sdp.hpp"

namespace conicpf {

enum class ConeMode { full_psd, psd_bags, two_by_two };
enum class SlackPenalty { none, wlav, wls };

std::string to_string(ConeMode mode);
std::string to_string(SlackPenalty penalty);

/// Tr(M X) (+ nu) = rhs. `sigma` weights the slack under WLAV/WLS.
struct ConicConstraint {
    HermitianSparse matrix;
    double rhs = 0.0;
    bool slack = false;
    double sigma = 1.0;
    std::string label;
};

/// minimize Tr(M0 X) + rho * f(nu) over Hermitian X in the given cone.
struct ConicProgram {
    int dimension = 0;
    HermitianSparse objective;
    SlackPenalty penalty = SlackPenalty::none;
    double rho = 0.0;
    std::vector<ConicConstraint> constraints;
    ConeMode cone = ConeMode::full_psd;
    std::vector<std::vector<int>> bags;        // psd_bags, each sorted
    std::vector<std::pair<int, int>> edges;    // two_by_two, s < t

    /// Union of the off-diagonal supports of the objective and all constraints (s < t, sorted).
    std::vector<std::pair<int, int>> sparsity_edges() const;
    /// Throws std::invalid_argument on out-of-range indices, uncovered entries or slack misuse.
    void validate() const;
    /// Real scalar variables in the Hermitian formulation: diagonal entries plus two per
    /// distinct off-diagonal entry covered by the cone, plus slacks.
    long scalar_variable_count() const;
};

struct TreeDecomposition {
    std::vector<std::vector<int>> bags;            // sorted vertex lists
    std::vector<std::pair<int, int>> tree_edges;   // between bag indices; a forest when the graph is disconnected
};

/// Maximal cliques of a minimum-degree chordal extension, joined by a
/// maximum-weight spanning tree on intersection sizes.
TreeDecomposition tree_decomposition(int n, const std::vector<std::pair<int, int>>& edges);

bool vertex_coverage(const TreeDecomposition& td, int n);
bool edge_coverage(const TreeDecomposition& td, const std::vector<std::pair<int, int>>& edges);
bool running_intersection(const TreeDecomposition& td, int n);

/// full_psd -> psd_bags over the tree decomposition of the sparsity graph.
ConicProgram decompose(const ConicProgram& program);

/// Real embedding [[Re H, -Im H],[Im H, Re H]].
Eigen::MatrixXd embed_hermitian(const CMatrix& h);
/// Inverse of embed_hermitian on structured input; averages the two copies otherwise.
CMatrix extract_hermitian(const Eigen::MatrixXd& z);

/// Rotated second-order cone residuals of a 2x2 Hermitian block:
/// (X_ss, X_tt, X_ss X_tt - |X_st|^2), all nonnegative iff the block is PSD.
struct RotatedSoc {
    double xss = 0.0;
    double xtt = 0.0;
    double product_gap = 0.0;
    bool contains(double tol = 0.0) const { return xss >= -tol && xtt >= -tol && product_gap >= -tol; }
};
RotatedSoc rotated_soc(double xss, double xtt, cplx xst);

/// Where each piece of the Hermitian program lives in the real program.
struct RealForm {
    RealConicProgram program;
    std::vector<std::vector<int>> bags;  // one real block per bag, same order
    int measurement_rows = 0;            // first rows are the program's constraints
    int linking_rows = 0;
    // per constraint: slack location (LP pair for WLAV, block index for WLS), -1 if none
    std::vector<int> slack_index;
};

RealForm to_real(const ConicProgram& program);

struct ConicSolution {
    SolveStatus status = SolveStatus::numerical_failure;
    HermitianSparse x;                   // diagonal plus every entry covered by a bag
    std::vector<std::vector<int>> bags;  // bag index sets of `blocks`
    std::vector<CMatrix> blocks;         // Hermitian bag submatrices of X
    std::vector<double> slack;           // nu_j, zero for hard constraints
    std::vector<double> mu;              // H(mu) = M0 + sum mu_j M_j
    double objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double min_block_eigenvalue = 0.0;
    int iterations = 0;
    std::string message;

    bool full() const { return blocks.size() == 1 && static_cast<int>(bags.front().size()) == x.dim(); }
    /// Dense X for full_psd solutions.
    CMatrix dense() const;
};

ConicSolution solve(const ConicProgram& program, const SolverOptions& options = {});

/// Debug interchange: objective/constraint triplets and the cone list.
nlohmann::json to_json(const ConicProgram& program);

}  // namespace conicpf
