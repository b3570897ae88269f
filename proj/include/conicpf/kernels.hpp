#pragma once

#include <vector>

#include <Eigen/Dense>

#include "conicpf/sdp.hpp"

namespace conicpf {

/// A symmetric data matrix restricted to one block, with every off-diagonal
/// entry listed twice so Tr(A B) = sum a_pq B_qp needs no special casing.
struct FullEntry {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// Constraint data regrouped for Schur-complement assembly.
struct SchurLayout {
    int m = 0;
    // per constraint: (block, entries of that constraint in that block)
    struct Piece {
        int block = 0;
        std::vector<FullEntry> entries;
    };
    std::vector<std::vector<Piece>> pieces;
    // per block: constraints touching it and the matching piece index
    std::vector<std::vector<std::pair<int, int>>> block_users;
    // LP part: per constraint its (column, value) list, per column its users
    std::vector<std::vector<LpEntry>> lp_rows;
    std::vector<std::vector<std::pair<int, double>>> lp_columns;
};

SchurLayout make_schur_layout(const RealConicProgram& program);

/// Upper triangle (j >= i) of the Schur matrix, one sparse row per constraint.
struct SchurRows {
    std::vector<std::vector<std::pair<int, double>>> rows;
};

/// M_ij = sum_b Tr(A_ib X_b A_jb Z_b) + sum_l a_il a_jl d_l, with Z_b = S_b^{-1}
/// and d = x / s for the LP block.
///
/// Serial reference; the parallel kernel must match it to rounding.
SchurRows assemble_schur_serial(const SchurLayout& layout, const std::vector<Eigen::MatrixXd>& x,
                                const std::vector<Eigen::MatrixXd>& z, const Eigen::VectorXd& lp_scale);

/// OpenMP version: rows are independent work items, each owned by one thread.
SchurRows assemble_schur_parallel(const SchurLayout& layout, const std::vector<Eigen::MatrixXd>& x,
                                  const std::vector<Eigen::MatrixXd>& z, const Eigen::VectorXd& lp_scale);

SchurRows assemble_schur(const SchurLayout& layout, const std::vector<Eigen::MatrixXd>& x,
                         const std::vector<Eigen::MatrixXd>& z, const Eigen::VectorXd& lp_scale, ExecPolicy policy);

/// Dense symmetric matrix from the upper-triangular rows.
Eigen::MatrixXd to_dense(const SchurRows& rows);

}  // namespace conicpf
