#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace conicpf {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// One stored entry of a Hermitian matrix, always with row <= col.
struct HermitianEntry {
    int row = 0;
    int col = 0;
    cplx value;
};

/// Sparse Hermitian matrix stored as its upper triangle (diagonal included).
///
/// The lower triangle is implied: entry (col,row) is the conjugate of the
/// stored (row,col). Diagonal values are real; any imaginary part handed to
/// add() on the diagonal is discarded.
class HermitianSparse {
  public:
    HermitianSparse() = default;
    explicit HermitianSparse(int dim) : dim_(dim) {}

    int dim() const { return dim_; }
    std::size_t nnz() const { return entries_.size(); }
    std::span<const HermitianEntry> entries() const { return entries_; }

    /// Accumulates value into (i,j). If i > j the conjugate goes into (j,i).
    void add(int i, int j, cplx value);

    /// Value of (i,j) for any ordering of i and j; zero when not stored.
    cplx at(int i, int j) const;
    bool contains(int i, int j) const;

    /// v* M v, real by construction.
    double quadratic_form(const CVector& v) const;

    /// Re Tr(M X) for a dense Hermitian X.
    double trace_product(const CMatrix& x) const;

    /// Re Tr(M X) where X is given by its own sparse upper triangle.
    double trace_product(const HermitianSparse& x) const;

    /// Computes M v.
    CVector multiply(const CVector& v) const;

    CMatrix to_dense() const;
    static HermitianSparse from_dense(const CMatrix& m, double drop_tol = 0.0);
    /// Bulk construction; entries with row > col are conjugated, duplicates summed.
    static HermitianSparse from_entries(int dim, std::vector<HermitianEntry> entries);

    HermitianSparse& operator+=(const HermitianSparse& other);
    HermitianSparse scaled(double factor) const;

    /// Off-diagonal (i<j) positions with nonzero stored value.
    std::vector<std::pair<int, int>> off_diagonal_support() const;

  private:
    int find(int i, int j) const;

    int dim_ = 0;
    std::vector<HermitianEntry> entries_;  // sorted by (row, col)
};

}  // namespace conicpf
