#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace d3m {

/// P A P^T = L D L^T with 1x1 pivots in a static, fill-reducing order.
/// L is stored column-compressed without its unit diagonal.
struct SparseLdlt {
    int n = 0;
    /// Row i of P A P^T is row perm[i] of A.
    std::vector<int> perm;
    std::vector<std::int64_t> col_ptr;
    std::vector<int> row_idx;
    std::vector<double> val;
    Eigen::VectorXd d;

    std::int64_t nnz_l() const { return static_cast<std::int64_t>(row_idx.size()); }
    std::int64_t bytes() const { return 12 * nnz_l() + 8 * (n + 1) + 8 * d.size(); }

    /// x <- L^{-1} P x
    void forward(Eigen::Ref<Eigen::MatrixXd> x) const;
    /// x <- D^{-1} x
    void apply_d_inverse(Eigen::Ref<Eigen::MatrixXd> x) const;
    /// x <- P^T L^{-T} x
    void backward(Eigen::Ref<Eigen::MatrixXd> x) const;

    Eigen::MatrixXd dense_l() const;
};

/// Approximate minimum degree order of the symmetric pattern; perm[new] = old.
std::vector<int> amd_order(const Eigen::SparseMatrix<double>& a);

/// Factors `a` (both triangles stored) in the given order. Returns nullopt when
/// a pivot magnitude drops to or below `pivot_tol * max|a_ij|`; the caller
/// then needs a pivoting factorization.
std::optional<SparseLdlt> sparse_ldlt(const Eigen::SparseMatrix<double>& a, const std::vector<int>& perm,
                                      double pivot_tol);

}  // namespace d3m
