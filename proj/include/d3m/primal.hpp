#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "d3m/dense_ldlt.hpp"
#include "d3m/problem.hpp"
#include "d3m/sparse_ldlt.hpp"

namespace d3m {

struct FactorOptions {
    /// Interiors with more DOFs than this use the sparse factorization.
    int dense_crossover = 256;
    /// Relative pivot floor for the sparse path; below it the domain is
    /// refactored densely with Bunch-Kaufman pivoting.
    double sparse_pivot_tol = 1e-8;
};

enum class FactorStorage { dense, sparse };

/// LDL^T factor of one domain's interior block.
struct InteriorFactor {
    int domain_id = 0;
    FactorStorage storage = FactorStorage::dense;
    DenseLdlt dense;
    SparseLdlt sparse;

    int size() const { return storage == FactorStorage::dense ? dense.size() : sparse.n; }
    const std::vector<int>& perm() const { return storage == FactorStorage::dense ? dense.perm : sparse.perm; }
    std::int64_t bytes() const { return storage == FactorStorage::dense ? dense.bytes() : sparse.bytes(); }

    void forward(Eigen::Ref<Eigen::MatrixXd> x) const;
    void apply_d_inverse(Eigen::Ref<Eigen::MatrixXd> x) const;
    void backward(Eigen::Ref<Eigen::MatrixXd> x) const;
    void solve(Eigen::Ref<Eigen::MatrixXd> x) const;

    Eigen::MatrixXd l_matrix() const;
    Eigen::MatrixXd d_matrix() const;
};

/// A domain's Schur complement on its interface and its reduced RHS.
struct DtnContribution {
    int domain_id = 0;
    Eigen::MatrixXd s_local;
    Eigen::MatrixXd g_local;  // |interface| x nrhs
    std::vector<int> interface_dofs;
};

/// Throws SingularDomainError when the interior block is exactly singular.
InteriorFactor factor_interior(const DomainProblem& dp, const FactorOptions& opts = {});

/// A_BB_local - A_IB^T A_II^{-1} A_IB through triangular solves, symmetrized.
Eigen::MatrixXd compute_schur(const DomainProblem& dp, const InteriorFactor& f);

/// w .* f_B - A_IB^T A_II^{-1} f_I, one column per right-hand side.
Eigen::MatrixXd reduce_rhs(const DomainProblem& dp, const InteriorFactor& f, const Eigen::MatrixXd& f_interior,
                           const Eigen::MatrixXd& f_interface);

/// `rhs` is the global right-hand side matrix (n x nrhs).
DtnContribution compute_dtn(const DomainProblem& dp, const InteriorFactor& f, const Eigen::MatrixXd& rhs);

/// A_II^{-1} (f_I - A_IB u_B).
Eigen::MatrixXd recover_primal(const DomainProblem& dp, const InteriorFactor& f, const Eigen::MatrixXd& u_interface,
                               const Eigen::MatrixXd& f_interior);

/// Rows `idx` of `b`.
Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& b, const std::vector<int>& idx);

}  // namespace d3m
