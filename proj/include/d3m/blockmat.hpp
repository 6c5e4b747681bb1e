#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "d3m/dense_ldlt.hpp"
#include "d3m/primal.hpp"
#include "d3m/problem.hpp"

namespace d3m {

/// (block row, block column) with row >= column.
using BlockKey = std::pair<int, int>;

/// Maps every separator DOF to one block row (its owner's) and records, per
/// domain, where each interface position lands in the reduced matrix.
struct ReducedLayout {
    struct DomainMap {
        /// Block rows touched by this domain's interface, ascending.
        std::vector<int> rows;
        /// For each touched row: interface positions and their offsets in that row.
        std::vector<std::vector<int>> positions;
        std::vector<std::vector<int>> offsets;
    };

    std::vector<int> block_domain;  // block row -> owning domain
    std::vector<int> domain_block;  // domain -> block row, -1 when it owns no separator DOF
    std::vector<std::vector<int>> block_dofs;
    std::vector<DomainMap> domains;

    int num_blocks() const { return static_cast<int>(block_domain.size()); }
    int block_size(int b) const { return static_cast<int>(block_dofs[b].size()); }
    std::vector<int> block_sizes() const;
    /// Lower block pattern of the assembled matrix, diagonal included.
    std::set<BlockKey> pattern() const;
};

ReducedLayout build_reduced_layout(const std::vector<DomainProblem>& domains, const Partition& part);

/// Adds the (row, col) part of one domain's Schur complement into `block`.
void add_block_contribution(Eigen::MatrixXd& block, int row, int col, const ReducedLayout::DomainMap& dm,
                            const Eigen::MatrixXd& s_local);
/// Adds the `row` part of one domain's reduced RHS into `segment`.
void add_rhs_contribution(Eigen::MatrixXd& segment, int row, const ReducedLayout::DomainMap& dm,
                          const Eigen::MatrixXd& g_local);

/// The reduced block-sparse matrix. Diagonal blocks are referenced through
/// their lower triangle only.
struct BlockMatrix {
    std::vector<int> block_sizes;
    std::map<BlockKey, Eigen::MatrixXd> blocks;
    std::vector<Eigen::MatrixXd> rhs_blocks;

    int num_block_rows() const { return static_cast<int>(block_sizes.size()); }
    std::set<BlockKey> pattern() const;
    Eigen::MatrixXd to_dense() const;
    Eigen::MatrixXd rhs_dense() const;
};

/// Contributions must be ordered by domain id; blocks sum in that order.
BlockMatrix assemble_dual_matrix(const std::vector<DtnContribution>& contribs, const ReducedLayout& layout);

std::string block_matrix_to_json(const BlockMatrix& k);
BlockMatrix block_matrix_from_json(const std::string& text);

struct SymbolicFactorization {
    int num_blocks = 0;
    std::set<BlockKey> original;
    /// Blocks of L (lower, diagonal included) after fill.
    std::set<BlockKey> fill_pattern;
    /// For each column k, rows i > k with (i, k) in the fill pattern.
    std::vector<std::vector<int>> col_rows;
    /// Pivot columns k that update block (i, j), ascending.
    std::map<BlockKey, std::vector<int>> update_sources;
    /// Block elimination tree, -1 for roots.
    std::vector<int> parent;

    bool is_fill(const BlockKey& b) const { return fill_pattern.count(b) && !original.count(b); }
};

/// Throws InvalidArgument on an upper entry, an out-of-range index or a
/// missing diagonal block.
SymbolicFactorization symbolic_block_factorize(int num_blocks, const std::set<BlockKey>& pattern);
SymbolicFactorization symbolic_block_factorize(const std::set<BlockKey>& pattern);

/// Dense LDL^T with Bunch-Kaufman pivoting of a diagonal block (lower triangle).
DenseLdlt kernel_factorize_block(const Eigen::MatrixXd& kii);

struct TrisolveResult {
    Eigen::MatrixXd l;  // K P^T L^{-T} D^{-1}
    Eigen::MatrixXd w;  // K P^T L^{-T}, i.e. l * D
};

/// Solves L_ik D_kk L_kk^T = K_ik P_k^T.
TrisolveResult kernel_trisolve_block(Eigen::MatrixXd kik, const DenseLdlt& fkk);

/// K_ij -= W_ik L_jk^T; for diagonal destinations only the lower triangle is written.
void kernel_update_block(Eigen::MatrixXd& kij, const Eigen::MatrixXd& wik, const Eigen::MatrixXd& ljk, bool diagonal);
/// K_ij -= L_ik D_kk L_jk^T.
void kernel_update_block(Eigen::MatrixXd& kij, const Eigen::MatrixXd& lik, const DenseLdlt& dkk,
                         const Eigen::MatrixXd& ljk, bool diagonal);

// Block substitution steps. Forward: y_k = L_kk^{-1} P_k c_k, c_i -= L_ik y_k.
// Backward: x_k = P_k^T L_kk^{-T} e_k, e_j -= L_kj^T x_k.
void solve_fwd_diag(const DenseLdlt& fkk, Eigen::MatrixXd& c);
void solve_fwd_offdiag(Eigen::MatrixXd& ci, const Eigen::MatrixXd& lik, const Eigen::MatrixXd& yk);
void solve_bwd_offdiag(Eigen::MatrixXd& ej, const Eigen::MatrixXd& lkj, const Eigen::MatrixXd& xk);
void solve_bwd_diag(const DenseLdlt& fkk, Eigen::MatrixXd& e);

struct BlockFactor {
    std::vector<int> block_sizes;
    std::vector<DenseLdlt> diag;
    std::map<BlockKey, Eigen::MatrixXd> lower;  // strictly lower blocks of L
    /// Workspace blocks W = L D kept for inspection by tests.
    std::map<BlockKey, Eigen::MatrixXd> work;

    /// The matrix this factor represents, as a dense symmetric matrix.
    Eigen::MatrixXd reconstruct() const;
};

/// Right-looking block LDL^T in block order 0..D-1. Throws SingularBlockError.
BlockFactor sequential_block_ldlt(const BlockMatrix& k, const SymbolicFactorization& symb);

/// Forward substitution, pivot solve, backward substitution.
std::vector<Eigen::MatrixXd> block_solve(const BlockFactor& f, const SymbolicFactorization& symb,
                                         std::vector<Eigen::MatrixXd> rhs_blocks);

Eigen::MatrixXd stack_blocks(const std::vector<Eigen::MatrixXd>& blocks);

}  // namespace d3m
