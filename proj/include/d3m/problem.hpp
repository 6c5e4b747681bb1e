#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace d3m {

enum class StencilKind { laplacian, helmholtz };

struct Stencil {
    StencilKind kind = StencilKind::laplacian;
    double wavenumber = 0.0;  // helmholtz only

    static Stencil laplacian() { return {}; }
    static Stencil helmholtz(double k) { return {StencilKind::helmholtz, k}; }
};

enum class RhsKind { ones, random };

/// Global symmetric sparse system. Only the lower triangle is stored, as CSR
/// with ascending columns per row; the diagonal is always present.
struct SparseSystem {
    int n = 0;
    std::vector<std::int64_t> row_ptr;
    std::vector<int> col_idx;
    std::vector<double> values;
    std::vector<Eigen::VectorXd> rhs;
    /// Diagonal shift applied to every interior block before factorization.
    double shift = 0.0;
    /// Lattice extents when the system came from a grid generator, else empty.
    std::vector<int> grid_dims;

    std::int64_t nnz_lower() const { return static_cast<std::int64_t>(col_idx.size()); }
    int num_rhs() const { return static_cast<int>(rhs.size()); }

    /// Stored value at (i, j) in either triangle, 0 when absent.
    double coeff(int i, int j) const;

    /// Both triangles, column major.
    Eigen::SparseMatrix<double> full() const;
    Eigen::MatrixXd rhs_matrix() const;

    /// Throws InvalidArgument when a structural invariant is broken.
    void validate() const;

    /// Builds from lower-triangle triplets (row >= col). Entries repeating a
    /// position are summed; missing diagonal entries become explicit zeros.
    static SparseSystem from_lower_triplets(int n, const std::vector<Eigen::Triplet<double>>& lower);
};

/// Matrix, right-hand sides and shift compare equal; grid_dims is ignored.
bool operator==(const SparseSystem& a, const SparseSystem& b);

struct Partition {
    int num_domains = 0;
    std::vector<int> owner;

    std::vector<int> sizes() const;
    void validate(int n) const;
};

/// One domain: its interior DOFs and the separator DOFs it touches.
struct DomainProblem {
    int domain_id = 0;
    std::vector<int> interior;   // ascending global DOF ids
    std::vector<int> interface;  // ascending global DOF ids
    Eigen::SparseMatrix<double> a_ii;  // both triangles, shift on the diagonal
    Eigen::SparseMatrix<double> a_ib;  // |interior| x |interface|
    Eigen::MatrixXd a_bb_local;        // ownership-weighted separator block
    /// Weight of each interface DOF's diagonal entry; reused for the RHS.
    Eigen::VectorXd interface_weight;
    std::vector<int> neighbor_ids;

    int num_interior() const { return static_cast<int>(interior.size()); }
    int num_interface() const { return static_cast<int>(interface.size()); }
    std::int64_t interior_nnz() const { return a_ii.nonZeros(); }
};

enum class PartitionStrategy { grid, greedy_bfs };

SparseSystem generate_grid_problem(const std::vector<int>& dims, Stencil stencil, std::uint64_t seed = 0,
                                   RhsKind rhs = RhsKind::ones);

/// Matrix Market coordinate, real symmetric. RHS defaults to all ones.
SparseSystem load_system(const std::filesystem::path& path);
void save_system(const SparseSystem& sys, const std::filesystem::path& path);

Partition partition_domains(const SparseSystem& sys, int num_domains, PartitionStrategy strategy);

/// True when max domain size <= ceil(n / D) * (1 + tol).
bool partition_balanced(const Partition& part, double imbalance_tol = 0.25);

/// Separator DOFs: every DOF coupled to a DOF owned by a higher-numbered domain.
std::vector<char> separator_mask(const SparseSystem& sys, const Partition& part);

std::vector<DomainProblem> split_domain_dofs(const SparseSystem& sys, const Partition& part);

/// One domain id per line; line number is the DOF index.
Partition load_partition(const std::filesystem::path& path);
void save_partition(const Partition& part, const std::filesystem::path& path);

}  // namespace d3m
