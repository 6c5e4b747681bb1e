#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace d3m {

/// Thrown by the factorization kernels; callers attach the domain or block.
class ZeroPivotError : public std::runtime_error {
public:
    explicit ZeroPivotError(int pivot)
        : std::runtime_error("zero pivot at " + std::to_string(pivot)), pivot_(pivot) {}
    int pivot() const { return pivot_; }

private:
    int pivot_;
};

/// P A P^T = L D L^T with unit lower L and D made of 1x1 and 2x2 blocks.
struct DenseLdlt {
    Eigen::MatrixXd l;
    /// Row i of P A P^T is row perm[i] of A.
    std::vector<int> perm;
    Eigen::VectorXd d;
    /// e[i] = D(i + 1, i) when a 2x2 pivot starts at i, else 0.
    Eigen::VectorXd e;
    /// 1 or 2 at the first index of a pivot, 0 at the second row of a 2x2.
    std::vector<std::int8_t> pivot_size;

    int size() const { return static_cast<int>(perm.size()); }
    int num_2x2() const;
    std::int64_t bytes() const { return 8 * (l.size() + d.size() + e.size()); }

    /// x <- L^{-1} P x
    void forward(Eigen::Ref<Eigen::MatrixXd> x) const;
    /// x <- D^{-1} x
    void apply_d_inverse(Eigen::Ref<Eigen::MatrixXd> x) const;
    /// x <- P^T L^{-T} x
    void backward(Eigen::Ref<Eigen::MatrixXd> x) const;
    void solve(Eigen::Ref<Eigen::MatrixXd> x) const;

    /// w <- w D^{-1}
    void apply_d_inverse_right(Eigen::Ref<Eigen::MatrixXd> w) const;

    Eigen::MatrixXd block_d() const;
    /// P^T L D L^T P, which should reproduce the factored matrix.
    Eigen::MatrixXd reconstruct() const;
};

/// Bunch-Kaufman factorization reading only the lower triangle of `a`.
/// Throws ZeroPivotError when a column is exactly zero.
DenseLdlt bunch_kaufman(Eigen::MatrixXd a);

}  // namespace d3m
