#include "d3m/sparse_ldlt.hpp"

#include <cmath>

#include <Eigen/OrderingMethods>

namespace d3m {

void SparseLdlt::forward(Eigen::Ref<Eigen::MatrixXd> x) const {
    Eigen::MatrixXd px(n, x.cols());
    for (int i = 0; i < n; ++i) px.row(i) = x.row(perm[i]);
    for (Eigen::Index r = 0; r < px.cols(); ++r) {
        double* y = px.col(r).data();
        for (int j = 0; j < n; ++j) {
            const double yj = y[j];
            if (yj == 0.0) continue;
            for (auto p = col_ptr[j]; p < col_ptr[j + 1]; ++p) y[row_idx[p]] -= val[p] * yj;
        }
    }
    x = px;
}

void SparseLdlt::apply_d_inverse(Eigen::Ref<Eigen::MatrixXd> x) const {
    for (int i = 0; i < n; ++i) x.row(i) /= d[i];
}

void SparseLdlt::backward(Eigen::Ref<Eigen::MatrixXd> x) const {
    Eigen::MatrixXd y = x;
    for (Eigen::Index r = 0; r < y.cols(); ++r) {
        double* v = y.col(r).data();
        for (int j = n - 1; j >= 0; --j) {
            double s = v[j];
            for (auto p = col_ptr[j]; p < col_ptr[j + 1]; ++p) s -= val[p] * v[row_idx[p]];
            v[j] = s;
        }
    }
    for (int i = 0; i < n; ++i) x.row(perm[i]) = y.row(i);
}

Eigen::MatrixXd SparseLdlt::dense_l() const {
    Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
    for (int j = 0; j < n; ++j)
        for (auto p = col_ptr[j]; p < col_ptr[j + 1]; ++p) l(row_idx[p], j) = val[p];
    return l;
}

std::vector<int> amd_order(const Eigen::SparseMatrix<double>& a) {
    Eigen::AMDOrdering<int> amd;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
    amd(a, p);
    return {p.indices().data(), p.indices().data() + p.indices().size()};
}

std::optional<SparseLdlt> sparse_ldlt(const Eigen::SparseMatrix<double>& a, const std::vector<int>& perm,
                                      double pivot_tol) {
    const int n = static_cast<int>(a.rows());
    SparseLdlt f;
    f.n = n;
    f.perm = perm;
    std::vector<int> inv(n);
    for (int i = 0; i < n; ++i) inv[perm[i]] = i;

    // Upper triangle of P A P^T, column compressed.
    std::vector<std::int64_t> cp(n + 1, 0);
    double amax = 0.0;
    for (int j = 0; j < a.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(a, j); it; ++it) {
            const int r = inv[it.row()], c = inv[j];
            if (r <= c) ++cp[c + 1];
            amax = std::max(amax, std::abs(it.value()));
        }
    }
    for (int j = 0; j < n; ++j) cp[j + 1] += cp[j];
    std::vector<int> ci(cp[n]);
    std::vector<double> cx(cp[n]);
    {
        std::vector<std::int64_t> next(cp.begin(), cp.end() - 1);
        for (int j = 0; j < a.outerSize(); ++j) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(a, j); it; ++it) {
                const int r = inv[it.row()], c = inv[j];
                if (r > c) continue;
                ci[next[c]] = r;
                cx[next[c]++] = it.value();
            }
        }
    }

    // Elimination tree and column counts.
    std::vector<int> parent(n, -1), flag(n, -1), lnz(n, 0);
    for (int k = 0; k < n; ++k) {
        flag[k] = k;
        for (auto p = cp[k]; p < cp[k + 1]; ++p) {
            for (int i = ci[p]; flag[i] != k; i = parent[i]) {
                if (parent[i] == -1) parent[i] = k;
                ++lnz[i];
                flag[i] = k;
            }
        }
    }
    f.col_ptr.assign(n + 1, 0);
    for (int k = 0; k < n; ++k) f.col_ptr[k + 1] = f.col_ptr[k] + lnz[k];
    f.row_idx.resize(f.col_ptr[n]);
    f.val.resize(f.col_ptr[n]);
    f.d = Eigen::VectorXd::Zero(n);

    std::vector<double> y(n, 0.0);
    std::vector<int> pattern(n);
    std::fill(lnz.begin(), lnz.end(), 0);
    const double threshold = pivot_tol * amax;
    for (int k = 0; k < n; ++k) {
        int top = n;
        flag[k] = k;
        for (auto p = cp[k]; p < cp[k + 1]; ++p) {
            int i = ci[p];
            y[i] += cx[p];
            int len = 0;
            for (; flag[i] != k; i = parent[i]) {
                pattern[len++] = i;
                flag[i] = k;
            }
            while (len > 0) pattern[--top] = pattern[--len];
        }
        double dk = y[k];
        y[k] = 0.0;
        for (; top < n; ++top) {
            const int i = pattern[top];
            const double yi = y[i];
            y[i] = 0.0;
            const auto p2 = f.col_ptr[i] + lnz[i];
            for (auto p = f.col_ptr[i]; p < p2; ++p) y[f.row_idx[p]] -= f.val[p] * yi;
            const double lki = yi / f.d[i];
            dk -= lki * yi;
            f.row_idx[p2] = k;
            f.val[p2] = lki;
            ++lnz[i];
        }
        if (!(std::abs(dk) > threshold)) return std::nullopt;
        f.d[k] = dk;
    }
    return f;
}

}  // namespace d3m
