#include "d3m/dense_ldlt.hpp"

#include <cmath>
#include <numeric>

namespace d3m {

int DenseLdlt::num_2x2() const {
    int c = 0;
    for (auto s : pivot_size) c += s == 2;
    return c;
}

void DenseLdlt::forward(Eigen::Ref<Eigen::MatrixXd> x) const {
    const int n = size();
    if (n == 0) return;
    Eigen::MatrixXd px(n, x.cols());
    for (int i = 0; i < n; ++i) px.row(i) = x.row(perm[i]);
    l.triangularView<Eigen::UnitLower>().solveInPlace(px);
    x = px;
}

void DenseLdlt::apply_d_inverse(Eigen::Ref<Eigen::MatrixXd> x) const {
    const int n = size();
    for (int i = 0; i < n;) {
        if (pivot_size[i] == 1) {
            x.row(i) /= d[i];
            ++i;
        } else {
            const double a = d[i], b = e[i], c = d[i + 1];
            const double det = a * c - b * b;
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                const double u = x(i, j), v = x(i + 1, j);
                x(i, j) = (c * u - b * v) / det;
                x(i + 1, j) = (a * v - b * u) / det;
            }
            i += 2;
        }
    }
}

void DenseLdlt::backward(Eigen::Ref<Eigen::MatrixXd> x) const {
    const int n = size();
    if (n == 0) return;
    Eigen::MatrixXd y = x;
    l.transpose().triangularView<Eigen::UnitUpper>().solveInPlace(y);
    for (int i = 0; i < n; ++i) x.row(perm[i]) = y.row(i);
}

void DenseLdlt::solve(Eigen::Ref<Eigen::MatrixXd> x) const {
    forward(x);
    apply_d_inverse(x);
    backward(x);
}

void DenseLdlt::apply_d_inverse_right(Eigen::Ref<Eigen::MatrixXd> w) const {
    const int n = size();
    for (int i = 0; i < n;) {
        if (pivot_size[i] == 1) {
            w.col(i) /= d[i];
            ++i;
        } else {
            const double a = d[i], b = e[i], c = d[i + 1];
            const double det = a * c - b * b;
            for (Eigen::Index r = 0; r < w.rows(); ++r) {
                const double u = w(r, i), v = w(r, i + 1);
                w(r, i) = (c * u - b * v) / det;
                w(r, i + 1) = (a * v - b * u) / det;
            }
            i += 2;
        }
    }
}

Eigen::MatrixXd DenseLdlt::block_d() const {
    const int n = size();
    Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) dm(i, i) = d[i];
    for (int i = 0; i + 1 < n; ++i) {
        if (pivot_size[i] == 2) dm(i + 1, i) = dm(i, i + 1) = e[i];
    }
    return dm;
}

Eigen::MatrixXd DenseLdlt::reconstruct() const {
    const int n = size();
    Eigen::MatrixXd lu = l.triangularView<Eigen::UnitLower>();
    Eigen::MatrixXd pap = lu * block_d() * lu.transpose();
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(perm[i], perm[j]) = pap(i, j);
    return a;
}

namespace {

// Symmetric interchange of p < q inside the trailing block [k, n) of a
// lower-stored matrix.
void swap_lower(Eigen::MatrixXd& a, int k, int p, int q) {
    const int n = static_cast<int>(a.rows());
    std::swap(a(p, p), a(q, q));
    for (int j = k; j < p; ++j) std::swap(a(p, j), a(q, j));
    for (int j = p + 1; j < q; ++j) std::swap(a(j, p), a(q, j));
    for (int i = q + 1; i < n; ++i) std::swap(a(i, p), a(i, q));
}

}  // namespace

DenseLdlt bunch_kaufman(Eigen::MatrixXd a) {
    const int n = static_cast<int>(a.rows());
    const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;

    DenseLdlt f;
    f.l = Eigen::MatrixXd::Zero(n, n);
    f.perm.resize(n);
    std::iota(f.perm.begin(), f.perm.end(), 0);
    f.d = Eigen::VectorXd::Zero(n);
    f.e = Eigen::VectorXd::Zero(n);
    f.pivot_size.assign(n, 0);

    int k = 0;
    while (k < n) {
        const int m = n - k - 1;
        const double absakk = std::abs(a(k, k));
        double colmax = 0.0;
        int imax = k;
        if (m > 0) {
            Eigen::Index idx;
            colmax = a.col(k).tail(m).cwiseAbs().maxCoeff(&idx);
            imax = k + 1 + static_cast<int>(idx);
        }
        if (absakk == 0.0 && colmax == 0.0) throw ZeroPivotError(k);

        int kstep = 1, kp = k;
        if (absakk < alpha * colmax) {
            // largest off-diagonal magnitude in row/column imax of the trailing block
            double rowmax = 0.0;
            if (imax > k) rowmax = a.row(imax).segment(k, imax - k).cwiseAbs().maxCoeff();
            if (imax + 1 < n) rowmax = std::max(rowmax, a.col(imax).tail(n - imax - 1).cwiseAbs().maxCoeff());
            if (absakk >= alpha * colmax * (colmax / rowmax)) {
                kp = k;
            } else if (std::abs(a(imax, imax)) >= alpha * rowmax) {
                kp = imax;
            } else {
                kp = imax;
                kstep = 2;
            }
        }

        const int kk = k + kstep - 1;
        if (kp != kk) {
            swap_lower(a, k, kk, kp);
            if (k > 0) f.l.row(kk).head(k).swap(f.l.row(kp).head(k));
            std::swap(f.perm[kk], f.perm[kp]);
        }

        if (kstep == 1) {
            const double dk = a(k, k);
            f.d[k] = dk;
            f.pivot_size[k] = 1;
            f.l(k, k) = 1.0;
            if (m > 0) {
                Eigen::VectorXd v = a.col(k).tail(m);
                Eigen::VectorXd lk = v / dk;
                f.l.col(k).tail(m) = lk;
                a.bottomRightCorner(m, m).triangularView<Eigen::Lower>() -= lk * v.transpose();
            }
        } else {
            const double d11 = a(k, k), d21 = a(k + 1, k), d22 = a(k + 1, k + 1);
            f.d[k] = d11;
            f.d[k + 1] = d22;
            f.e[k] = d21;
            f.pivot_size[k] = 2;
            f.l(k, k) = f.l(k + 1, k + 1) = 1.0;
            const int r = n - k - 2;
            if (r > 0) {
                Eigen::MatrixXd v = a.block(k + 2, k, r, 2);
                const double det = d11 * d22 - d21 * d21;
                Eigen::MatrixXd lk(r, 2);
                lk.col(0) = (d22 * v.col(0) - d21 * v.col(1)) / det;
                lk.col(1) = (d11 * v.col(1) - d21 * v.col(0)) / det;
                f.l.block(k + 2, k, r, 2) = lk;
                a.bottomRightCorner(r, r).triangularView<Eigen::Lower>() -= lk * v.transpose();
            }
        }
        k += kstep;
    }
    return f;
}

}  // namespace d3m
