#include "d3m/primal.hpp"

#include "d3m/error.hpp"

namespace d3m {

void InteriorFactor::forward(Eigen::Ref<Eigen::MatrixXd> x) const {
    if (storage == FactorStorage::dense) dense.forward(x);
    else sparse.forward(x);
}

void InteriorFactor::apply_d_inverse(Eigen::Ref<Eigen::MatrixXd> x) const {
    if (storage == FactorStorage::dense) dense.apply_d_inverse(x);
    else sparse.apply_d_inverse(x);
}

void InteriorFactor::backward(Eigen::Ref<Eigen::MatrixXd> x) const {
    if (storage == FactorStorage::dense) dense.backward(x);
    else sparse.backward(x);
}

void InteriorFactor::solve(Eigen::Ref<Eigen::MatrixXd> x) const {
    if (size() == 0) return;
    forward(x);
    apply_d_inverse(x);
    backward(x);
}

Eigen::MatrixXd InteriorFactor::l_matrix() const {
    if (storage == FactorStorage::sparse) return sparse.dense_l();
    return dense.l.triangularView<Eigen::UnitLower>();
}

Eigen::MatrixXd InteriorFactor::d_matrix() const {
    if (storage == FactorStorage::sparse) return sparse.d.asDiagonal();
    return dense.block_d();
}

InteriorFactor factor_interior(const DomainProblem& dp, const FactorOptions& opts) {
    InteriorFactor f;
    f.domain_id = dp.domain_id;
    const int n = dp.num_interior();
    if (n == 0) return f;

    if (n > opts.dense_crossover) {
        auto sp = sparse_ldlt(dp.a_ii, amd_order(dp.a_ii), opts.sparse_pivot_tol);
        if (sp) {
            f.storage = FactorStorage::sparse;
            f.sparse = std::move(*sp);
            return f;
        }
    }
    try {
        f.storage = FactorStorage::dense;
        f.dense = bunch_kaufman(Eigen::MatrixXd(dp.a_ii));
    } catch (const ZeroPivotError& e) {
        throw SingularDomainError(dp.domain_id, e.pivot());
    }
    return f;
}

Eigen::MatrixXd compute_schur(const DomainProblem& dp, const InteriorFactor& f) {
    Eigen::MatrixXd s = dp.a_bb_local;
    if (dp.num_interior() == 0 || dp.num_interface() == 0) return s;
    Eigen::MatrixXd y = Eigen::MatrixXd(dp.a_ib);
    f.forward(y);
    Eigen::MatrixXd z = y;
    f.apply_d_inverse(z);
    s.noalias() -= y.transpose() * z;
    Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    return sym;
}

Eigen::MatrixXd reduce_rhs(const DomainProblem& dp, const InteriorFactor& f, const Eigen::MatrixXd& f_interior,
                           const Eigen::MatrixXd& f_interface) {
    if (f_interior.rows() != dp.num_interior() || f_interface.rows() != dp.num_interface() ||
        f_interior.cols() != f_interface.cols())
        throw InvalidArgument("reduce_rhs: dimension mismatch");
    Eigen::MatrixXd g = dp.interface_weight.asDiagonal() * f_interface;
    if (dp.num_interior() == 0 || dp.num_interface() == 0) return g;
    Eigen::MatrixXd v = f_interior;
    f.solve(v);
    g.noalias() -= dp.a_ib.transpose() * v;
    return g;
}

DtnContribution compute_dtn(const DomainProblem& dp, const InteriorFactor& f, const Eigen::MatrixXd& rhs) {
    if (f.domain_id != dp.domain_id || f.size() != dp.num_interior())
        throw InvalidArgument("compute_dtn: factor belongs to another domain");
    DtnContribution c;
    c.domain_id = dp.domain_id;
    c.s_local = compute_schur(dp, f);
    c.g_local = reduce_rhs(dp, f, gather_rows(rhs, dp.interior), gather_rows(rhs, dp.interface));
    c.interface_dofs = dp.interface;
    return c;
}

Eigen::MatrixXd recover_primal(const DomainProblem& dp, const InteriorFactor& f, const Eigen::MatrixXd& u_interface,
                               const Eigen::MatrixXd& f_interior) {
    if (u_interface.rows() != dp.num_interface() || f_interior.rows() != dp.num_interior() ||
        u_interface.cols() != f_interior.cols() || f.size() != dp.num_interior())
        throw InvalidArgument("recover_primal: dimension mismatch");
    Eigen::MatrixXd u = f_interior;
    if (dp.num_interior() == 0) return u;
    if (dp.num_interface() > 0) u.noalias() -= dp.a_ib * u_interface;
    f.solve(u);
    return u;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& b, const std::vector<int>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), b.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = b.row(idx[i]);
    return out;
}

}  // namespace d3m
