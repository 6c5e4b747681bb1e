#include "d3m/pipeline.hpp"

#include "d3m/error.hpp"

namespace d3m {

PreparedProblem prepare_problem(SparseSystem sys, const PipelineOptions& opts) {
    sys.validate();
    Partition part = partition_domains(sys, opts.num_domains, opts.partitioner);
    return prepare_problem(std::move(sys), std::move(part), opts);
}

PreparedProblem prepare_problem(SparseSystem sys, Partition part, const PipelineOptions& opts) {
    sys.validate();
    part.validate(sys.n);
    PreparedProblem pp;
    pp.factor = opts.factor;
    pp.domains = split_domain_dofs(sys, part);
    pp.layout = build_reduced_layout(pp.domains, part);
    pp.symb = symbolic_block_factorize(pp.layout.num_blocks(), pp.layout.pattern());
    pp.rhs = sys.rhs_matrix();
    pp.graph = agglomerate(build_task_graph(pp.symb, pp.domains, pp.layout, static_cast<int>(pp.rhs.cols())),
                           opts.agglomerate);
    pp.sys = std::move(sys);
    pp.part = std::move(part);
    return pp;
}

double relative_residual(const SparseSystem& sys, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd b = sys.rhs_matrix();
    const Eigen::MatrixXd r = sys.full() * x - b;
    const double nb = b.norm();
    return nb > 0.0 ? r.norm() / nb : r.norm();
}

Eigen::MatrixXd solve_reference(const PreparedProblem& pp) {
    const int nd = static_cast<int>(pp.domains.size());
    std::vector<InteriorFactor> factors;
    std::vector<DtnContribution> contribs;
    for (int d = 0; d < nd; ++d) {
        factors.push_back(factor_interior(pp.domains[d], pp.factor));
        contribs.push_back(compute_dtn(pp.domains[d], factors.back(), pp.rhs));
    }
    const BlockMatrix k = assemble_dual_matrix(contribs, pp.layout);
    const BlockFactor f = sequential_block_ldlt(k, pp.symb);
    const auto xb = block_solve(f, pp.symb, k.rhs_blocks);

    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(pp.sys.n, pp.rhs.cols());
    for (int b = 0; b < pp.layout.num_blocks(); ++b)
        for (int o = 0; o < pp.layout.block_size(b); ++o) x.row(pp.layout.block_dofs[b][o]) = xb[b].row(o);
    for (int d = 0; d < nd; ++d) {
        const auto& dp = pp.domains[d];
        const Eigen::MatrixXd ub = gather_rows(x, dp.interface);
        const Eigen::MatrixXd ui = recover_primal(dp, factors[d], ub, gather_rows(pp.rhs, dp.interior));
        for (int i = 0; i < dp.num_interior(); ++i) x.row(dp.interior[i]) = ui.row(i);
    }
    return x;
}

}  // namespace d3m
