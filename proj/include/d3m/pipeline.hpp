#pragma once

#include <vector>

#include <Eigen/Dense>

#include "d3m/blockmat.hpp"
#include "d3m/primal.hpp"
#include "d3m/problem.hpp"
#include "d3m/taskgraph.hpp"

namespace d3m {

struct PipelineOptions {
    int num_domains = 2;
    PartitionStrategy partitioner = PartitionStrategy::grid;
    FactorOptions factor;
    AgglomerationPolicy agglomerate = AgglomerationPolicy::per_block_column;
};

/// Everything the executor reads: immutable once built.
struct PreparedProblem {
    SparseSystem sys;
    Partition part;
    std::vector<DomainProblem> domains;
    ReducedLayout layout;
    SymbolicFactorization symb;
    TaskGraph graph;  // unweighted
    Eigen::MatrixXd rhs;
    FactorOptions factor;
};

PreparedProblem prepare_problem(SparseSystem sys, const PipelineOptions& opts);
PreparedProblem prepare_problem(SparseSystem sys, Partition part, const PipelineOptions& opts);

/// ||A X - B||_F / ||B||_F.
double relative_residual(const SparseSystem& sys, const Eigen::MatrixXd& x);

/// The pipeline through the module-level functions, without a task graph.
Eigen::MatrixXd solve_reference(const PreparedProblem& pp);

}  // namespace d3m
