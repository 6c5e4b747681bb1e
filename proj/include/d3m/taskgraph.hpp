#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "d3m/blockmat.hpp"
#include "d3m/problem.hpp"

namespace d3m {

enum class PTaskKind {
    interior_factor,
    dtn,
    rhs_reduce,
    blk_factorize,
    blk_trisolve,
    blk_update,
    fwd_solve_blk,
    diag_solve_blk,
    bwd_solve_blk,
    recover,
};

enum class Phase { primal_reduction, dual, primal_recovery };

const char* to_string(PTaskKind k);
const char* to_string(Phase p);
PTaskKind ptask_kind_from_string(const std::string& s);
Phase phase_from_string(const std::string& s);
Phase phase_of(PTaskKind k);

/// Which part of a ptask's output is read. Trisolve produces L and W = L D.
enum ItemPart : int { part_whole = 0, part_l = 1, part_w = 2 };

struct PTaskInput {
    int ptask = -1;
    int part = part_whole;
    std::int64_t bytes = 0;
};

/// One kernel invocation. Every ptask produces exactly one data item, keyed by
/// its id.
///
/// Operands by kind:
///   interior_factor, dtn, rhs_reduce, recover: `domain`
///   blk_factorize(k):        row = col = pivot = k
///   blk_trisolve(i, k):      row = i, col = pivot = k
///   blk_update(i, j, k):     K_ij -= W_ik L_jk^T
///   fwd_solve_blk(i, k):     c_i -= L_ik y_k, or y_k = L_kk^{-1} P_k c_k when i == k
///   diag_solve_blk(k):       z_k = D_k^{-1} y_k
///   bwd_solve_blk(j, i):     e_j -= L_ij^T x_i, or x_j = P_j^T L_jj^{-T} e_j when i == j
struct PTask {
    int id = 0;
    PTaskKind kind = PTaskKind::interior_factor;
    int domain = -1;
    int row = -1;
    int col = -1;
    int pivot = -1;
    /// Ptask whose output this one overwrites in place, -1 when it starts a chain.
    int chain_prev = -1;
    /// Chain starters of a block or RHS segment: the dtn / rhs_reduce ptasks
    /// whose contributions are summed (ascending domain) into a zero block.
    std::vector<int> assemble_from;
    /// Every input, chain predecessor and assembly sources included.
    std::vector<PTaskInput> inputs;
    std::int64_t output_bytes = 0;
    double weight = 0.0;
    int task = -1;
};

struct Task {
    int id = 0;
    Phase phase = Phase::dual;
    std::vector<int> ptasks;
    double weight = 0.0;
};

struct Edge {
    int from = 0;
    int to = 0;
    std::int64_t bytes = 0;
};

struct DomainStats {
    int n_interior = 0;
    std::int64_t interior_nnz = 0;
    int n_interface = 0;
};

struct TaskGraph {
    std::vector<PTask> ptasks;
    std::vector<Task> tasks;
    std::vector<Edge> edges;  // sorted by (from, to)
    std::vector<std::vector<int>> succ;  // edge indices
    std::vector<std::vector<int>> pred;

    std::vector<int> block_sizes;
    int nrhs = 0;
    std::vector<DomainStats> domains;

    int num_tasks() const { return static_cast<int>(tasks.size()); }
    double total_work() const;

    /// Kahn order with ascending id among ready tasks. Throws GraphError with a
    /// cycle witness.
    std::vector<int> topological_order() const;

    /// Acyclicity plus the phase reachability invariants.
    void validate() const;

    /// Re-sums task weights from ptask weights.
    void refresh_task_weights();

    std::string to_dot() const;
    std::string to_json() const;

    /// Plain weighted DAG without ptask payloads, for scheduler tests.
    static TaskGraph synthetic(const std::vector<double>& weights, const std::vector<Edge>& edges);
};

/// Symbolic replay of the sequential pipeline. Primal ptasks of one domain
/// form one task; every other ptask is its own task.
TaskGraph build_task_graph(const SymbolicFactorization& symb, const std::vector<DomainProblem>& domains,
                           const ReducedLayout& layout, int nrhs);

/// Regroups ptasks into tasks. `groups` lists ptask ids per task, each group
/// in execution order; tasks are renumbered by their first ptask id.
TaskGraph regroup(const TaskGraph& g, std::vector<std::vector<int>> groups);

enum class AgglomerationPolicy { per_block_column, none };

/// per_block_column merges trisolve(i, k) with the updates (i, j, k) that
/// consume its W_ik.
TaskGraph agglomerate(const TaskGraph& g, AgglomerationPolicy policy);

struct CriticalPath {
    double length = 0.0;
    std::vector<int> path;
};

/// Longest computation-only path; ties go to the lower task id.
CriticalPath critical_path(const TaskGraph& g);

}  // namespace d3m
