#include "d3m/taskgraph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "d3m/error.hpp"

namespace d3m {

namespace {

constexpr const char* kKindNames[] = {"interior_factor", "dtn",           "rhs_reduce",     "blk_factorize",
                                      "blk_trisolve",    "blk_update",    "fwd_solve_blk",  "diag_solve_blk",
                                      "bwd_solve_blk",   "recover"};
constexpr const char* kPhaseNames[] = {"primal_reduction", "dual", "primal_recovery"};

std::int64_t dense_bytes(std::int64_t rows, std::int64_t cols) { return 8 * rows * cols; }

// Transfer size of an interior factor: dense below the crossover, otherwise a
// fill estimate proportional to the matrix nonzeros.
std::int64_t interior_factor_bytes(const DomainStats& s) {
    if (s.n_interior <= 256) return dense_bytes(s.n_interior, s.n_interior);
    return 8 * (8 * s.interior_nnz + s.n_interior);
}

}  // namespace

const char* to_string(PTaskKind k) { return kKindNames[static_cast<int>(k)]; }
const char* to_string(Phase p) { return kPhaseNames[static_cast<int>(p)]; }

PTaskKind ptask_kind_from_string(const std::string& s) {
    for (int i = 0; i < 10; ++i)
        if (s == kKindNames[i]) return static_cast<PTaskKind>(i);
    throw InvalidArgument("unknown ptask kind '" + s + "'");
}

Phase phase_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (s == kPhaseNames[i]) return static_cast<Phase>(i);
    throw InvalidArgument("unknown phase '" + s + "'");
}

Phase phase_of(PTaskKind k) {
    switch (k) {
    case PTaskKind::interior_factor:
    case PTaskKind::dtn:
    case PTaskKind::rhs_reduce:
        return Phase::primal_reduction;
    case PTaskKind::recover:
        return Phase::primal_recovery;
    default:
        return Phase::dual;
    }
}

double TaskGraph::total_work() const {
    double w = 0.0;
    for (const auto& t : tasks) w += t.weight;
    return w;
}

std::vector<int> TaskGraph::topological_order() const {
    const int n = num_tasks();
    std::vector<int> indeg(n, 0);
    for (const auto& e : edges) ++indeg[e.to];
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int v = 0; v < n; ++v)
        if (indeg[v] == 0) ready.push(v);
    std::vector<int> order;
    order.reserve(n);
    while (!ready.empty()) {
        const int v = ready.top();
        ready.pop();
        order.push_back(v);
        for (int e : succ[v])
            if (--indeg[edges[e].to] == 0) ready.push(edges[e].to);
    }
    if (static_cast<int>(order.size()) == n) return order;

    // Every leftover node has a leftover predecessor; walk back until a repeat.
    int v = 0;
    while (indeg[v] == 0) ++v;
    std::vector<int> seen(n, -1), walk;
    while (seen[v] < 0) {
        seen[v] = static_cast<int>(walk.size());
        walk.push_back(v);
        for (int e : pred[v])
            if (indeg[edges[e].from] > 0) {
                v = edges[e].from;
                break;
            }
    }
    std::vector<int> cycle(walk.begin() + seen[v], walk.end());
    std::reverse(cycle.begin(), cycle.end());
    std::string msg = "task graph has a cycle:";
    for (int c : cycle) msg += " " + std::to_string(c) + " ->";
    msg += " " + std::to_string(cycle.front());
    throw GraphError(msg);
}

void TaskGraph::validate() const {
    topological_order();
    for (const auto& t : tasks)
        if (!(t.weight >= 0.0) || !std::isfinite(t.weight))
            throw GraphError("task " + std::to_string(t.id) + " has an invalid weight");

    const int n = num_tasks();
    auto reach_from = [&](Phase src) {
        std::vector<char> seen(n, 0);
        std::vector<int> stack;
        for (const auto& t : tasks)
            if (t.phase == src) seen[t.id] = 1, stack.push_back(t.id);
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int e : succ[v])
                if (!seen[edges[e].to]) seen[edges[e].to] = 1, stack.push_back(edges[e].to);
        }
        return seen;
    };
    const bool has_primal = std::any_of(tasks.begin(), tasks.end(),
                                        [](const Task& t) { return t.phase == Phase::primal_reduction; });
    if (!has_primal) return;
    const auto from_primal = reach_from(Phase::primal_reduction);
    for (const auto& t : tasks)
        if (t.phase == Phase::dual && !from_primal[t.id])
            throw GraphError("dual task " + std::to_string(t.id) + " is not reachable from the primal phase");
    const auto from_dual = reach_from(Phase::dual);
    for (const auto& t : tasks) {
        if (t.phase != Phase::primal_recovery || t.ptasks.empty()) continue;
        const int d = ptasks[t.ptasks.front()].domain;
        if (d >= 0 && d < static_cast<int>(domains.size()) && domains[d].n_interface > 0 && !from_dual[t.id])
            throw GraphError("recovery task " + std::to_string(t.id) + " is not reachable from the dual phase");
    }
}

void TaskGraph::refresh_task_weights() {
    for (auto& t : tasks) {
        if (t.ptasks.empty()) continue;
        t.weight = 0.0;
        for (int p : t.ptasks) t.weight += ptasks[p].weight;
    }
}

namespace {

std::string ptask_label(const PTask& p) {
    std::ostringstream os;
    os << to_string(p.kind);
    switch (p.kind) {
    case PTaskKind::interior_factor:
    case PTaskKind::dtn:
    case PTaskKind::rhs_reduce:
    case PTaskKind::recover:
        os << " d" << p.domain;
        break;
    case PTaskKind::blk_factorize:
    case PTaskKind::diag_solve_blk:
        os << " (" << p.row << ")";
        break;
    case PTaskKind::blk_update:
        os << " (" << p.row << "," << p.col << "," << p.pivot << ")";
        break;
    default:
        os << " (" << p.row << "," << p.col << ")";
    }
    return os.str();
}

void build_adjacency(TaskGraph& g) {
    std::sort(g.edges.begin(), g.edges.end(),
              [](const Edge& a, const Edge& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
    g.succ.assign(g.num_tasks(), {});
    g.pred.assign(g.num_tasks(), {});
    for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
        g.succ[g.edges[e].from].push_back(e);
        g.pred[g.edges[e].to].push_back(e);
    }
}

}  // namespace

std::string TaskGraph::to_dot() const {
    std::ostringstream os;
    os << "digraph taskgraph {\n  node [shape=box];\n";
    for (const auto& t : tasks) {
        std::string label = t.ptasks.empty() ? "task " + std::to_string(t.id) : ptask_label(ptasks[t.ptasks.front()]);
        if (t.ptasks.size() > 1) label += " +" + std::to_string(t.ptasks.size() - 1);
        char w[32];
        std::snprintf(w, sizeof w, "%.3g", t.weight);
        os << "  t" << t.id << " [label=\"" << label << "\\n" << w << "\", phase=\"" << to_string(t.phase)
           << "\"];\n";
    }
    for (const auto& e : edges) os << "  t" << e.from << " -> t" << e.to << " [label=\"" << e.bytes << "\"];\n";
    os << "}\n";
    return os.str();
}

std::string TaskGraph::to_json() const {
    nlohmann::json j;
    j["nrhs"] = nrhs;
    j["block_sizes"] = block_sizes;
    j["tasks"] = nlohmann::json::array();
    for (const auto& t : tasks) {
        nlohmann::json jt{{"id", t.id}, {"phase", to_string(t.phase)}, {"weight", t.weight}};
        jt["ptasks"] = nlohmann::json::array();
        for (int pid : t.ptasks) {
            const auto& p = ptasks[pid];
            jt["ptasks"].push_back({{"id", p.id},
                                    {"kind", to_string(p.kind)},
                                    {"domain", p.domain},
                                    {"row", p.row},
                                    {"col", p.col},
                                    {"pivot", p.pivot},
                                    {"weight", p.weight}});
        }
        j["tasks"].push_back(std::move(jt));
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& e : edges) j["edges"].push_back({{"from", e.from}, {"to", e.to}, {"bytes", e.bytes}});
    return j.dump(1);
}

TaskGraph TaskGraph::synthetic(const std::vector<double>& weights, const std::vector<Edge>& edges) {
    TaskGraph g;
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
        Task t;
        t.id = i;
        t.weight = weights[i];
        g.tasks.push_back(t);
    }
    for (const auto& e : edges) {
        if (e.from < 0 || e.to < 0 || e.from >= g.num_tasks() || e.to >= g.num_tasks() || e.from == e.to)
            throw GraphError("invalid edge " + std::to_string(e.from) + " -> " + std::to_string(e.to));
        g.edges.push_back(e);
    }
    build_adjacency(g);
    return g;
}

TaskGraph regroup(const TaskGraph& g, std::vector<std::vector<int>> groups) {
    TaskGraph out;
    out.ptasks = g.ptasks;
    out.block_sizes = g.block_sizes;
    out.nrhs = g.nrhs;
    out.domains = g.domains;

    groups.erase(std::remove_if(groups.begin(), groups.end(), [](const auto& gr) { return gr.empty(); }),
                 groups.end());
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

    const int np = static_cast<int>(out.ptasks.size());
    std::vector<int> slot(np, -1);
    for (auto& p : out.ptasks) p.task = -1;
    for (int t = 0; t < static_cast<int>(groups.size()); ++t) {
        Task task;
        task.id = t;
        task.phase = phase_of(out.ptasks[groups[t].front()].kind);
        for (int s = 0; s < static_cast<int>(groups[t].size()); ++s) {
            const int p = groups[t][s];
            if (p < 0 || p >= np || out.ptasks[p].task >= 0)
                throw GraphError("ptask " + std::to_string(p) + " is missing or grouped twice");
            if (phase_of(out.ptasks[p].kind) != task.phase) throw GraphError("a task mixes phases");
            out.ptasks[p].task = t;
            slot[p] = s;
            task.weight += out.ptasks[p].weight;
        }
        task.ptasks = groups[t];
        out.tasks.push_back(std::move(task));
    }
    for (const auto& p : out.ptasks)
        if (p.task < 0) throw GraphError("ptask " + std::to_string(p.id) + " belongs to no task");

    std::map<std::pair<int, int>, std::int64_t> edge_bytes;
    for (const auto& task : out.tasks) {
        std::set<std::pair<int, int>> fetched;
        for (int p : task.ptasks) {
            for (const auto& in : out.ptasks[p].inputs) {
                const int src = out.ptasks[in.ptask].task;
                if (src == task.id) {
                    if (slot[in.ptask] >= slot[p])
                        throw GraphError("ptask " + std::to_string(p) + " reads a later ptask of its own task");
                    continue;
                }
                auto& b = edge_bytes[{src, task.id}];
                if (fetched.insert({in.ptask, in.part}).second) b += in.bytes;
            }
        }
    }
    for (const auto& [key, bytes] : edge_bytes) out.edges.push_back({key.first, key.second, bytes});
    build_adjacency(out);
    return out;
}

TaskGraph build_task_graph(const SymbolicFactorization& symb, const std::vector<DomainProblem>& domains,
                           const ReducedLayout& layout, int nrhs) {
    const int nb = layout.num_blocks();
    const int nd = static_cast<int>(domains.size());
    if (symb.num_blocks != nb) throw GraphError("symbolic factorization has the wrong number of block rows");
    if (static_cast<int>(layout.domains.size()) != nd) throw GraphError("layout does not match the domain list");
    for (const auto& key : layout.pattern())
        if (!symb.fill_pattern.count(key))
            throw GraphError("block (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                             ") is missing from the symbolic pattern");

    TaskGraph g;
    g.block_sizes = layout.block_sizes();
    g.nrhs = nrhs;
    for (const auto& dp : domains)
        g.domains.push_back({dp.num_interior(), dp.interior_nnz(), dp.num_interface()});
    const auto& bs = g.block_sizes;

    std::map<BlockKey, std::vector<int>> block_domains;
    std::vector<std::vector<int>> row_domains(nb);
    for (int d = 0; d < nd; ++d) {
        const auto& rows = layout.domains[d].rows;
        for (std::size_t a = 0; a < rows.size(); ++a) {
            row_domains[rows[a]].push_back(d);
            for (std::size_t c = 0; c <= a; ++c) block_domains[{rows[a], rows[c]}].push_back(d);
        }
    }

    auto add = [&](PTaskKind kind, int domain, int row, int col, int pivot, std::int64_t out_bytes) {
        PTask p;
        p.id = static_cast<int>(g.ptasks.size());
        p.kind = kind;
        p.domain = domain;
        p.row = row;
        p.col = col;
        p.pivot = pivot;
        p.output_bytes = out_bytes;
        g.ptasks.push_back(std::move(p));
        return g.ptasks.back().id;
    };
    auto input = [&](int p, int src, int part, std::int64_t bytes) { g.ptasks[p].inputs.push_back({src, part, bytes}); };

    std::vector<int> factor_of(nd), dtn_of(nd), rhs_of(nd);
    for (int d = 0; d < nd; ++d) {
        const int nbd = domains[d].num_interface();
        factor_of[d] = add(PTaskKind::interior_factor, d, -1, -1, -1, interior_factor_bytes(g.domains[d]));
        dtn_of[d] = add(PTaskKind::dtn, d, -1, -1, -1, dense_bytes(nbd, nbd));
        input(dtn_of[d], factor_of[d], part_whole, g.ptasks[factor_of[d]].output_bytes);
        rhs_of[d] = add(PTaskKind::rhs_reduce, d, -1, -1, -1, dense_bytes(nbd, nrhs));
        input(rhs_of[d], factor_of[d], part_whole, g.ptasks[factor_of[d]].output_bytes);
    }

    // Last writer of every block of K, then chaining or assembly.
    std::map<BlockKey, int> block_writer;
    auto attach_block = [&](int p, const BlockKey& key) {
        auto it = block_writer.find(key);
        if (it != block_writer.end()) {
            g.ptasks[p].chain_prev = it->second;
            input(p, it->second, part_whole, dense_bytes(bs[key.first], bs[key.second]));
        } else {
            auto bd = block_domains.find(key);
            if (bd != block_domains.end())
                for (int d : bd->second) {
                    g.ptasks[p].assemble_from.push_back(dtn_of[d]);
                    input(p, dtn_of[d], part_whole, g.ptasks[dtn_of[d]].output_bytes);
                }
        }
        block_writer[key] = p;
    };

    std::vector<int> factorize_of(nb);
    std::map<BlockKey, int> trisolve_of;
    for (int k = 0; k < nb; ++k) {
        factorize_of[k] = add(PTaskKind::blk_factorize, -1, k, k, k, dense_bytes(bs[k], bs[k]));
        attach_block(factorize_of[k], {k, k});
        for (int i : symb.col_rows[k]) {
            const int p = add(PTaskKind::blk_trisolve, -1, i, k, k, 2 * dense_bytes(bs[i], bs[k]));
            input(p, factorize_of[k], part_whole, dense_bytes(bs[k], bs[k]));
            attach_block(p, {i, k});
            trisolve_of[{i, k}] = p;
        }
        const auto& rows = symb.col_rows[k];
        for (std::size_t a = 0; a < rows.size(); ++a)
            for (std::size_t c = 0; c <= a; ++c) {
                const int i = rows[a], j = rows[c];
                const int p = add(PTaskKind::blk_update, -1, i, j, k, dense_bytes(bs[i], bs[j]));
                input(p, trisolve_of.at({i, k}), part_w, dense_bytes(bs[i], bs[k]));
                input(p, trisolve_of.at({j, k}), part_l, dense_bytes(bs[j], bs[k]));
                attach_block(p, {i, j});
            }
    }

    auto seg_bytes = [&](int row) { return dense_bytes(bs[row], nrhs); };
    std::vector<int> c_writer(nb, -1);
    auto attach_c = [&](int p, int row) {
        if (c_writer[row] >= 0) {
            g.ptasks[p].chain_prev = c_writer[row];
            input(p, c_writer[row], part_whole, seg_bytes(row));
        } else {
            for (int d : row_domains[row]) {
                g.ptasks[p].assemble_from.push_back(rhs_of[d]);
                input(p, rhs_of[d], part_whole, g.ptasks[rhs_of[d]].output_bytes);
            }
        }
        c_writer[row] = p;
    };

    std::vector<int> y_of(nb), z_of(nb);
    for (int k = 0; k < nb; ++k) {
        y_of[k] = add(PTaskKind::fwd_solve_blk, -1, k, k, k, seg_bytes(k));
        input(y_of[k], factorize_of[k], part_whole, dense_bytes(bs[k], bs[k]));
        attach_c(y_of[k], k);
        z_of[k] = add(PTaskKind::diag_solve_blk, -1, k, k, k, seg_bytes(k));
        input(z_of[k], factorize_of[k], part_whole, dense_bytes(bs[k], bs[k]));
        g.ptasks[z_of[k]].chain_prev = y_of[k];
        input(z_of[k], y_of[k], part_whole, seg_bytes(k));
        for (int i : symb.col_rows[k]) {
            const int p = add(PTaskKind::fwd_solve_blk, -1, i, k, k, seg_bytes(i));
            input(p, trisolve_of.at({i, k}), part_l, dense_bytes(bs[i], bs[k]));
            input(p, y_of[k], part_whole, seg_bytes(k));
            attach_c(p, i);
        }
    }

    std::vector<int> e_writer(z_of);
    std::vector<int> x_of(nb);
    std::vector<std::vector<int>> row_cols(nb);  // (k, j) in the fill with j < k
    for (int j = 0; j < nb; ++j)
        for (int i : symb.col_rows[j]) row_cols[i].push_back(j);
    for (int k = nb - 1; k >= 0; --k) {
        x_of[k] = add(PTaskKind::bwd_solve_blk, -1, k, k, k, seg_bytes(k));
        input(x_of[k], factorize_of[k], part_whole, dense_bytes(bs[k], bs[k]));
        g.ptasks[x_of[k]].chain_prev = e_writer[k];
        input(x_of[k], e_writer[k], part_whole, seg_bytes(k));
        for (int j : row_cols[k]) {
            const int p = add(PTaskKind::bwd_solve_blk, -1, j, k, k, seg_bytes(j));
            input(p, trisolve_of.at({k, j}), part_l, dense_bytes(bs[k], bs[j]));
            input(p, x_of[k], part_whole, seg_bytes(k));
            g.ptasks[p].chain_prev = e_writer[j];
            input(p, e_writer[j], part_whole, seg_bytes(j));
            e_writer[j] = p;
        }
    }

    for (int d = 0; d < nd; ++d) {
        const int p = add(PTaskKind::recover, d, -1, -1, -1, dense_bytes(domains[d].num_interior(), nrhs));
        input(p, factor_of[d], part_whole, g.ptasks[factor_of[d]].output_bytes);
        for (int row : layout.domains[d].rows) input(p, x_of[row], part_whole, seg_bytes(row));
    }

    std::vector<std::vector<int>> groups;
    for (int d = 0; d < nd; ++d) groups.push_back({factor_of[d], dtn_of[d], rhs_of[d]});
    for (const auto& p : g.ptasks)
        if (phase_of(p.kind) != Phase::primal_reduction) groups.push_back({p.id});
    auto out = regroup(g, std::move(groups));
    out.validate();
    return out;
}

TaskGraph agglomerate(const TaskGraph& g, AgglomerationPolicy policy) {
    if (policy == AgglomerationPolicy::none) return g;

    std::map<std::pair<int, int>, int> trisolve_of;  // (row, pivot) -> ptask
    for (const auto& p : g.ptasks)
        if (p.kind == PTaskKind::blk_trisolve) trisolve_of[{p.row, p.pivot}] = p.id;

    std::vector<int> home(g.ptasks.size(), -1);
    std::vector<std::vector<int>> groups;
    for (const auto& t : g.tasks) {
        for (int p : t.ptasks) home[p] = static_cast<int>(groups.size());
        groups.push_back(t.ptasks);
    }
    for (const auto& p : g.ptasks) {
        if (p.kind != PTaskKind::blk_update) continue;
        const int dst = home[trisolve_of.at({p.row, p.pivot})];
        if (home[p.id] == dst) continue;
        auto& src = groups[home[p.id]];
        src.erase(std::remove(src.begin(), src.end(), p.id), src.end());
        groups[dst].push_back(p.id);
        home[p.id] = dst;
    }
    for (auto& gr : groups)
        if (!gr.empty()) std::sort(gr.begin() + 1, gr.end());
    auto out = regroup(g, std::move(groups));
    out.validate();
    return out;
}

CriticalPath critical_path(const TaskGraph& g) {
    const auto order = g.topological_order();
    const int n = g.num_tasks();
    CriticalPath cp;
    if (n == 0) return cp;
    std::vector<double> best(n, 0.0);
    std::vector<int> via(n, -1);
    for (int v : order) {
        double in = 0.0;
        for (int e : g.pred[v]) {
            const int u = g.edges[e].from;
            if (via[v] < 0 || best[u] > in || (best[u] == in && u < via[v])) {
                in = best[u];
                via[v] = u;
            }
        }
        best[v] = in + g.tasks[v].weight;
    }
    int end = 0;
    for (int v = 1; v < n; ++v)
        if (best[v] > best[end]) end = v;
    cp.length = best[end];
    for (int v = end; v >= 0; v = via[v]) cp.path.push_back(v);
    std::reverse(cp.path.begin(), cp.path.end());
    return cp;
}

}  // namespace d3m
