#include "d3m/blockmat.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "d3m/error.hpp"

namespace d3m {

std::vector<int> ReducedLayout::block_sizes() const {
    std::vector<int> s(num_blocks());
    for (int b = 0; b < num_blocks(); ++b) s[b] = block_size(b);
    return s;
}

std::set<BlockKey> ReducedLayout::pattern() const {
    std::set<BlockKey> p;
    for (int b = 0; b < num_blocks(); ++b) p.emplace(b, b);
    for (const auto& dm : domains)
        for (std::size_t a = 0; a < dm.rows.size(); ++a)
            for (std::size_t c = 0; c <= a; ++c) p.emplace(dm.rows[a], dm.rows[c]);
    return p;
}

ReducedLayout build_reduced_layout(const std::vector<DomainProblem>& domains, const Partition& part) {
    const int n = static_cast<int>(part.owner.size());
    std::vector<char> is_sep(n, 0);
    for (const auto& dp : domains)
        for (int s : dp.interface) is_sep[s] = 1;

    ReducedLayout layout;
    layout.domain_block.assign(part.num_domains, -1);
    std::vector<std::vector<int>> owned(part.num_domains);
    for (int s = 0; s < n; ++s)
        if (is_sep[s]) owned[part.owner[s]].push_back(s);
    for (int d = 0; d < part.num_domains; ++d) {
        if (owned[d].empty()) continue;
        layout.domain_block[d] = layout.num_blocks();
        layout.block_domain.push_back(d);
        layout.block_dofs.push_back(std::move(owned[d]));
    }

    std::vector<int> dof_block(n, -1), dof_offset(n, -1);
    for (int b = 0; b < layout.num_blocks(); ++b)
        for (int o = 0; o < layout.block_size(b); ++o) {
            dof_block[layout.block_dofs[b][o]] = b;
            dof_offset[layout.block_dofs[b][o]] = o;
        }

    layout.domains.resize(domains.size());
    for (std::size_t d = 0; d < domains.size(); ++d) {
        auto& dm = layout.domains[d];
        std::map<int, std::pair<std::vector<int>, std::vector<int>>> by_row;
        const auto& iface = domains[d].interface;
        for (int p = 0; p < static_cast<int>(iface.size()); ++p) {
            auto& [pos, off] = by_row[dof_block[iface[p]]];
            pos.push_back(p);
            off.push_back(dof_offset[iface[p]]);
        }
        for (auto& [row, po] : by_row) {
            dm.rows.push_back(row);
            dm.positions.push_back(std::move(po.first));
            dm.offsets.push_back(std::move(po.second));
        }
    }
    return layout;
}

namespace {

int row_slot(const ReducedLayout::DomainMap& dm, int row) {
    auto it = std::lower_bound(dm.rows.begin(), dm.rows.end(), row);
    if (it == dm.rows.end() || *it != row) return -1;
    return static_cast<int>(it - dm.rows.begin());
}

}  // namespace

void add_block_contribution(Eigen::MatrixXd& block, int row, int col, const ReducedLayout::DomainMap& dm,
                            const Eigen::MatrixXd& s_local) {
    const int a = row_slot(dm, row), c = row_slot(dm, col);
    if (a < 0 || c < 0) return;
    const auto& rp = dm.positions[a];
    const auto& ro = dm.offsets[a];
    const auto& cp = dm.positions[c];
    const auto& co = dm.offsets[c];
    for (std::size_t q = 0; q < cp.size(); ++q)
        for (std::size_t p = 0; p < rp.size(); ++p) block(ro[p], co[q]) += s_local(rp[p], cp[q]);
}

void add_rhs_contribution(Eigen::MatrixXd& segment, int row, const ReducedLayout::DomainMap& dm,
                          const Eigen::MatrixXd& g_local) {
    const int a = row_slot(dm, row);
    if (a < 0) return;
    const auto& rp = dm.positions[a];
    const auto& ro = dm.offsets[a];
    for (std::size_t p = 0; p < rp.size(); ++p) segment.row(ro[p]) += g_local.row(rp[p]);
}

std::set<BlockKey> BlockMatrix::pattern() const {
    std::set<BlockKey> p;
    for (const auto& [key, _] : blocks) p.insert(key);
    return p;
}

namespace {

std::vector<int> offsets_of(const std::vector<int>& sizes) {
    std::vector<int> off(sizes.size() + 1, 0);
    for (std::size_t i = 0; i < sizes.size(); ++i) off[i + 1] = off[i] + sizes[i];
    return off;
}

}  // namespace

Eigen::MatrixXd BlockMatrix::to_dense() const {
    const auto off = offsets_of(block_sizes);
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(off.back(), off.back());
    for (const auto& [key, blk] : blocks) {
        const auto [i, j] = key;
        if (i == j) {
            Eigen::MatrixXd full = blk.selfadjointView<Eigen::Lower>();
            k.block(off[i], off[i], block_sizes[i], block_sizes[i]) = full;
        } else {
            k.block(off[i], off[j], block_sizes[i], block_sizes[j]) = blk;
            k.block(off[j], off[i], block_sizes[j], block_sizes[i]) = blk.transpose();
        }
    }
    return k;
}

Eigen::MatrixXd BlockMatrix::rhs_dense() const { return stack_blocks(rhs_blocks); }

BlockMatrix assemble_dual_matrix(const std::vector<DtnContribution>& contribs, const ReducedLayout& layout) {
    if (contribs.size() != layout.domains.size())
        throw AssemblyError("expected one contribution per domain");
    BlockMatrix k;
    k.block_sizes = layout.block_sizes();
    int nrhs = -1;
    for (std::size_t d = 0; d < contribs.size(); ++d) {
        const auto& c = contribs[d];
        const auto& dm = layout.domains[d];
        int iface = 0;
        for (const auto& pos : dm.positions) iface += static_cast<int>(pos.size());
        if (c.domain_id != static_cast<int>(d) || c.s_local.rows() != iface || c.s_local.cols() != iface ||
            c.g_local.rows() != iface)
            throw AssemblyError("contribution of domain " + std::to_string(d) + " does not match its interface");
        if (iface == 0) continue;
        if (nrhs < 0) nrhs = static_cast<int>(c.g_local.cols());
        if (c.g_local.cols() != nrhs) throw AssemblyError("inconsistent number of right-hand sides");
    }
    if (nrhs < 0) nrhs = contribs.empty() ? 0 : static_cast<int>(contribs.front().g_local.cols());

    for (const auto& key : layout.pattern())
        k.blocks.emplace(key, Eigen::MatrixXd::Zero(k.block_sizes[key.first], k.block_sizes[key.second]));
    for (int b = 0; b < k.num_block_rows(); ++b) k.rhs_blocks.push_back(Eigen::MatrixXd::Zero(k.block_sizes[b], nrhs));

    for (std::size_t d = 0; d < contribs.size(); ++d) {
        const auto& dm = layout.domains[d];
        for (std::size_t a = 0; a < dm.rows.size(); ++a) {
            for (std::size_t c = 0; c <= a; ++c)
                add_block_contribution(k.blocks.at({dm.rows[a], dm.rows[c]}), dm.rows[a], dm.rows[c], dm,
                                       contribs[d].s_local);
            add_rhs_contribution(k.rhs_blocks[dm.rows[a]], dm.rows[a], dm, contribs[d].g_local);
        }
    }
    return k;
}

std::string block_matrix_to_json(const BlockMatrix& k) {
    nlohmann::json j;
    j["block_sizes"] = k.block_sizes;
    j["blocks"] = nlohmann::json::array();
    for (const auto& [key, blk] : k.blocks) {
        std::vector<double> data;
        data.reserve(blk.size());
        for (Eigen::Index r = 0; r < blk.rows(); ++r)
            for (Eigen::Index c = 0; c < blk.cols(); ++c) data.push_back(blk(r, c));
        j["blocks"].push_back({{"row", key.first}, {"col", key.second}, {"data", data}});
    }
    j["rhs"] = nlohmann::json::array();
    for (const auto& seg : k.rhs_blocks) {
        std::vector<double> data;
        for (Eigen::Index r = 0; r < seg.rows(); ++r)
            for (Eigen::Index c = 0; c < seg.cols(); ++c) data.push_back(seg(r, c));
        j["rhs"].push_back({{"cols", seg.cols()}, {"data", data}});
    }
    return j.dump(1);
}

BlockMatrix block_matrix_from_json(const std::string& text) {
    BlockMatrix k;
    try {
        const auto j = nlohmann::json::parse(text);
        k.block_sizes = j.at("block_sizes").get<std::vector<int>>();
        const int nb = k.num_block_rows();
        for (const auto& b : j.at("blocks")) {
            const int r = b.at("row").get<int>(), c = b.at("col").get<int>();
            if (r < 0 || r >= nb || c < 0 || c > r) throw ParseError("block index out of range", 0);
            const auto data = b.at("data").get<std::vector<double>>();
            const int rows = k.block_sizes[r], cols = k.block_sizes[c];
            if (static_cast<int>(data.size()) != rows * cols) throw ParseError("block data has wrong length", 0);
            Eigen::MatrixXd m(rows, cols);
            for (int x = 0; x < rows; ++x)
                for (int y = 0; y < cols; ++y) m(x, y) = data[static_cast<std::size_t>(x) * cols + y];
            k.blocks.emplace(BlockKey{r, c}, std::move(m));
        }
        const auto& rhs = j.at("rhs");
        if (static_cast<int>(rhs.size()) != nb) throw ParseError("rhs block count mismatch", 0);
        for (int b = 0; b < nb; ++b) {
            const int cols = rhs[b].at("cols").get<int>();
            const auto data = rhs[b].at("data").get<std::vector<double>>();
            if (static_cast<int>(data.size()) != k.block_sizes[b] * cols) throw ParseError("rhs data has wrong length", 0);
            Eigen::MatrixXd m(k.block_sizes[b], cols);
            for (int x = 0; x < k.block_sizes[b]; ++x)
                for (int y = 0; y < cols; ++y) m(x, y) = data[static_cast<std::size_t>(x) * cols + y];
            k.rhs_blocks.push_back(std::move(m));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("block matrix json: ") + e.what(), 0);
    }
    return k;
}

SymbolicFactorization symbolic_block_factorize(int num_blocks, const std::set<BlockKey>& pattern) {
    for (const auto& [i, j] : pattern) {
        if (j > i) throw InvalidArgument("pattern entry above the diagonal");
        if (j < 0 || i >= num_blocks) throw InvalidArgument("pattern entry out of range");
    }
    for (int b = 0; b < num_blocks; ++b)
        if (!pattern.count({b, b})) throw InvalidArgument("missing diagonal block " + std::to_string(b));

    SymbolicFactorization s;
    s.num_blocks = num_blocks;
    s.original = pattern;
    std::vector<std::set<int>> cols(num_blocks);
    for (const auto& [i, j] : pattern)
        if (i > j) cols[j].insert(i);

    s.col_rows.resize(num_blocks);
    s.parent.assign(num_blocks, -1);
    for (int k = 0; k < num_blocks; ++k) {
        s.col_rows[k].assign(cols[k].begin(), cols[k].end());
        const auto& rows = s.col_rows[k];
        if (!rows.empty()) s.parent[k] = rows.front();
        for (std::size_t a = 0; a < rows.size(); ++a) {
            for (std::size_t b = 0; b <= a; ++b) {
                const int i = rows[a], j = rows[b];
                if (i > j) cols[j].insert(i);
                s.update_sources[{i, j}].push_back(k);
            }
        }
    }
    for (int k = 0; k < num_blocks; ++k) {
        s.fill_pattern.emplace(k, k);
        for (int i : s.col_rows[k]) s.fill_pattern.emplace(i, k);
    }
    return s;
}

SymbolicFactorization symbolic_block_factorize(const std::set<BlockKey>& pattern) {
    int nb = 0;
    for (const auto& [i, j] : pattern) nb = std::max({nb, i + 1, j + 1});
    return symbolic_block_factorize(nb, pattern);
}

DenseLdlt kernel_factorize_block(const Eigen::MatrixXd& kii) {
    if (kii.rows() != kii.cols()) throw InvalidArgument("diagonal block must be square");
    return bunch_kaufman(kii);
}

TrisolveResult kernel_trisolve_block(Eigen::MatrixXd kik, const DenseLdlt& fkk) {
    const int n = fkk.size();
    if (kik.cols() != n) throw InvalidArgument("trisolve: column count does not match the pivot block");
    TrisolveResult r;
    r.w.resize(kik.rows(), n);
    for (int c = 0; c < n; ++c) r.w.col(c) = kik.col(fkk.perm[c]);
    if (n > 0 && kik.rows() > 0)
        fkk.l.triangularView<Eigen::UnitLower>().transpose().solveInPlace<Eigen::OnTheRight>(r.w);
    r.l = r.w;
    fkk.apply_d_inverse_right(r.l);
    return r;
}

void kernel_update_block(Eigen::MatrixXd& kij, const Eigen::MatrixXd& wik, const Eigen::MatrixXd& ljk, bool diagonal) {
    if (kij.rows() != wik.rows() || kij.cols() != ljk.rows() || wik.cols() != ljk.cols())
        throw InvalidArgument("update: shape mismatch");
    if (wik.cols() == 0 || kij.size() == 0) return;
    if (diagonal) kij.triangularView<Eigen::Lower>() -= wik * ljk.transpose();
    else kij.noalias() -= wik * ljk.transpose();
}

void kernel_update_block(Eigen::MatrixXd& kij, const Eigen::MatrixXd& lik, const DenseLdlt& dkk,
                         const Eigen::MatrixXd& ljk, bool diagonal) {
    if (lik.cols() != dkk.size()) throw InvalidArgument("update: shape mismatch");
    Eigen::MatrixXd w = lik * dkk.block_d();
    kernel_update_block(kij, w, ljk, diagonal);
}

void solve_fwd_diag(const DenseLdlt& fkk, Eigen::MatrixXd& c) {
    if (c.rows() != fkk.size()) throw InvalidArgument("forward solve: dimension mismatch");
    fkk.forward(c);
}

void solve_fwd_offdiag(Eigen::MatrixXd& ci, const Eigen::MatrixXd& lik, const Eigen::MatrixXd& yk) {
    if (ci.rows() != lik.rows() || lik.cols() != yk.rows() || ci.cols() != yk.cols())
        throw InvalidArgument("forward update: dimension mismatch");
    ci.noalias() -= lik * yk;
}

void solve_bwd_offdiag(Eigen::MatrixXd& ej, const Eigen::MatrixXd& lkj, const Eigen::MatrixXd& xk) {
    if (ej.rows() != lkj.cols() || lkj.rows() != xk.rows() || ej.cols() != xk.cols())
        throw InvalidArgument("backward update: dimension mismatch");
    ej.noalias() -= lkj.transpose() * xk;
}

void solve_bwd_diag(const DenseLdlt& fkk, Eigen::MatrixXd& e) {
    if (e.rows() != fkk.size()) throw InvalidArgument("backward solve: dimension mismatch");
    fkk.backward(e);
}

Eigen::MatrixXd BlockFactor::reconstruct() const {
    const auto off = offsets_of(block_sizes);
    const int n = off.back();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < diag.size(); ++k) {
        const int sk = block_sizes[k];
        Eigen::MatrixXd lkk = diag[k].l.triangularView<Eigen::UnitLower>();
        for (int r = 0; r < sk; ++r) g.row(off[k] + diag[k].perm[r]).segment(off[k], sk) = lkk.row(r);
        dm.block(off[k], off[k], sk, sk) = diag[k].block_d();
    }
    for (const auto& [key, blk] : lower) g.block(off[key.first], off[key.second], blk.rows(), blk.cols()) = blk;
    return g * dm * g.transpose();
}

BlockFactor sequential_block_ldlt(const BlockMatrix& k, const SymbolicFactorization& symb) {
    const int nb = k.num_block_rows();
    if (symb.num_blocks != nb) throw InvalidArgument("symbolic factorization does not match the block matrix");
    std::map<BlockKey, Eigen::MatrixXd> work;
    for (const auto& key : symb.fill_pattern) {
        auto it = k.blocks.find(key);
        work[key] = it != k.blocks.end() ? it->second
                                         : Eigen::MatrixXd::Zero(k.block_sizes[key.first], k.block_sizes[key.second]);
    }

    BlockFactor f;
    f.block_sizes = k.block_sizes;
    f.diag.resize(nb);
    for (int p = 0; p < nb; ++p) {
        try {
            f.diag[p] = kernel_factorize_block(work.at({p, p}));
        } catch (const ZeroPivotError& e) {
            throw SingularBlockError(p, e.pivot());
        }
        for (int i : symb.col_rows[p]) {
            auto tr = kernel_trisolve_block(work.at({i, p}), f.diag[p]);
            f.lower[{i, p}] = std::move(tr.l);
            f.work[{i, p}] = std::move(tr.w);
        }
        const auto& rows = symb.col_rows[p];
        for (std::size_t a = 0; a < rows.size(); ++a)
            for (std::size_t b = 0; b <= a; ++b)
                kernel_update_block(work.at({rows[a], rows[b]}), f.work.at({rows[a], p}), f.lower.at({rows[b], p}),
                                    rows[a] == rows[b]);
    }
    return f;
}

std::vector<Eigen::MatrixXd> block_solve(const BlockFactor& f, const SymbolicFactorization& symb,
                                         std::vector<Eigen::MatrixXd> rhs) {
    const int nb = static_cast<int>(f.diag.size());
    if (static_cast<int>(rhs.size()) != nb) throw InvalidArgument("block_solve: wrong number of rhs blocks");
    for (int k = 0; k < nb; ++k)
        if (rhs[k].rows() != f.block_sizes[k]) throw InvalidArgument("block_solve: rhs block has wrong size");

    for (int k = 0; k < nb; ++k) {
        solve_fwd_diag(f.diag[k], rhs[k]);
        for (int i : symb.col_rows[k]) solve_fwd_offdiag(rhs[i], f.lower.at({i, k}), rhs[k]);
    }
    for (int k = 0; k < nb; ++k) f.diag[k].apply_d_inverse(rhs[k]);
    for (int k = nb - 1; k >= 0; --k) {
        solve_bwd_diag(f.diag[k], rhs[k]);
        // rows of column j are ascending, so scanning j downward keeps each
        // destination's contributions in descending k
        for (int j = k - 1; j >= 0; --j) {
            auto it = f.lower.find({k, j});
            if (it != f.lower.end()) solve_bwd_offdiag(rhs[j], it->second, rhs[k]);
        }
    }
    return rhs;
}

Eigen::MatrixXd stack_blocks(const std::vector<Eigen::MatrixXd>& blocks) {
    Eigen::Index rows = 0, cols = 0;
    for (const auto& b : blocks) rows += b.rows(), cols = std::max(cols, b.cols());
    Eigen::MatrixXd out(rows, cols);
    Eigen::Index r = 0;
    for (const auto& b : blocks) {
        if (b.rows() > 0) out.middleRows(r, b.rows()) = b;
        r += b.rows();
    }
    return out;
}

}  // namespace d3m
